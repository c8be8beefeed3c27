"""Interval partitions, Boolean cumulants, and mixed moments of a free pair.

The mixed-moment engine expands words in two free families (a positive
variable R and a positive variable Y) by recursive centering: every letter
splits into its mean plus a centered part, and alternating products of
centered free elements vanish under the state.  The expansion is organised
as a right-to-left fold whose states are alternating tuples of centered
legs, which keeps the cost polynomial in the word length.  Everything else
(cumulant inversion, the product formula, the two mixed-cumulant formulas)
is tested against this engine rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import UsageError

MAX_PARTITION_SIZE = 16


# ---------------------------------------------------------------------------
# interval partitions


@dataclass(frozen=True)
class IntervalPartition:
    """Ordered contiguous blocks covering {1, ..., n}, stored as (start, end)."""

    blocks: tuple

    def __post_init__(self):
        if not self.blocks:
            raise UsageError("partition needs at least one block")
        pos = 1
        for start, end in self.blocks:
            if start != pos or end < start:
                raise UsageError(f"blocks not contiguous at {start}")
            pos = end + 1

    @property
    def n(self):
        return self.blocks[-1][1]

    @classmethod
    def from_sizes(cls, sizes):
        blocks = []
        pos = 1
        for s in sizes:
            if s < 1:
                raise UsageError("block sizes must be positive")
            blocks.append((pos, pos + s - 1))
            pos += s
        return cls(tuple(blocks))

    def cuts(self):
        """Split points: set of k where a block ends at k < n."""
        return frozenset(end for _, end in self.blocks[:-1])


def enumerate_interval_partitions(n: int):
    if not 1 <= n <= MAX_PARTITION_SIZE:
        raise UsageError(f"n must be in 1..{MAX_PARTITION_SIZE}, got {n}")
    out = []
    for r in range(n):
        for cuts in combinations(range(1, n), r):
            out.append(_from_cuts(n, cuts))
    return out


def _from_cuts(n, cuts):
    blocks = []
    start = 1
    for c in sorted(cuts):
        blocks.append((start, c))
        start = c + 1
    blocks.append((start, n))
    return IntervalPartition(tuple(blocks))


def partition_join(p: IntervalPartition, q: IntervalPartition) -> IntervalPartition:
    """Smallest common upper bound in the reversed refinement order."""
    if p.n != q.n:
        raise UsageError(f"size mismatch: {p.n} vs {q.n}")
    return _from_cuts(p.n, p.cuts() & q.cuts())


# ---------------------------------------------------------------------------
# moment <-> Boolean cumulant conversion (univariate)


def moments_to_boolean_cumulants(m):
    """From (m_1, ..., m_N) to (b_1, ..., b_N); m_0 = 1 is implied."""
    m = list(m)
    if not m:
        raise UsageError("need at least one moment")
    full = [1] + m
    beta = []
    for n in range(1, len(full)):
        acc = full[n]
        for k in range(1, n):
            acc = acc - beta[k - 1] * full[n - k]
        beta.append(acc)
    return beta


def boolean_cumulants_to_moments(b):
    b = list(b)
    if not b:
        raise UsageError("need at least one cumulant")
    full = [1]
    for n in range(1, len(b) + 1):
        acc = 0
        for k in range(1, n + 1):
            acc = acc + b[k - 1] * full[n - k]
        full.append(acc)
    return full[1:]


# ---------------------------------------------------------------------------
# the free pair oracle


def r_tag(spec):
    """Canonicalize a tag for an element of the algebra generated by R.

    Accepts a function name ("r"), a dict name->exponent, or an iterable of
    (name, exponent) pairs.  The empty tag () is the unit.
    """
    if spec is None or spec == ():
        return ()
    if isinstance(spec, str):
        return ((spec, 1),)
    if isinstance(spec, dict):
        items = spec.items()
    else:
        items = list(spec)
        if items and not isinstance(items[0], tuple):
            raise UsageError(f"cannot interpret tag {spec!r}")
    merged = {}
    for name, exp in items:
        merged[name] = merged.get(name, 0) + int(exp)
    return tuple(sorted((k, v) for k, v in merged.items() if v != 0))


def y_letter(power=1):
    if power < 1:
        raise UsageError("Y letters need a positive power")
    return ("Y", int(power))


def r_letter(tag="r"):
    return ("R", r_tag(tag))


def _is_unit(letter):
    fam, tag = letter
    return fam == "R" and tag == ()


def _merge(a, b):
    """Product of two adjacent same-family letters."""
    fam, ta = a
    _, tb = b
    if fam == "Y":
        return ("Y", ta + tb)
    return ("R", r_tag(list(ta) + list(tb)))


@dataclass(frozen=True)
class MixedWord:
    """A word in the two free families; letters are ("Y", k) or ("R", tag)."""

    letters: tuple

    def __post_init__(self):
        if not self.letters:
            raise UsageError("word must be nonempty")
        for fam, _ in self.letters:
            if fam not in ("Y", "R"):
                raise UsageError(f"unknown family {fam!r}")

    def __len__(self):
        return len(self.letters)


def _letters_of(w):
    if isinstance(w, MixedWord):
        return w.letters
    return MixedWord(tuple(w)).letters


class MomentOracle:
    """State values for the free pair: phi(f(R) R^k) and phi(Y^k).

    Backed by node/weight systems for R and Y (small discrete measures), so
    positivity and traciality of the modelled state hold by construction.
    Registered scalar functions extend the R side beyond plain powers.
    """

    def __init__(self, r_nodes, r_weights, y_nodes, y_weights, funcs=None, max_order=16):
        self.r_nodes = np.asarray(r_nodes, dtype=float)
        self.r_weights = np.asarray(r_weights, dtype=float)
        self.y_nodes = np.asarray(y_nodes, dtype=float)
        self.y_weights = np.asarray(y_weights, dtype=float)
        self.max_order = int(max_order)
        self.funcs = {"r": lambda r: r, "x": lambda r: (1.0 - r) / r}
        if funcs:
            self.funcs.update(funcs)
        for w in (self.r_weights, self.y_weights):
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise UsageError("weights must be positive and sum to 1")
        self._check_hankel(self.r_nodes, self.r_weights, "R")
        self._check_hankel(self.y_nodes, self.y_weights, "Y")
        self._r_cache = {(): 1.0}
        self._y_cache = {0: 1.0}

    @staticmethod
    def _check_hankel(nodes, weights, label):
        m = [float(weights @ nodes**k) for k in range(5)]
        for i in (0, 1):
            det = m[i] * m[i + 2] - m[i + 1] ** 2
            if det < -1e-10:
                raise UsageError(f"{label} moments fail the Hankel window check")

    @classmethod
    def random(cls, seed, n_atoms=None, support=(0.05, 2.0), max_order=16, funcs=None):
        """Seeded oracle with 2-4 atoms per side inside the given support."""
        rng = np.random.default_rng(seed)
        lo, hi = support

        def side():
            k = int(rng.integers(2, 5)) if n_atoms is None else int(n_atoms)
            nodes = np.sort(rng.uniform(lo, hi, size=k))
            w = rng.uniform(0.2, 1.0, size=k)
            return nodes, w / w.sum()

        rn, rw = side()
        yn, yw = side()
        return cls(rn, rw, yn, yw, funcs=funcs, max_order=max_order)

    def phi_y(self, power):
        v = self._y_cache.get(power)
        if v is None:
            if power > self.max_order:
                raise UsageError(
                    f"Y power {power} exceeds oracle depth {self.max_order}"
                )
            v = float(self.y_weights @ self.y_nodes**power)
            self._y_cache[power] = v
        return v

    def phi_r(self, tag):
        v = self._r_cache.get(tag)
        if v is None:
            depth = sum(abs(e) for _, e in tag)
            if depth > self.max_order:
                raise UsageError(
                    f"R tag {tag} exceeds oracle depth {self.max_order}"
                )
            vals = np.ones_like(self.r_nodes)
            for name, exp in tag:
                f = self.funcs.get(name)
                if f is None:
                    raise UsageError(f"unknown R function {name!r}")
                vals = vals * f(self.r_nodes) ** exp
            v = float(self.r_weights @ vals)
            self._r_cache[tag] = v
        return v

    def phi_letter(self, letter):
        fam, tag = letter
        return self.phi_y(tag) if fam == "Y" else self.phi_r(tag)


# ---------------------------------------------------------------------------
# the centering fold


def _fold_suffix_moments(letters, oracle):
    """phi of every suffix of the word, by one right-to-left centering fold.

    State maps alternating tuples of centered legs to coefficients; the
    empty tuple's coefficient after consuming a suffix is phi of that suffix.
    """
    state = {(): 1.0}
    out = []
    for a in reversed(letters):
        fam_a = a[0]
        phi_a = oracle.phi_letter(a)
        new = {}

        def bump(key, val):
            if val != 0.0:
                new[key] = new.get(key, 0.0) + val

        for legs, c in state.items():
            if not legs or legs[0][0] != fam_a:
                if not _is_unit(a):
                    bump((a,) + legs, c)
                bump(legs, c * phi_a)
            else:
                s, rest = legs[0], legs[1:]
                prod = _merge(a, s)
                phi_s = oracle.phi_letter(s)
                phi_prod = oracle.phi_letter(prod)
                if not _is_unit(prod):
                    bump((prod,) + rest, c)
                if not _is_unit(a):
                    bump((a,) + rest, -c * phi_s)
                bump(rest, c * (phi_prod - phi_a * phi_s))
        state = new
        out.append(state.get((), 0.0))
    return out


def free_mixed_moment(w, o: MomentOracle):
    """phi of a word in the free pair, by recursive centering."""
    letters = _letters_of(w)
    return _fold_suffix_moments(letters, o)[-1]


def _subword_moment_table(letters, oracle):
    """moments[(j, e)] = phi(letters[j..e]) for all 0 <= j <= e < n."""
    mom = {}
    for e in range(len(letters)):
        for i, v in enumerate(_fold_suffix_moments(letters[: e + 1], oracle)):
            mom[(e - i, e)] = v
    return mom


def _cumulant_table(letters, oracle):
    """Boolean cumulants of every contiguous subword, via the inversion

    beta(w_j..w_e) = phi(w_j..w_e) - sum_k beta(w_j..w_k) phi(w_{k+1}..w_e).
    """
    mom = _subword_moment_table(letters, oracle)
    n = len(letters)
    beta = {}
    for length in range(1, n + 1):
        for j in range(n - length + 1):
            e = j + length - 1
            acc = mom[(j, e)]
            for k in range(j, e):
                acc -= beta[(j, k)] * mom[(k + 1, e)]
            beta[(j, e)] = acc
    return beta, mom


def boolean_cumulant_of_word(w, o: MomentOracle):
    letters = _letters_of(w)
    beta, _ = _cumulant_table(letters, o)
    return beta[(0, len(letters) - 1)]


# ---------------------------------------------------------------------------
# verification of the product and mixed-cumulant formulas


def verify_product_formula(split, o: MomentOracle, n: int):
    """Residual of the product formula for Boolean cumulants.

    The m grouped blocks of an n-letter word give a cumulant with product
    entries; it must equal the sum of beta_pi over interval partitions pi
    whose join with the grouping is the one-block partition.
    """
    split = list(split)
    if sum(split) != n:
        raise UsageError("split must sum to n")
    if n > 8:
        raise UsageError("product-formula verification capped at n=8")
    letters = _alternating_test_word(n)
    beta, mom = _cumulant_table(letters, o)

    sigma = IntervalPartition.from_sizes(split)
    bounds = [(s - 1, e - 1) for s, e in sigma.blocks]

    # left side: cumulant of the coarse word whose letters are the blocks
    coarse_beta = {}
    m = len(bounds)
    for length in range(1, m + 1):
        for j in range(m - length + 1):
            e = j + length - 1
            acc = mom[(bounds[j][0], bounds[e][1])]
            for k in range(j, e):
                acc -= coarse_beta[(j, k)] * mom[(bounds[k + 1][0], bounds[e][1])]
            coarse_beta[(j, e)] = acc
    lhs = coarse_beta[(0, m - 1)]

    one_n = IntervalPartition.from_sizes([n])
    rhs = 0.0
    for pi in enumerate_interval_partitions(n):
        if partition_join(pi, sigma) == one_n:
            term = 1.0
            for s, e in pi.blocks:
                term *= beta[(s - 1, e - 1)]
            rhs += term
    return abs(lhs - rhs)


def _alternating_test_word(n):
    """Y r Y r^2 Y r ... with varied R powers, to exercise distinct letters."""
    letters = []
    for i in range(n):
        if i % 2 == 0:
            letters.append(y_letter(1 + (i // 2) % 2))
        else:
            letters.append(r_letter((("r", 1 + (i // 2) % 2),)))
    return tuple(letters)


def verify_boolmain(variant: int, n: int, o: MomentOracle):
    """Residual of one of the two mixed-moment/cumulant formulas.

    Variant 1 expands phi(Y_1 X_1 ... Y_n X_n) over splittings; variant 3
    expands beta_{2n+1}(X_1, Y_1, ..., X_n, Y_n, X_{n+1}).  All ingredients
    on both sides are computed independently of one another: plain moments
    by the centering fold, cumulants by interval inversion of those moments.
    """
    if n > 6:
        raise UsageError("mixed-formula verification capped at n=6")
    if variant not in (1, 3):
        raise UsageError("variant must be 1 or 3")
    xs = [r_letter((("r", 1 + i % 2),)) for i in range(n + 1)]
    ys = [y_letter(1 + (i % 2)) for i in range(n)]

    if variant == 1:
        word = []
        for i in range(n):
            word += [ys[i], xs[i]]
        lhs = free_mixed_moment(word, o)
        rhs = 0.0
        for k in range(n):
            for mids in combinations(range(1, n), k):
                js = (0,) + mids + (n,)
                xtag = r_tag([t for j in js[1:] for t in xs[j - 1][1]])
                term = o.phi_r(xtag)
                for l in range(k + 1):
                    lo, hi = js[l], js[l + 1]
                    sub = [ys[lo]]
                    for t in range(lo + 1, hi):
                        sub += [xs[t - 1], ys[t]]
                    term *= boolean_cumulant_of_word(sub, o)
                rhs += term
        return abs(lhs - rhs)

    word = []
    for i in range(n):
        word += [xs[i], ys[i]]
    word.append(xs[n])
    lhs = boolean_cumulant_of_word(word, o)
    rhs = 0.0
    for k in range(2, n + 2):
        for mids in combinations(range(2, n + 1), k - 2):
            js = (1,) + mids + (n + 1,)
            xword = [xs[j - 1] for j in js]
            term = boolean_cumulant_of_word(xword, o)
            for l in range(k - 1):
                lo, hi = js[l], js[l + 1]
                sub = [ys[lo - 1]]
                for t in range(lo + 1, hi):
                    sub += [xs[t - 1], ys[t - 1]]
                term *= boolean_cumulant_of_word(sub, o)
            rhs += term
    return abs(lhs - rhs)
