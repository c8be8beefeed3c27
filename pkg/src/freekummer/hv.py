"""The HV exchange of a free pair and its regression characterizations.

Given free positive X and Y, write R = (I + X)^(-1) and form

    U = R^(1/2) Y R^(1/2),          V = (I + U)^(1/2) X (I + U)^(1/2).

This module computes moments of U and V from the joint free moments of
(R, Y), verifies the distributional exchange for free-Kummer and
free-Poisson inputs, expands two-resolvent expectations

    phi(g1(R) (I - z U)^(-1) g2(R) (I - w U)^(-1))

both by brute-force free moments and through subordination closed forms,
and inverts four constant-regression properties of the pair (U, V) back
to the input laws.

An :class:`HvInstance` carries discrete node/weight marginals for R and
Y (exact for atomic inputs, quadrature discretizations for continuous
laws) together with the parameter blocks of the closed-form laws when
they are known.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    FreeKummerParams,
    FreePoissonParams,
    kummer_cauchy,
    kummer_from_quadratic,
    kummer_measure,
    mp_inverse_mean,
    mp_measure,
    pushforward_resolvent_shift,
)
from .errors import DomainError, InconsistencyError, NumericError, UsageError
from .partitions import (
    MomentOracle,
    _cumulant_table,
    free_mixed_moment,
    r_letter,
    r_tag,
    y_letter,
)
from .series import (
    Series1,
    Series2,
    cross_divided_difference,
    divided_difference,
    series2_reciprocal,
    series2_substitute,
    series_mul,
    series_reciprocal,
)
from .subordination import eta_h_series, product_m_pointwise, subordination_series
from .transforms import SpectralMeasure, invert_M_on_negative_axis


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True, eq=False)
class HvInstance:
    """A free pair (X, Y) with X positive, ready for product computations.

    The node/weight arrays are the marginals of R = (I + X)^(-1) and of Y
    that back the moment oracle.  Measures and parameter blocks are kept
    when the instance was built from closed-form laws; pointwise
    transforms prefer them and fall back to the discrete marginals.
    """

    r_nodes: np.ndarray
    r_weights: np.ndarray
    y_nodes: np.ndarray
    y_weights: np.ndarray
    oracle: MomentOracle
    mu_x: SpectralMeasure | None = None
    mu_y: SpectralMeasure | None = None
    mu_r: SpectralMeasure | None = None
    x_params: FreeKummerParams | None = None
    y_params: FreePoissonParams | None = None
    u_params: FreeKummerParams | None = None
    v_params: FreePoissonParams | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def x_strictly_positive(self):
        return bool(np.max(self.r_nodes) < 1.0 - 1e-9)

    def phi_x(self, power):
        """Moment of X, negative powers allowed for strictly positive X."""
        if power < 0 and not self.x_strictly_positive:
            raise DomainError(
                "negative powers of X need X bounded away from zero"
            )
        return self.oracle.phi_r(r_tag({"x": int(power)}))

    def m_u_at(self, z):
        """Moment transform of the product U at a negative real point."""
        if z >= 0.0:
            raise DomainError("the product transform lives on the negative axis")
        if self.u_params is not None:
            pr = self.u_params
            g = kummer_cauchy(pr.alpha, pr.beta, pr.gamma, 1.0 / z)
            return complex(g).real / z - 1.0
        return product_m_pointwise(
            self.r_nodes, self.r_weights, self.y_nodes, self.y_weights, z
        )

    def m_r_at(self, s):
        """Moment transform of R on the negative axis."""
        if self.x_params is not None:
            pr = self.x_params
            g = kummer_cauchy(pr.alpha, pr.beta, pr.gamma, s - 1.0)
            return -s * complex(g).real
        r = self.r_nodes
        return float(np.sum(self.r_weights * s * r / (1.0 - s * r)))

    def m_r_deriv_at(self, s):
        r = self.r_nodes
        return float(np.sum(self.r_weights * r / (1.0 - s * r) ** 2))

    def omega2_at(self, z):
        """Subordination point: the s < 0 with M_R(s) equal to M_U(z)."""
        return invert_M_on_negative_axis(self.m_r_at, self.m_u_at(z))

    def m_u_deriv_at(self, z):
        h = min(1e-5 * max(abs(z), 1e-2), -z / 4.0)
        f = self.m_u_at
        return (
            f(z - 2.0 * h) - 8.0 * f(z - h) + 8.0 * f(z + h) - f(z + 2.0 * h)
        ) / (12.0 * h)


def _clean_marginal(nodes, weights):
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    keep = weights > 0.0
    nodes, weights = nodes[keep], weights[keep]
    if nodes.size == 0:
        raise DomainError("marginal has no mass")
    return nodes, weights / weights.sum()


def _build_instance(r_nodes, r_weights, y_nodes, y_weights, **fields):
    r_nodes, r_weights = _clean_marginal(r_nodes, r_weights)
    y_nodes, y_weights = _clean_marginal(y_nodes, y_weights)
    if np.any(r_nodes <= 0.0) or np.any(r_nodes > 1.0 + 1e-12):
        raise DomainError("the resolvent marginal must live in (0, 1]")
    if np.any(y_nodes < 0.0):
        raise DomainError("Y must be positive")
    x_nodes = (1.0 - r_nodes) / r_nodes
    for nodes, weights, label in (
        (x_nodes, r_weights, "X"),
        (y_nodes, y_weights, "Y"),
    ):
        mean = float(weights @ nodes)
        var = float(weights @ (nodes - mean) ** 2)
        if var <= 1e-12:
            raise DomainError(f"the {label} marginal is degenerate")
    oracle = MomentOracle(r_nodes, r_weights, y_nodes, y_weights)
    return HvInstance(r_nodes, r_weights, y_nodes, y_weights, oracle, **fields)


def hv_instance_from_measures(
    mu_x,
    mu_y,
    *,
    x_params=None,
    y_params=None,
    u_params=None,
    v_params=None,
):
    """Instance from spectral measures of X and Y.

    Atoms at zero become nodes at r = 1 (for X) and y = 0; the continuous
    parts keep their quadrature nodes, so the discrete marginals match the
    measures to quadrature accuracy.  The pushforward law of R is only
    attached when X carries no atom.
    """
    r_nodes = 1.0 / (1.0 + np.asarray(mu_x.nodes, dtype=float))
    r_weights = np.asarray(mu_x.weights, dtype=float)
    if mu_x.atom0 > 0.0:
        r_nodes = np.append(r_nodes, 1.0)
        r_weights = np.append(r_weights, mu_x.atom0)
    y_nodes = np.asarray(mu_y.nodes, dtype=float)
    y_weights = np.asarray(mu_y.weights, dtype=float)
    if mu_y.atom0 > 0.0:
        y_nodes = np.append(y_nodes, 0.0)
        y_weights = np.append(y_weights, mu_y.atom0)
    mu_r = pushforward_resolvent_shift(mu_x) if mu_x.atom0 == 0.0 else None
    return _build_instance(
        r_nodes,
        r_weights,
        y_nodes,
        y_weights,
        mu_x=mu_x,
        mu_y=mu_y,
        mu_r=mu_r,
        x_params=x_params,
        y_params=y_params,
        u_params=u_params,
        v_params=v_params,
    )


def hv_instance_from_params(alpha, beta, gamma):
    """Free-Kummer / free-Poisson pair indexed the way the exchange swaps.

    X gets the law with shape pair (alpha, alpha + beta) at rate gamma and
    Y the free-Poisson law with shape alpha + beta.  The exchanged laws
    of U and V are attached only inside the exchange regime (both shapes
    above one), where they are guaranteed to hold; outside it all
    pointwise transforms fall back to the free product machinery.
    """
    if alpha <= 0.0 or gamma <= 0.0 or alpha + beta <= 0.0:
        raise DomainError("need alpha > 0, gamma > 0 and alpha + beta > 0")
    x_params = FreeKummerParams(alpha, alpha + beta, gamma)
    y_params = FreePoissonParams(alpha + beta, 1.0 / gamma)
    in_regime = alpha > 1.0 and alpha + beta > 1.0
    return hv_instance_from_measures(
        kummer_measure(alpha, alpha + beta, gamma),
        mp_measure(y_params),
        x_params=x_params,
        y_params=y_params,
        u_params=FreeKummerParams(alpha + beta, alpha, gamma) if in_regime else None,
        v_params=FreePoissonParams(alpha, 1.0 / gamma) if in_regime else None,
    )


def hv_instance_from_atoms(x_nodes, x_weights, y_nodes, y_weights):
    """Instance from finitely many atoms for X and for Y."""
    x_nodes = np.asarray(x_nodes, dtype=float)
    if np.any(x_nodes < 0.0):
        raise DomainError("X must be positive")
    x_weights = np.asarray(x_weights, dtype=float)
    y_weights = np.asarray(y_weights, dtype=float)
    return _build_instance(
        1.0 / (1.0 + x_nodes),
        x_weights / x_weights.sum(),
        np.asarray(y_nodes, dtype=float),
        y_weights / y_weights.sum(),
    )


def hv_instance_random(seed, n_atoms=None):
    """Seeded instance with 2 or 3 atoms per side, X strictly positive."""
    rng = np.random.default_rng(seed)

    def count():
        return int(rng.integers(2, 4)) if n_atoms is None else int(n_atoms)

    r = np.sort(rng.uniform(0.1, 0.85, size=count()))
    rw = rng.uniform(0.2, 1.0, size=r.size)
    y = np.sort(rng.uniform(0.1, 2.0, size=count()))
    yw = rng.uniform(0.2, 1.0, size=y.size)
    return _build_instance(r, rw / rw.sum(), y, yw / yw.sum())


def _sub_pair(inst, order):
    key = ("subordination", order)
    pair = inst._cache.get(key)
    if pair is None:
        pair = subordination_series(
            (inst.r_nodes, inst.r_weights), (inst.y_nodes, inst.y_weights), order
        )
        inst._cache[key] = pair
    return pair


def _eta_h(inst, tag, order):
    key = ("eta", tag, order)
    val = inst._cache.get(key)
    if val is None:
        val = eta_h_series((inst.r_nodes, inst.r_weights), tag, order)
        inst._cache[key] = val
    return val


def _needs_inverse(tag):
    return any(name == "x" and exp < 0 for name, exp in tag)


def _require_positive_for(inst, tags):
    if any(_needs_inverse(t) for t in tags) and not inst.x_strictly_positive:
        raise DomainError(
            "a weight uses a negative power of X but X is not bounded away from zero"
        )


# ---------------------------------------------------------------------------
# product moments


@dataclass(frozen=True)
class HvMoments:
    """Moments of U and of V; index 0 holds the unit moment 1."""

    u: tuple
    v: tuple


def _canonical_gaps(gaps):
    k = len(gaps)
    return min(gaps[i:] + gaps[:i] for i in range(k))


def _gap_word(gaps):
    letters = []
    for g in gaps:
        letters.append(r_letter((("r", 1), ("x", int(g)))))
        letters.append(y_letter())
    return tuple(letters)


def _v_moment(inst, n, cache):
    """phi(V^n) by expanding every (I + U) factor of (X (I + U))^n.

    The empty choice gives phi(X^n).  A nonempty choice of U positions
    reduces, after commuting R past X and rotating the trace, to a cyclic
    word of blocks (R X^g) Y whose value depends only on the cyclic gap
    sequence, so gap classes are computed once and cached.
    """
    total = inst.oracle.phi_r(r_tag({"x": n}))
    for mask in range(1, 1 << n):
        ps = [i for i in range(n) if mask >> i & 1]
        k = len(ps)
        gaps = tuple(ps[j + 1] - ps[j] for j in range(k - 1))
        gaps += (n - ps[-1] + ps[0],)
        key = _canonical_gaps(gaps)
        val = cache.get(key)
        if val is None:
            val = free_mixed_moment(_gap_word(key), inst.oracle)
            cache[key] = val
        total += val
    return total


def hv_moments(inst, order):
    """Moments of U and V up to the given order, by free-moment folding."""
    if order < 1:
        raise UsageError("order must be at least 1")
    if order + 1 > inst.oracle.max_order:
        raise UsageError(
            f"order {order} exceeds the oracle moment window {inst.oracle.max_order}"
        )
    alternating = (r_letter(), y_letter())
    u = [1.0]
    v = [1.0]
    cache = {}
    for n in range(1, order + 1):
        u.append(free_mixed_moment(alternating * n, inst.oracle))
        v.append(_v_moment(inst, n, cache))
    return HvMoments(tuple(u), tuple(v))


@dataclass(frozen=True)
class HvPropertyReport:
    """Moment-level comparison of (U, V) against the exchanged laws."""

    alpha: float
    beta: float
    gamma: float
    order: int
    tol: float
    u_dev: tuple
    v_dev: tuple
    max_dev: float
    passed: bool


def verify_hv_property(alpha, beta, gamma, order=8, tol=1e-6):
    """Check that U and V carry the swapped laws, moment by moment.

    X has the free-Kummer law with shapes (alpha, alpha + beta) at rate
    gamma and Y the free-Poisson law with shape alpha + beta; the exchange
    claims U is free-Kummer with shapes (alpha + beta, alpha) and V is
    free-Poisson with shape alpha.  Moments of U and V come from the free
    moment expansion, the reference moments from quadrature against the
    claimed laws; deviations are relative, guarded at 1.
    """
    order = int(order)
    if not 1 <= order <= 8:
        raise UsageError("order must lie in 1..8")
    if alpha <= 1.0 or alpha + beta <= 1.0 or gamma <= 0.0:
        raise UsageError(
            "the exchange regime needs alpha > 1, alpha + beta > 1 and gamma > 0"
        )
    inst = hv_instance_from_params(alpha, beta, gamma)
    moms = hv_moments(inst, order)
    mu_u = kummer_measure(alpha + beta, alpha, gamma)
    mu_v = mp_measure(FreePoissonParams(alpha, 1.0 / gamma))
    u_dev = []
    v_dev = []
    for n in range(1, order + 1):
        want_u = mu_u.moment(n)
        want_v = mu_v.moment(n)
        u_dev.append(abs(moms.u[n] - want_u) / max(1.0, abs(want_u)))
        v_dev.append(abs(moms.v[n] - want_v) / max(1.0, abs(want_v)))
    worst = max(u_dev + v_dev)
    return HvPropertyReport(
        alpha,
        beta,
        gamma,
        order,
        tol,
        tuple(u_dev),
        tuple(v_dev),
        worst,
        worst <= tol,
    )


# ---------------------------------------------------------------------------
# two-resolvent expectations as series


def k_series_bruteforce(inst, g1, g2, order):
    """Coefficients phi(g1(R) U^m g2(R) U^n) by free-moment folding.

    Each coefficient is a single mixed moment: commuting the square roots
    of R around the trace turns g1 U^m g2 U^n into an alternating word in
    (R, Y) whose first letters absorb R g1 and R g2.  Total degree runs to
    the given order.
    """
    if order < 0:
        raise UsageError("order must be nonnegative")
    t1, t2 = r_tag(g1), r_tag(g2)
    _require_positive_for(inst, (t1, t2))
    o = inst.oracle
    both = r_tag(list(t1) + list(t2))
    coeffs = {}
    for m in range(order + 1):
        for n in range(order + 1 - m):
            if m == 0 and n == 0:
                val = o.phi_r(both)
            elif m == 0 or n == 0:
                size = max(m, n)
                word = (r_letter(list(both) + [("r", 1)]),)
                word += (y_letter(), r_letter()) * (size - 1) + (y_letter(),)
                val = free_mixed_moment(word, o)
            else:
                word = (r_letter(list(t1) + [("r", 1)]),)
                word += (y_letter(), r_letter()) * (m - 1) + (y_letter(),)
                word += (r_letter(list(t2) + [("r", 1)]),)
                word += (y_letter(), r_letter()) * (n - 1) + (y_letter(),)
                val = free_mixed_moment(word, o)
            coeffs[(m, n)] = val
    return Series2(coeffs, order)


@dataclass(frozen=True)
class TwoResolventSplit:
    """The two-resolvent series as direct part plus subordination part.

    k1 averages g1 g2 against both subordinated resolvents of R; k2 is
    the rank-one correction proportional to the crossed divided
    difference of the subordination function.  total is their sum.
    """

    k1: Series2
    k2: Series2
    total: Series2


def _double_resolvent_series(inst, tag, order):
    """Series of phi(T (I - z R)^(-1) (I - w R)^(-1)) for T tagged on R."""
    o = inst.oracle
    vals = [o.phi_r(r_tag(list(tag) + [("r", k)])) for k in range(order + 1)]
    coeffs = {
        (i, j): vals[i + j]
        for i in range(order + 1)
        for j in range(order + 1 - i)
    }
    return Series2(coeffs, order)


def k_series_closedform(inst, g1, g2, order):
    """Two-resolvent series through the subordination decomposition.

    Builds k1 and k2 from resolvent averages of R composed with the
    subordination series, with two internal consistency gates: the
    averaged resolvent weight B must have a usable constant term, and
    B times the divided difference of the subordination function must
    reproduce the divided difference of the product transform.
    """
    if order < 0:
        raise UsageError("order must be nonnegative")
    t1, t2 = r_tag(g1), r_tag(g2)
    _require_positive_for(inst, (t1, t2))
    pair = _sub_pair(inst, order + 1)
    om2 = pair.omega2

    f12 = _double_resolvent_series(inst, r_tag(list(t1) + list(t2)), order)
    k1 = series2_substitute(f12, om2, om2)
    a1 = series2_substitute(
        _double_resolvent_series(inst, r_tag(list(t1) + [("r", 1)]), order), om2, om2
    )
    a2 = series2_substitute(
        _double_resolvent_series(inst, r_tag(list(t2) + [("r", 1)]), order), om2, om2
    )
    b = series2_substitute(
        _double_resolvent_series(inst, (("r", 1),), order), om2, om2
    )
    if abs(complex(b.coefficient(0, 0))) < 1e-9:
        raise NumericError(
            "the averaged resolvent weight phi(R ...) is too small to divide by"
        )
    dd_mu = divided_difference(pair.m_product)
    gap = b * divided_difference(om2) - dd_mu
    for (i, j), v in gap.coeffs.items():
        ref = abs(complex(dd_mu.coefficient(i, j)))
        if abs(complex(v)) > 1e-9 * max(1.0, ref):
            raise NumericError(
                "the resolvent average B disagrees with the divided difference "
                "of the product transform"
            )
    k2 = cross_divided_difference(om2) * series2_reciprocal(b) * a1 * a2
    total = k1 + k2
    return TwoResolventSplit(
        k1.truncate(order), k2.truncate(order), total.truncate(order)
    )


# ---------------------------------------------------------------------------
# mixed cumulant tables and the weighted series pair


@dataclass(frozen=True)
class MixedCumulantTable:
    """Boolean cumulants of alternating (Y, R) patterns around a weight.

    y[n] and r[n] are the cumulants of the plain alternating words of
    length 2n + 1 led by Y and by R.  s[(m, n)] inserts the weight h(R)
    between Y-led blocks of lengths 2m + 1 and 2n + 1; t[(m, n)] between
    an R-led block of length 2m and a mirrored block of length 2n.  Both
    tables are stored exactly symmetric.
    """

    tag: tuple
    order: int
    y: tuple
    r: tuple
    s: dict
    t: dict


def mixed_cumulant_table(inst, h, order):
    if order < 0:
        raise UsageError("order must be nonnegative")
    tag = r_tag(h)
    _require_positive_for(inst, (tag,))
    o = inst.oracle
    y, r, hl = y_letter(), r_letter(), r_letter(tag)

    beta_y, _ = _cumulant_table((y,) + (r, y) * order, o)
    y_vals = tuple(beta_y[(0, 2 * n)] for n in range(order + 1))
    beta_r, _ = _cumulant_table((r,) + (y, r) * order, o)
    r_vals = tuple(beta_r[(0, 2 * n)] for n in range(order + 1))

    left = (y,) + (r, y) * order
    beta_s, _ = _cumulant_table(left + (hl,) + left, o)
    mid = len(left)
    s = {}
    for m in range(order + 1):
        for n in range(m, order + 1):
            v = beta_s[(mid - (2 * m + 1), mid + (2 * n + 1))]
            s[(m, n)] = v
            s[(n, m)] = v

    beta_t, _ = _cumulant_table((r, y) * order + (hl,) + (y, r) * order, o)
    mid = 2 * order
    t = {}
    for m in range(order + 1):
        for n in range(m, order + 1):
            v = beta_t[(mid - 2 * m, mid + 2 * n)]
            t[(m, n)] = v
            t[(n, m)] = v

    return MixedCumulantTable(tag, int(order), y_vals, r_vals, s, t)


@dataclass(frozen=True)
class GhSeries:
    """The weighted pair of two-variable series attached to h(R).

    g collects cumulants with h between two Y-led alternating blocks
    (coefficients at z^m w^n with m, n >= 1); h_series the mirrored
    R-led arrangement including the pure weight cumulant at the origin.
    """

    tag: tuple
    g: Series2
    h_series: Series2


def _match2(got, want, label, tol=1e-10):
    order = min(got.order, want.order)
    worst = 0.0
    for i in range(order + 1):
        for j in range(order + 1 - i):
            x = complex(got.coefficient(i, j))
            yv = complex(want.coefficient(i, j))
            worst = max(worst, abs(x - yv) / max(1.0, abs(yv)))
    if worst > tol:
        raise NumericError(f"{label} disagrees by {worst:.3e}")


def _shift_down(s):
    out = {
        (i - 1, j - 1): v for (i, j), v in s.coeffs.items() if i >= 1 and j >= 1
    }
    return Series2(out, s.order - 2)


def GH_series(inst, h, order):
    """Both weighted series, cross-checked against their closed forms.

    The cumulant route reads every coefficient off one Boolean-cumulant
    table per series.  The closed route multiplies divided differences of
    the subordination functions with the weighted eta function composed
    with the second subordination series; the two routes must agree to
    1e-10, as must the two cross ratios tying g and h_series to each
    other.  Any gap raises, since it means one of the engines is wrong.
    """
    if order < 2:
        raise UsageError("order must be at least 2")
    tag = r_tag(h)
    _require_positive_for(inst, (tag,))
    o = inst.oracle
    y, r, hl = y_letter(), r_letter(), r_letter(tag)

    left = (y,) + (r, y) * (order - 2)
    beta_g, _ = _cumulant_table(left + (hl,) + left, o)
    mid = len(left)
    g_coeffs = {}
    for m in range(1, order):
        for n in range(1, order + 1 - m):
            g_coeffs[(m, n)] = beta_g[(mid - (2 * m - 1), mid + (2 * n - 1))]
    g_series = Series2(g_coeffs, order)

    left = (r, y) * order
    beta_h, _ = _cumulant_table(left + (hl,) + (y, r) * order, o)
    mid = len(left)
    h_coeffs = {}
    for m in range(order + 1):
        for n in range(order + 1 - m):
            h_coeffs[(m, n)] = beta_h[(mid - 2 * m, mid + 2 * n)]
    h_series = Series2(h_coeffs, order)

    pair = _sub_pair(inst, order + 1)
    om1, om2, m_u = pair.omega1, pair.omega2, pair.m_product
    one_plus = Series1([1.0] + [complex(c) for c in m_u.coeffs[1:]])
    eta_u = series_mul(m_u, series_reciprocal(one_plus))
    e2 = series2_substitute(_eta_h(inst, tag, order).eta2, om2, om2)
    recip = series2_reciprocal(divided_difference(eta_u))
    g_closed = cross_divided_difference(om2) * divided_difference(om2) * recip * e2
    h_closed = divided_difference(om1) * divided_difference(om2) * recip * e2
    _match2(g_series, g_closed, "the cumulant route for the Y-led series")
    _match2(h_series, h_closed, "the cumulant route for the R-led series")

    _match2(
        g_series * divided_difference(om1),
        h_series * cross_divided_difference(om2),
        "the cross ratio between the two weighted series",
    )
    _match2(
        (h_series - e2) * divided_difference(om2),
        _shift_down(g_series) * cross_divided_difference(om1),
        "the reverse cross ratio between the two weighted series",
    )
    return GhSeries(tag, g_series, h_series)


# ---------------------------------------------------------------------------
# pointwise evaluation of the reciprocal-weighted expectation


def _k_special_diagonal(inst, z, phig, phig2):
    m = inst.m_u_at(z)
    om = inst.omega2_at(z)
    m_d = inst.m_u_deriv_at(z)
    om_d = m_d / inst.m_r_deriv_at(om)
    q_d = (m_d * (om - 1.0) - (m - phig) * om_d) / (om - 1.0) ** 2
    f_d = (om_d * (m - phig) + om * m_d) / (om - 1.0) ** 2
    f_d -= 2.0 * om * (m - phig) * om_d / (om - 1.0) ** 3
    k1 = f_d / om_d + (phig + phig2) / (om - 1.0) ** 2
    k2 = (z * om_d - om) * q_d**2 / (m_d * om_d)
    return float(k1 + k2)


def k_special_pointwise(inst, z, w):
    """phi(1/X (I - z U)^(-1) 1/X (I - w U)^(-1)) at negative real points.

    Closed form in the product transform, the subordination point and the
    two reciprocal moments of X.  Coinciding arguments, and distinct
    arguments whose subordination points collide numerically, fall back
    to the exact diagonal limit.
    """
    if z >= 0.0 or w >= 0.0:
        raise UsageError("both evaluation points must be negative")
    if not inst.x_strictly_positive:
        raise DomainError("the reciprocal weight needs X bounded away from zero")
    phig = inst.phi_x(-1)
    phig2 = inst.phi_x(-2)
    if z == w:
        return _k_special_diagonal(inst, z, phig, phig2)
    mz, mw = inst.m_u_at(z), inst.m_u_at(w)
    oz, ow = inst.omega2_at(z), inst.omega2_at(w)
    if abs(oz - ow) < 1e-11 * max(1.0, abs(oz)):
        return _k_special_diagonal(inst, 0.5 * (z + w), phig, phig2)
    qz = (mz - phig) / (oz - 1.0)
    qw = (mw - phig) / (ow - 1.0)
    k1 = (oz * qz / (oz - 1.0) - ow * qw / (ow - 1.0)) / (oz - ow)
    k1 += (phig + phig2) / ((oz - 1.0) * (ow - 1.0))
    k2 = (w * oz - z * ow) / ((mz - mw) * (oz - ow) * (z - w)) * (qz - qw) ** 2
    return float(k1 + k2)


# ---------------------------------------------------------------------------
# regression constants and the characterizations


@dataclass(frozen=True)
class RegressionConstants:
    """Constants entering the four regression properties of (U, V).

    a, b, c, d are moments of V (first, second, and the two reciprocal
    moments); lam is the mean of Y, p the mean of X, q either the
    reciprocal mean of X (reciprocal cases) or its second moment (the
    quadratic case), K the product transform at -1 and p2 the
    subordination point there.  Any unused field may stay None.
    """

    a: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None
    lam: float | None = None
    p: float | None = None
    q: float | None = None
    K: float | None = None
    p2: float | None = None

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise DomainError(f"constant {name} must be positive")
        if self.a is not None and self.c is not None and self.a * self.c <= 1.0:
            raise DomainError(
                "phi(V) phi(1/V) must exceed 1; these constants describe a degenerate V"
            )
        if self.c is not None and self.d is not None and self.d <= self.c**2:
            raise DomainError(
                "phi(1/V^2) must exceed phi(1/V)^2; these constants describe "
                "a degenerate V"
            )
        if self.a is not None and self.b is not None and self.b <= self.a**2:
            raise DomainError(
                "phi(V^2) must exceed phi(V)^2; these constants describe "
                "a degenerate V"
            )


def compute_constants(inst, case):
    """Measure the regression constants of an instance for one case.

    Positive moments come from the free moment expansion of (U, V) and
    the marginal oracle.  Reciprocal moments of V cannot be recovered
    from finitely many positive moments, so they are quadratures of the
    closed-form law of V; instances without one must have their constants
    assembled directly.
    """
    if case not in (1, 2, 3, 4):
        raise UsageError("case must be 1, 2, 3 or 4")
    moms = hv_moments(inst, 2)
    a = moms.v[1]
    b = moms.v[2]
    p = inst.phi_x(1)
    lam = inst.oracle.phi_y(1)
    big_k = inst.m_u_at(-1.0)
    p2 = inst.omega2_at(-1.0)
    c = d = None
    if case in (1, 2, 4):
        if not inst.x_strictly_positive:
            raise DomainError(
                "reciprocal regression cases need X bounded away from zero"
            )
        q = inst.phi_x(-1)
        if inst.v_params is None:
            raise UsageError(
                "reciprocal moments of V need its closed-form law; assemble "
                "the constants directly for this instance"
            )
        c = mp_inverse_mean(inst.v_params)
        mu_v = mp_measure(inst.v_params)
        c_quad = float(np.sum(mu_v.weights / mu_v.nodes))
        if abs(c - c_quad) > 1e-8 * max(1.0, abs(c)):
            raise NumericError(
                "the reciprocal mean of V disagrees with its quadrature"
            )
        d = float(np.sum(mu_v.weights / mu_v.nodes**2))
    else:
        q = inst.phi_x(2)
    return RegressionConstants(
        a=a, b=b, c=c, d=d, lam=lam, p=p, q=q, K=big_k, p2=p2
    )


def default_residual_grid():
    """Forty log-spaced negative points filling [-5, -0.05]."""
    return tuple(-np.geomspace(0.05, 5.0, 40))


def regression_residual(case, inst, consts, grid=None):
    """Worst absolute residual of one regression identity on a grid.

    Case 1 fixes phi(V | U), case 2 phi(1/V | U), case 3 phi(V^2 | U) and
    case 4 phi(1/V^2 | U); each identity ties the product transform and
    the subordination point to the constants.  The reciprocal cases need
    X strictly positive.
    """
    if case not in (1, 2, 3, 4):
        raise UsageError("case must be 1, 2, 3 or 4")
    if case in (2, 4) and not inst.x_strictly_positive:
        raise DomainError(
            "reciprocal regression cases need X bounded away from zero"
        )
    needed = {
        1: ("a", "p"),
        2: ("c", "q"),
        3: ("b", "q", "lam", "p", "K"),
        4: ("d",),
    }[case]
    for name in needed:
        if getattr(consts, name) is None:
            raise UsageError(f"case {case} needs the constant {name}")
    pts = default_residual_grid() if grid is None else tuple(grid)
    if any(z >= 0.0 for z in pts):
        raise UsageError("grid points must be negative")
    if case in (1, 3) and any(abs(z + 1.0) < 1e-9 for z in pts):
        raise UsageError("this case divides by z + 1; keep the grid away from -1")
    worst = 0.0
    for z in pts:
        m = inst.m_u_at(z)
        if case == 4:
            lhs = k_special_pointwise(inst, z, -1.0)
            rhs = consts.d * (1.0 + (1.0 + 1.0 / z) * m)
        else:
            om = inst.omega2_at(z)
            if case == 1:
                lhs = (om - 1.0) * m + om
                rhs = z / (z + 1.0) * (consts.a * m + consts.a - consts.p)
            elif case == 2:
                lhs = z / (om - 1.0) * (m - consts.q)
                rhs = consts.c * z + consts.c * (z + 1.0) * m
            else:
                dd = (om - 1.0) * m + om
                lhs = consts.q + consts.lam * consts.p + om * consts.p
                lhs += (om - 1.0) * dd + dd * dd / (z * m)
                rhs = consts.b * (1.0 + consts.K) / (z + 1.0)
                rhs += consts.b * z / (z + 1.0) * (m + 1.0)
                rhs += consts.lam * dd / m
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


@dataclass(frozen=True)
class CharacterizationResult:
    """Laws pinned down by a regression case, with the derived weights."""

    x_params: FreeKummerParams
    y_params: FreePoissonParams
    lam: float
    rho: float
    mu_x: SpectralMeasure


def _check_quadratic_determines(shape, linear):
    """A quadratic with negative linear weight and shape at most one is
    compatible with more than one positive law, so nothing is determined."""
    if linear < 0.0 and shape <= 1.0:
        raise DomainError(
            "the quadratic does not pin the law down: need a nonnegative "
            "linear coefficient or shape above one"
        )


def determine_from_equations(case, consts):
    """Invert one regression case back to the laws of X and Y.

    Each case turns its constants into the weight lam of the linear
    subordination relation and the three shape parameters of the
    quadratic satisfied by the transform of X; the quadratic is then
    handed to the reconstruction, whose affine-coefficient consistency
    check closes the loop.  Inconsistent constants surface either as a
    nonpositive lam or as a failed reconstruction.
    """
    if case not in (1, 2, 3):
        raise UsageError("case must be 1, 2 or 3")
    need = {
        1: ("a", "c", "p", "q"),
        2: ("c", "d", "q", "K"),
        3: ("a", "b", "p", "q"),
    }[case]
    for name in need:
        if getattr(consts, name) is None:
            raise UsageError(f"case {case} needs the constant {name}")
    if case in (1, 3) and consts.p <= 0.0:
        raise DomainError("the mean of X must be positive")
    a, b, c, d = consts.a, consts.b, consts.c, consts.d
    p, q = consts.p, consts.q
    if case == 1:
        lam = c * (a - p) + q - c
        den = a * c - 1.0
        alpha = lam / den
        shape = a * c / den
        rate = c / den
        rho = c * (p - a) / den
    elif case == 2:
        lam = q * c**2 - c**3 - d * consts.K
        den = d - c**2
        alpha = lam / den
        shape = d / den
        rate = c**3 / den
        rho = d * consts.K / den
    else:
        lam = (b * p / a - q + a - p) / p
        den = b - a**2
        alpha = a * lam / den
        shape = a**2 / den
        rate = a / den
        rho = a * (p - a) / den
    if lam <= 0.0:
        raise InconsistencyError(
            f"the constants lead to a nonpositive subordination weight {lam:.6g}"
        )
    _check_quadratic_determines(shape, alpha)
    delta = alpha + rate + rho
    try:
        mu_x = kummer_from_quadratic(shape, alpha, rate, delta)
    except UsageError as exc:
        raise InconsistencyError(
            "the affine coefficient of the quadratic does not match the "
            "reconstructed law"
        ) from exc
    return CharacterizationResult(
        FreeKummerParams(shape, alpha, rate),
        FreePoissonParams(alpha, 1.0 / rate),
        float(lam),
        float(rho),
        mu_x,
    )
