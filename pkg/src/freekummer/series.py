"""Truncated formal power series in one and two variables.

These are the order-by-order oracles behind every series identity in the
package: univariate series carry moment and eta expansions, bivariate series
carry the two-resolvent kernels.  Coefficients are complex floats by default;
an exact Fraction mode exists for the combinatorial identity tests, where
roundoff would hide one-ulp disagreements.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import DomainError, UsageError

DEFAULT_ORDER = 12


def _coerce(value, exact):
    if exact:
        if isinstance(value, complex):
            raise UsageError("exact mode holds rational coefficients, not complex")
        return value if isinstance(value, Fraction) else Fraction(value)
    return complex(value)


class Series1:
    """Series c0 + c1 z + ... + cN z^N, truncated at a fixed order N."""

    __slots__ = ("coeffs", "order", "exact")

    def __init__(self, coeffs, exact=False):
        coeffs = [_coerce(c, exact) for c in coeffs]
        if not coeffs:
            raise UsageError("need at least the constant coefficient")
        self.coeffs = tuple(coeffs)
        self.order = len(coeffs) - 1
        self.exact = exact

    @classmethod
    def zero(cls, order, exact=False):
        z = Fraction(0) if exact else 0.0
        return cls([z] * (order + 1), exact=exact)

    @classmethod
    def constant(cls, value, order, exact=False):
        s = cls.zero(order, exact=exact)
        cs = list(s.coeffs)
        cs[0] = _coerce(value, exact)
        return cls(cs, exact=exact)

    @classmethod
    def identity(cls, order, exact=False):
        """The series z."""
        if order < 1:
            raise UsageError("identity series needs order >= 1")
        s = cls.zero(order, exact=exact)
        cs = list(s.coeffs)
        cs[1] = _coerce(1, exact)
        return cls(cs, exact=exact)

    def coefficient(self, i):
        if not 0 <= i <= self.order:
            raise UsageError(f"coefficient index {i} outside order {self.order}")
        return self.coeffs[i]

    def truncate(self, order):
        if order > self.order:
            raise UsageError("cannot extend a truncated series")
        return Series1(self.coeffs[: order + 1], exact=self.exact)

    def __add__(self, other):
        return series_add(self, other)

    def __sub__(self, other):
        return series_add(self, series_scale(other, -1))

    def __mul__(self, other):
        return series_mul(self, other)

    def __call__(self, x):
        acc = 0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:4])
        tail = ", ..." if self.order > 3 else ""
        return f"Series1([{head}{tail}], order={self.order})"


def _join_mode(a, b):
    return a.exact and b.exact


def _demote(s, exact):
    if s.exact and not exact:
        return Series1([complex(c) for c in s.coeffs], exact=False)
    return s


def series_add(a: Series1, b: Series1) -> Series1:
    if a.order != b.order:
        raise UsageError(f"order mismatch: {a.order} vs {b.order}")
    exact = _join_mode(a, b)
    a, b = _demote(a, exact), _demote(b, exact)
    return Series1([x + y for x, y in zip(a.coeffs, b.coeffs)], exact=exact)


def series_scale(a: Series1, c) -> Series1:
    exact = a.exact and not isinstance(c, complex)
    a = _demote(a, exact)
    c = _coerce(c, exact)
    return Series1([c * x for x in a.coeffs], exact=exact)


def series_mul(a: Series1, b: Series1) -> Series1:
    if a.order != b.order:
        raise UsageError(f"order mismatch: {a.order} vs {b.order}")
    exact = _join_mode(a, b)
    a, b = _demote(a, exact), _demote(b, exact)
    n = a.order
    out = [_coerce(0, exact)] * (n + 1)
    for i, ai in enumerate(a.coeffs):
        if ai == 0:
            continue
        for j in range(n + 1 - i):
            out[i + j] += ai * b.coeffs[j]
    return Series1(out, exact=exact)


def series_compose(outer: Series1, inner: Series1) -> Series1:
    """outer(inner(z)) truncated; inner must have zero constant term."""
    if outer.order != inner.order:
        raise UsageError(f"order mismatch: {outer.order} vs {inner.order}")
    if inner.coeffs[0] != 0:
        raise DomainError("inner series must have zero constant term")
    exact = _join_mode(outer, inner)
    outer, inner = _demote(outer, exact), _demote(inner, exact)
    n = outer.order
    acc = Series1.constant(outer.coeffs[n], n, exact=exact)
    for k in range(n - 1, -1, -1):
        acc = series_mul(acc, inner)
        cs = list(acc.coeffs)
        cs[0] += outer.coeffs[k]
        acc = Series1(cs, exact=exact)
    return acc


def series_revert(s: Series1) -> Series1:
    """Compositional inverse t with s(t(w)) = w up to the shared order."""
    if s.coeffs[0] != 0:
        raise DomainError("reversion needs s(0)=0")
    if s.order < 1 or s.coeffs[1] == 0:
        raise DomainError("reversion needs a nonzero linear coefficient")
    n = s.order
    exact = s.exact
    inv1 = (Fraction(1) if exact else 1.0) / s.coeffs[1]
    t = [_coerce(0, exact)] * (n + 1)
    t[1] = inv1
    # powers[j] holds (t truncated so far)^j; rebuilt as t grows
    for m in range(2, n + 1):
        # coefficient of w^m in sum_{j>=2} s_j * t(w)^j, using t_1..t_{m-1}
        tm = _coerce(0, exact)
        power = Series1(t, exact=exact)
        acc = power
        for j in range(2, m + 1):
            acc = series_mul(acc, power)
            if s.coeffs[j] != 0:
                tm += s.coeffs[j] * acc.coeffs[m]
        t[m] = -inv1 * tm
    return Series1(t, exact=exact)


def series_reciprocal(s: Series1) -> Series1:
    if s.coeffs[0] == 0:
        raise DomainError("reciprocal needs a nonzero constant term")
    n = s.order
    exact = s.exact
    inv0 = (Fraction(1) if exact else 1.0) / s.coeffs[0]
    out = [_coerce(0, exact)] * (n + 1)
    out[0] = inv0
    for m in range(1, n + 1):
        acc = _coerce(0, exact)
        for k in range(1, m + 1):
            acc += s.coeffs[k] * out[m - k]
        out[m] = -inv0 * acc
    return Series1(out, exact=exact)


def coefficient(s: Series1, i: int):
    return s.coefficient(i)


class Series2:
    """Bivariate series sum c_(i,j) z^i w^j truncated at total degree N."""

    __slots__ = ("coeffs", "order", "exact")

    def __init__(self, coeffs, order, exact=False):
        if order < 0:
            raise UsageError("order must be nonnegative")
        clean = {}
        for (i, j), v in coeffs.items():
            if i < 0 or j < 0:
                raise UsageError(f"negative exponent pair {(i, j)}")
            if i + j > order:
                raise UsageError(f"entry {(i, j)} beyond total degree {order}")
            v = _coerce(v, exact)
            if v != 0:
                clean[(i, j)] = v
        self.coeffs = clean
        self.order = order
        self.exact = exact

    @classmethod
    def zero(cls, order, exact=False):
        return cls({}, order, exact=exact)

    def coefficient(self, i, j):
        if i < 0 or j < 0 or i + j > self.order:
            raise UsageError(f"index {(i, j)} outside total degree {self.order}")
        return self.coeffs.get((i, j), _coerce(0, self.exact))

    def truncate(self, order):
        if order > self.order:
            raise UsageError("cannot extend a truncated series")
        kept = {k: v for k, v in self.coeffs.items() if k[0] + k[1] <= order}
        return Series2(kept, order, exact=self.exact)

    def __add__(self, other):
        return series2_add(self, other)

    def __sub__(self, other):
        return series2_add(self, series2_scale(other, -1))

    def __mul__(self, other):
        return series2_mul(self, other)

    def __call__(self, z, w):
        acc = 0 * z
        for (i, j), v in self.coeffs.items():
            acc = acc + v * z**i * w**j
        return acc

    def __repr__(self):
        return f"Series2({len(self.coeffs)} terms, order={self.order})"


def _demote2(s, exact):
    if s.exact and not exact:
        return Series2({k: complex(v) for k, v in s.coeffs.items()}, s.order, exact=False)
    return s


def series2_add(a: Series2, b: Series2) -> Series2:
    order = min(a.order, b.order)
    exact = a.exact and b.exact
    a, b = _demote2(a, exact), _demote2(b, exact)
    out = dict(a.truncate(order).coeffs)
    for k, v in b.coeffs.items():
        if k[0] + k[1] <= order:
            out[k] = out.get(k, _coerce(0, exact)) + v
    return Series2(out, order, exact=exact)


def series2_scale(a: Series2, c) -> Series2:
    exact = a.exact and not isinstance(c, complex)
    a = _demote2(a, exact)
    c = _coerce(c, exact)
    return Series2({k: c * v for k, v in a.coeffs.items()}, a.order, exact=exact)


def series2_mul(a: Series2, b: Series2) -> Series2:
    order = min(a.order, b.order)
    exact = a.exact and b.exact
    a, b = _demote2(a, exact), _demote2(b, exact)
    out = {}
    for (i1, j1), v1 in a.coeffs.items():
        for (i2, j2), v2 in b.coeffs.items():
            i, j = i1 + i2, j1 + j2
            if i + j <= order:
                key = (i, j)
                out[key] = out.get(key, _coerce(0, exact)) + v1 * v2
    return Series2(out, order, exact=exact)


def series2_reciprocal(s: Series2) -> Series2:
    c00 = s.coeffs.get((0, 0), _coerce(0, s.exact))
    if c00 == 0:
        raise DomainError("reciprocal needs a nonzero constant term")
    exact = s.exact
    inv0 = (Fraction(1) if exact else 1.0) / c00
    out = {(0, 0): inv0}
    for d in range(1, s.order + 1):
        for i in range(d + 1):
            j = d - i
            acc = _coerce(0, exact)
            for (k, l), v in s.coeffs.items():
                if (k, l) == (0, 0) or k > i or l > j:
                    continue
                prev = out.get((i - k, j - l))
                if prev is not None:
                    acc += v * prev
            if acc != 0:
                out[(i, j)] = -inv0 * acc
    return Series2(out, s.order, exact=exact)


def coefficient2(s: Series2, i: int, j: int):
    return s.coefficient(i, j)


def divided_difference(f: Series1) -> Series2:
    """(f(z) - f(w)) / (z - w) as a series of total degree order-1."""
    if f.order < 1:
        raise UsageError("divided difference needs order >= 1")
    out = {}
    for n in range(1, f.order + 1):
        c = f.coeffs[n]
        if c == 0:
            continue
        for i in range(n):
            out[(i, n - 1 - i)] = out.get((i, n - 1 - i), 0) + c
    return Series2(out, f.order - 1, exact=f.exact)


def cross_divided_difference(f: Series1) -> Series2:
    """(w f(z) - z f(w)) / (z - w); exact to the full input order."""
    out = {}
    for n in range(2, f.order + 1):
        c = f.coeffs[n]
        if c == 0:
            continue
        for i in range(n - 1):
            key = (i + 1, n - 1 - i)
            out[key] = out.get(key, 0) + c
    return Series2(out, f.order, exact=f.exact)


def antisym_divided_difference(a: Series1, b: Series1) -> Series2:
    """(a(z) b(w) - a(w) b(z)) / (z - w).

    With both constant terms zero the result is exact through the shared
    order; otherwise the top degree is contaminated by unknown coefficients
    and the declared order drops by one.
    """
    if a.order != b.order:
        raise UsageError(f"order mismatch: {a.order} vs {b.order}")
    exact = _join_mode(a, b)
    a, b = _demote(a, exact), _demote(b, exact)
    n = a.order
    order = n if (a.coeffs[0] == 0 and b.coeffs[0] == 0) else n - 1
    out = {}
    for m in range(n + 1):
        for k in range(m + 1, n + 1):
            c = a.coeffs[m] * b.coeffs[k] - a.coeffs[k] * b.coeffs[m]
            if c == 0:
                continue
            # (z^m w^k - z^k w^m)/(z-w) = -z^m w^m sum_{i+j=k-m-1} z^i w^j
            for i in range(k - m):
                key = (m + i, m + k - 1 - m - i)
                d = key[0] + key[1]
                if d <= order:
                    out[key] = out.get(key, 0) - c
    return Series2(out, order, exact=exact)


def series2_from_z(f: Series1, order=None) -> Series2:
    """Embed f(z) as a bivariate series constant in w."""
    order = f.order if order is None else min(order, f.order)
    out = {(i, 0): c for i, c in enumerate(f.coeffs[: order + 1]) if c != 0}
    return Series2(out, order, exact=f.exact)


def series2_from_w(f: Series1, order=None) -> Series2:
    order = f.order if order is None else min(order, f.order)
    out = {(0, i): c for i, c in enumerate(f.coeffs[: order + 1]) if c != 0}
    return Series2(out, order, exact=f.exact)


def series2_substitute(F: Series2, s: Series1, t: Series1) -> Series2:
    """F(s(z), t(w)) for constant-free substitutions s, t."""
    if s.coeffs[0] != 0 or t.coeffs[0] != 0:
        raise DomainError("substituted series must have zero constant term")
    order = min(F.order, s.order, t.order)
    exact = F.exact and s.exact and t.exact
    F = _demote2(F, exact)
    s, t = _demote(s, exact), _demote(t, exact)
    zero = _coerce(0, exact)
    one = _coerce(1, exact)

    def powers(base):
        table = [Series1.constant(one, base.order, exact=exact)]
        for _ in range(order):
            table.append(series_mul(table[-1], base))
        return table

    sp, tp = powers(s), powers(t)
    out = {}
    for (i, j), v in F.coeffs.items():
        if i + j > order:
            continue
        for a in range(i, order + 1 - j):
            ca = sp[i].coeffs[a]
            if ca == 0:
                continue
            for b in range(j, order + 1 - a):
                cb = tp[j].coeffs[b]
                if cb == 0:
                    continue
                key = (a, b)
                out[key] = out.get(key, zero) + v * ca * cb
    return Series2(out, order, exact=exact)
