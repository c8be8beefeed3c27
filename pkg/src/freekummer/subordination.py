"""Subordination of free multiplicative convolution, at desk scale.

Given two free positive variables with known marginals, the moment
transform of their product is subordinated: M of the product equals
M of either factor composed with an analytic function vanishing at 0.
This module builds those functions as truncated series (coefficients
are alternating Boolean cumulants), evaluates them pointwise on the
negative real axis by monotone inversion, and constructs the weighted
eta functions used by the two-resolvent machinery, each through two
independent routes that are required to agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError, UsageError
from .partitions import (
    MomentOracle,
    _cumulant_table,
    boolean_cumulant_of_word,
    free_mixed_moment,
    r_letter,
    r_tag,
    y_letter,
)
from .series import (
    Series1,
    Series2,
    antisym_divided_difference,
    divided_difference,
    series_compose,
    series_mul,
    series_reciprocal,
    series_revert,
    series2_from_w,
    series2_from_z,
)
from .transforms import SpectralMeasure, invert_M_on_negative_axis

CROSSCHECK_ORDER = 6
CROSSCHECK_TOL = 1e-10


def _nodes_weights(source, side):
    """One discrete marginal (nodes, weights) from a supported source.

    Accepts a MomentOracle (side "r" or "y" picks the marginal), a
    SpectralMeasure (quadrature nodes, atom at zero appended, weights
    normalized), or a plain (nodes, weights) pair.
    """
    if isinstance(source, MomentOracle):
        if side == "r":
            return source.r_nodes, source.r_weights
        return source.y_nodes, source.y_weights
    if isinstance(source, SpectralMeasure):
        nodes, weights = source.nodes, source.weights
        if source.atom0 > 0:
            nodes = np.concatenate([[0.0], nodes])
            weights = np.concatenate([[source.atom0], weights])
        keep = weights > 0
        nodes, weights = nodes[keep], weights[keep]
        return nodes, weights / weights.sum()
    nodes, weights = source
    return np.asarray(nodes, dtype=float), np.asarray(weights, dtype=float)


def _m_point(nodes, weights, z):
    """Moment transform of a discrete measure at a single point."""
    return float(weights @ (z * nodes / (1.0 - z * nodes)))


def _m_series(nodes, weights, order):
    return Series1([0.0] + [float(weights @ nodes**k) for k in range(1, order + 1)])


def _m_floor(nodes, weights):
    # infimum of the moment transform over the negative axis
    return -float(weights[nodes > 0].sum())


def _shift(s: Series1) -> Series1:
    """Multiply a series by its variable; the order grows by one."""
    return Series1([0.0] + [complex(c) for c in s.coeffs])


def product_m_pointwise(r_nodes, r_weights, y_nodes, y_weights, z):
    """Moment transform of the free product measure at a negative point.

    The inverse of M for the product factorizes over the inverses of the
    factors, up to the rational prefactor (1+m)/m.  On (floor, 0) that
    relation is monotone for positive measures, so a bracketed solve is
    unconditionally stable.
    """
    if z >= 0:
        raise DomainError("pointwise product transform needs z < 0")
    floor = max(_m_floor(r_nodes, r_weights), _m_floor(y_nodes, y_weights))

    def gap(m):
        try:
            a = invert_M_on_negative_axis(
                lambda s: _m_point(r_nodes, r_weights, s), m
            )
            b = invert_M_on_negative_axis(
                lambda s: _m_point(y_nodes, y_weights, s), m
            )
        except DomainError:
            # too close to the floor for the inner solves; certainly below z
            return -abs(z) * 1e6 - 1.0
        return (1.0 + m) / m * a * b - z

    hi = -1e-13
    if gap(hi) <= 0:
        raise DomainError(f"target z={z} too close to zero to bracket")
    lo = None
    for k in range(1, 60):
        cand = floor * (1.0 - 0.5**k)
        if gap(cand) < 0:
            lo = cand
            break
        hi = cand
    if lo is None:
        raise DomainError("no bracket for the product transform; z out of range")
    return float(brentq(gap, lo, hi, xtol=1e-14))


def omega2_pointwise(mu_r, m_u, z):
    """Second subordination value at a negative real point.

    mu_r describes the first factor (any source accepted by the series
    constructor); m_u evaluates M of the product.  The value solves
    M_R(omega) = M_U(z) by monotone inversion on the negative axis.
    """
    if z >= 0:
        raise DomainError("subordination evaluated pointwise needs z < 0")
    nodes, weights = _nodes_weights(mu_r, "r")
    target = float(m_u(z))
    return invert_M_on_negative_axis(lambda s: _m_point(nodes, weights, s), target)


def _omega_word(n, lead):
    """Alternating word of length 2n-1 with the given leading family."""
    letters = []
    for i in range(2 * n - 1):
        this = lead if i % 2 == 0 else ("Y" if lead == "R" else "R")
        letters.append(r_letter() if this == "R" else y_letter())
    return tuple(letters)


@dataclass(frozen=True, eq=False)
class SubordinationPair:
    """Both subordination functions and M of the product.

    Series fields are truncated at the construction order.  The *_at
    methods evaluate the same objects pointwise on the negative axis,
    entirely independently of the series (monotone inversion against
    the stored discrete marginals).
    """

    omega1: Series1
    omega2: Series1
    m_product: Series1
    r_nodes: np.ndarray
    r_weights: np.ndarray
    y_nodes: np.ndarray
    y_weights: np.ndarray

    def m_product_at(self, z):
        return product_m_pointwise(
            self.r_nodes, self.r_weights, self.y_nodes, self.y_weights, z
        )

    def omega1_at(self, z):
        target = self.m_product_at(z)
        return invert_M_on_negative_axis(
            lambda s: _m_point(self.y_nodes, self.y_weights, s), target
        )

    def omega2_at(self, z):
        target = self.m_product_at(z)
        return invert_M_on_negative_axis(
            lambda s: _m_point(self.r_nodes, self.r_weights, s), target
        )


def subordination_series(source_r, source_y, order):
    """Build the subordination pair for two free positive variables.

    The product transform comes from brute-force alternating moments of
    the free pair; each subordination series is the reversion of one
    marginal transform composed with it.  Low-order coefficients are
    cross-checked against the alternating Boolean-cumulant expansion,
    which is a structurally different computation.
    """
    if order < 1:
        raise UsageError("order must be at least 1")
    rn, rw = _nodes_weights(source_r, "r")
    yn, yw = _nodes_weights(source_y, "y")
    if abs(float(rw @ rn)) < 1e-12 or abs(float(yw @ yn)) < 1e-12:
        raise DomainError("subordination needs nonzero first moments")

    oracle = MomentOracle(rn, rw, yn, yw, max_order=max(16, order + 2))
    m_r = _m_series(rn, rw, order)
    m_y = _m_series(yn, yw, order)
    word = (r_letter(), y_letter())
    m_u = Series1(
        [0.0] + [free_mixed_moment(word * n, oracle) for n in range(1, order + 1)]
    )

    omega1 = series_compose(series_revert(m_y), m_u)
    omega2 = series_compose(series_revert(m_r), m_u)

    for n in range(1, min(order, CROSSCHECK_ORDER) + 1):
        for om, lead in ((omega1, "R"), (omega2, "Y")):
            beta = boolean_cumulant_of_word(_omega_word(n, lead), oracle)
            got = complex(om.coefficient(n)).real
            if abs(got - beta) > CROSSCHECK_TOL * max(1.0, abs(beta)):
                raise NumericError(
                    f"subordination coefficient {n} ({lead} pattern) "
                    f"disagrees with its cumulant expansion: {got} vs {beta}"
                )

    for om, marginal in ((omega1, m_y), (omega2, m_r)):
        recomposed = series_compose(marginal, om)
        for n in range(1, order + 1):
            d = abs(complex((recomposed - m_u).coefficient(n)))
            if d > 1e-9 * max(1.0, abs(complex(m_u.coefficient(n)))):
                raise NumericError("composed marginal transform misses the product")

    return SubordinationPair(omega1, omega2, m_u, rn, rw, yn, yw)


def verify_useful_identity(pair: SubordinationPair, order, grid=()):
    """Residual of omega1 * omega2 = z * M/(M+1) for the product.

    Checked both as series coefficients up to the given order and
    pointwise at each grid point (negative reals); the worst absolute
    residual is returned.
    """
    n = min(order, pair.m_product.order)
    m_u = pair.m_product.truncate(n)
    lhs = series_mul(pair.omega1.truncate(n), pair.omega2.truncate(n))
    one_plus = Series1([1.0] + [complex(c) for c in m_u.coeffs[1:]])
    eta = series_mul(m_u, series_reciprocal(one_plus))
    rhs = _shift(eta).truncate(n)
    resid = max(abs(complex((lhs - rhs).coefficient(k))) for k in range(n + 1))

    for z in grid:
        m = pair.m_product_at(z)
        point = pair.omega1_at(z) * pair.omega2_at(z) - z * m / (1.0 + m)
        resid = max(resid, abs(point))
    return resid


# ---------------------------------------------------------------------------
# weighted eta functions


@dataclass(frozen=True)
class EtaH:
    """One- and two-variable eta functions weighted by h(R).

    eta1 collects Boolean cumulants with h leading a run of plain R
    letters; eta2 lets the run split on both sides of h.  Setting the
    second variable to zero recovers eta1, and eta2 is symmetric.
    """

    h: tuple
    eta1: Series1
    eta2: Series2


def eta_h_series(source_r, h, order):
    """Weighted eta functions of one positive variable, checked two ways.

    Route one reads the coefficients straight off the Boolean-cumulant
    table of an R-run with h(R) inserted.  Route two expands the closed
    resolvent quotients phi(h(R)(I-zR)^{-1}...) / phi((I-zR)^{-1})...
    as series.  The routes must agree to 1e-10; a gap means a bug in
    one of the engines, so it raises instead of returning.
    """
    if order < 1:
        raise UsageError("order must be at least 1")
    tag = r_tag(h)
    rn, rw = _nodes_weights(source_r, "r")
    yn = np.array([1.0])
    yw = np.array([1.0])
    oracle = MomentOracle(rn, rw, yn, yw, max_order=max(16, 2 * order + 4))

    letters = (r_letter(),) * order + (r_letter(tag),) + (r_letter(),) * order
    beta, _ = _cumulant_table(letters, oracle)
    mid = order
    eta1 = Series1([beta[(mid, mid + k)] for k in range(order + 1)])
    eta2 = Series2(
        {
            (l, k): beta[(mid - l, mid + k)]
            for l in range(order + 1)
            for k in range(order + 1 - l)
        },
        order,
    )

    phi_h_rk = [oracle.phi_r(r_tag(list(tag) + [("r", n)])) for n in range(order + 1)]
    one_plus_m = Series1([1.0] + [oracle.phi_r((("r", n),)) for n in range(1, order + 1)])
    recip = series_reciprocal(one_plus_m)
    eta1_closed = series_mul(Series1(phi_h_rk), recip)
    numer2 = Series2(
        {(l, k): phi_h_rk[l + k] for l in range(order + 1) for k in range(order + 1 - l)},
        order,
    )
    eta2_closed = numer2 * series2_from_z(recip) * series2_from_w(recip)

    worst = 0.0
    for k in range(order + 1):
        a = complex(eta1.coefficient(k))
        b = complex(eta1_closed.coefficient(k))
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    for l in range(order + 1):
        for k in range(order + 1 - l):
            a = complex(eta2.coefficient(l, k))
            b = complex(eta2_closed.coefficient(l, k))
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
            sym = complex(eta2.coefficient(k, l))
            worst = max(worst, abs(a - sym) / max(1.0, abs(a)))
    for k in range(order + 1):
        a = complex(eta2.coefficient(k, 0))
        b = complex(eta1.coefficient(k))
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    if worst > 1e-10:
        raise NumericError(
            f"eta construction routes disagree by {worst:.3e} for tag {tag!r}"
        )
    return EtaH(tag, eta1, eta2)


def eta_exchange_residual(source_r, h, order):
    """Residual of the exchange identity tying eta2 back to eta1.

    The two-variable function equals the divided difference of z*eta1
    plus the antisymmetrized product of eta_R with z*eta1.  Both sides
    are assembled from independently computed pieces.
    """
    e = eta_h_series(source_r, h, order)
    rn, rw = _nodes_weights(source_r, "r")
    m_r = _m_series(rn, rw, order + 1)
    one_plus = Series1([1.0] + [complex(c) for c in m_r.coeffs[1:]])
    eta_r = series_mul(m_r, series_reciprocal(one_plus))

    f = _shift(e.eta1)
    rhs = divided_difference(f) + antisym_divided_difference(eta_r, f)
    worst = 0.0
    for l in range(order + 1):
        for k in range(order + 1 - l):
            d = abs(complex(e.eta2.coefficient(l, k)) - complex(rhs.coefficient(l, k)))
            worst = max(worst, d)
    return worst


def verify_conditional_subordination(source_r, source_y, h, order):
    """Max coefficient gap in the conditional form of subordination.

    The trace of h(R) against the product resolvent is computed twice:
    brute force (alternating mixed moments, half powers cycled away by
    traciality) and through composition with the second subordination
    series.  Returns the largest absolute coefficient difference.
    """
    tag = r_tag(h)
    pair = subordination_series(source_r, source_y, order)
    rn, rw = _nodes_weights(source_r, "r")
    yn, yw = _nodes_weights(source_y, "y")
    oracle = MomentOracle(rn, rw, yn, yw, max_order=max(16, order + 4))

    lhs = [oracle.phi_r(tag)]
    closing = r_letter(r_tag(list(tag) + [("r", 1)]))
    for n in range(1, order + 1):
        word = (y_letter(), r_letter()) * (n - 1) + (y_letter(), closing)
        lhs.append(free_mixed_moment(word, oracle))

    phi_h_rk = Series1(
        [oracle.phi_r(r_tag(list(tag) + [("r", n)])) for n in range(order + 1)]
    )
    rhs = series_compose(phi_h_rk, pair.omega2)
    return max(
        abs(lhs[n] - complex(rhs.coefficient(n)).real) for n in range(order + 1)
    )
