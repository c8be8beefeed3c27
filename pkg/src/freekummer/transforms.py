"""Analytic transforms of compactly supported measures on the half-line.

A SpectralMeasure is an atom at zero plus a continuous density on a compact
interval, discretized once by a cosine-substitution quadrature rule that is
spectrally accurate for the square-root edge behavior every law in this
package exhibits.  On top of that sit the Cauchy-Stieltjes, moment, eta and
S transforms, Stieltjes inversion with Richardson extrapolation, and the
monotone inversion used to evaluate subordination functions pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError, UsageError
from .series import Series1, series_mul, series_reciprocal, series_revert

DEFAULT_QUAD_NODES = 2048
DEFAULT_EPS_LADDER = (1e-2, 5e-3, 2.5e-3)


class SpectralMeasure:
    """atom0 * delta_0 + f(x) dx on [lo, hi], with a prebuilt quadrature rule.

    The rule substitutes x = mid + half*cos(theta) and applies the uniform
    rule at midpoint nodes in theta, so weights already include the density:
    integral of g against the continuous part is simply weights @ g(nodes).
    A zero-length support is a point mass at that location.
    """

    def __init__(self, atom0, support, density, n_nodes=DEFAULT_QUAD_NODES, mass_tol=1e-8):
        lo, hi = float(support[0]), float(support[1])
        if not 0.0 <= atom0 <= 1.0 + 1e-12:
            raise UsageError(f"atom weight {atom0} outside [0, 1]")
        if lo < -1e-12:
            raise UsageError("all mass must sit on the nonnegative half-line")
        if hi < lo:
            raise UsageError("support interval is reversed")
        self.atom0 = float(atom0)
        self.support = (lo, hi)
        self.density = density

        if hi - lo < 1e-14:
            self.nodes = np.array([lo])
            self.weights = np.array([1.0 - self.atom0])
        else:
            n = int(n_nodes)
            mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
            theta = (np.arange(n) + 0.5) * np.pi / n
            x = mid + half * np.cos(theta)
            fx = np.asarray(density(x), dtype=float)
            if np.any(fx < -1e-12):
                raise UsageError("density is negative at quadrature nodes")
            self.nodes = x
            self.weights = (np.pi / n) * half * np.sin(theta) * np.clip(fx, 0.0, None)
        mass = self.atom0 + self.weights.sum()
        if abs(mass - 1.0) > mass_tol:
            raise UsageError(f"total mass {mass} is not 1 within {mass_tol}")

    def mass(self):
        return self.atom0 + float(self.weights.sum())

    def moment(self, k):
        if k == 0:
            return self.mass()
        return float(self.weights @ self.nodes**k)

    def __repr__(self):
        lo, hi = self.support
        return f"SpectralMeasure(atom0={self.atom0:.6g}, support=({lo:.6g}, {hi:.6g}))"


@dataclass(frozen=True)
class MomentSequence:
    """m_0 = 1, m_1, ..., m_N."""

    m: tuple
    positive: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.m or abs(self.m[0] - 1.0) > 1e-10:
            raise UsageError("moment sequence must start with m_0 = 1")
        if self.positive:
            m = self.m
            for i in range(min(2, len(m) - 2)):
                det = m[i] * m[i + 2] - m[i + 1] ** 2
                if det < -1e-10:
                    raise UsageError("Hankel window check failed for positive measure")

    def __len__(self):
        return len(self.m)

    def __getitem__(self, k):
        return self.m[k]


def moments(mu: SpectralMeasure, N: int) -> MomentSequence:
    return MomentSequence(tuple(mu.moment(k) for k in range(N + 1)), positive=True)


def cauchy_transform(mu: SpectralMeasure, z) -> complex:
    z = complex(z)
    lo, hi = mu.support
    if z.imag == 0.0:
        margin = 1e-12 * max(1.0, hi)
        if lo - margin <= z.real <= hi + margin:
            raise DomainError(f"z={z} lies inside the support [{lo}, {hi}]")
        if mu.atom0 > 0 and z.real == 0.0:
            raise DomainError("z=0 hits the atom at zero")
    out = complex(mu.weights @ (1.0 / (z - mu.nodes)))
    if mu.atom0 > 0:
        out += mu.atom0 / z
    return out


def moment_transform(mu: SpectralMeasure, z) -> complex:
    z = complex(z)
    if z == 0:
        return 0.0 + 0.0j
    if z.imag == 0.0 and z.real != 0.0:
        lo, hi = mu.support
        s = 1.0 / z.real
        if lo - 1e-12 <= s <= hi + 1e-12:
            raise DomainError(f"1 - z x vanishes on the support for z={z}")
    return complex(mu.weights @ (z * mu.nodes / (1.0 - z * mu.nodes)))


def moment_transform_series(mu: SpectralMeasure, N: int) -> Series1:
    return Series1([0.0] + [mu.moment(k) for k in range(1, N + 1)])


def eta_transform(mu: SpectralMeasure, z) -> complex:
    M = moment_transform(mu, z)
    if abs(M + 1.0) < 1e-12:
        raise DomainError(f"moment transform hits -1 at z={z}; eta has a pole")
    return M / (M + 1.0)


def eta_transform_series(mu: SpectralMeasure, N: int) -> Series1:
    M = moment_transform_series(mu, N)
    onepm = Series1([1.0] + list(M.coeffs[1:]))
    return series_mul(M, series_reciprocal(onepm))


def s_transform_series(mu: SpectralMeasure, N: int) -> Series1:
    """Expansion of (z+1)/z * Minv(z) around 0, via series reversion."""
    m1 = mu.moment(1)
    if abs(m1) < 1e-14:
        raise DomainError("S-transform needs a nonzero first moment")
    M = moment_transform_series(mu, N + 1)
    minv = series_revert(M)
    shifted = Series1(list(minv.coeffs[1:]))  # Minv(z)/z, order N
    zp1 = Series1([1.0, 1.0] + [0.0] * (N - 1)) if N >= 1 else Series1([1.0])
    return series_mul(zp1, shifted)


def _check_ladder(eps_ladder):
    ladder = [float(e) for e in eps_ladder]
    if sorted(ladder, reverse=True) != ladder or len(set(ladder)) != len(ladder):
        raise UsageError("eps ladder must be strictly decreasing")
    return ladder


def _check_tail_decay(G):
    T = 1e8
    tail = -T * complex(G(-T))
    if not (0.5 < tail.real < 2.0) or abs(tail.imag) > 1e-6:
        raise DomainError("Cauchy transform does not decay like 1/z at infinity")


def extrapolated_density(G, eps_ladder=DEFAULT_EPS_LADDER):
    """Vectorized x -> lim -Im G(x + i eps)/pi via Richardson over the ladder."""
    ladder = _check_ladder(eps_ladder)
    if len(ladder) == 1:
        row = np.array([1.0])
    else:
        V = np.vander(np.asarray(ladder), N=len(ladder), increasing=True)
        row = np.linalg.solve(V.T, np.eye(len(ladder))[0])

    def density(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.empty((len(ladder), len(x)))
        for i, eps in enumerate(ladder):
            vals[i] = [-complex(G(complex(xi, eps))).imag / np.pi for xi in x]
        return np.clip(row @ vals, 0.0, None)

    return density


def atom_at_zero(G, t=1e-8):
    """Mass at the origin from -t G(-t), with the sqrt(t) term cancelled.

    Densities here can carry an inverse-square-root factor at the origin,
    which contributes a sqrt(t) error term; the 2 E(t/4) - E(t) combination
    removes it exactly.
    """
    e1 = -t * complex(G(-t)).real
    e2 = -(t / 4) * complex(G(-t / 4)).real
    return min(1.0, max(0.0, 2 * e2 - e1))


def stieltjes_invert(G, grid, eps_ladder=DEFAULT_EPS_LADDER, atom_t=1e-8,
                     n_nodes=DEFAULT_QUAD_NODES, mass_tol=0.05) -> SpectralMeasure:
    """Recover a measure from its Cauchy transform.

    Density on the grid comes from -Im G(x + i eps)/pi extrapolated to
    eps=0 through the ladder (Richardson in powers of eps); the atom at
    zero from the -t G(-t) probe.  The returned density interpolates the
    grid values linearly, so it is exact at the grid points themselves.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise UsageError("grid must be a 1-d array with at least two points")
    _check_tail_decay(G)

    # Extrapolation blows up right at a square-root edge, so evaluation
    # points are pulled a small margin inside the window; the first and
    # last grid cells inherit the nearest interior value.
    margin = 1e-3 * (grid[-1] - grid[0])
    xeval = np.clip(grid, grid[0] + margin, grid[-1] - margin)
    dens = extrapolated_density(G, eps_ladder)(xeval)
    atom0 = atom_at_zero(G, atom_t)

    def density(x):
        return np.interp(x, grid, dens)

    return SpectralMeasure(atom0, (grid[0], grid[-1]), density,
                           n_nodes=n_nodes, mass_tol=mass_tol)


def invert_M_on_negative_axis(Mfunc, target, xtol=1e-14) -> float:
    """Unique z < 0 with Mfunc(z) = target, for strictly increasing Mfunc.

    The moment transform of a positive measure increases on the negative
    axis from -(1 - atom mass) up to 0, so a bracket always exists when the
    target is in range; it is found by doubling and closed by a bracketed
    root solve.
    """
    if not np.isfinite(target):
        raise UsageError("target must be finite")
    if target >= 0:
        raise DomainError("targets must be negative; M maps (-inf,0) into (-1,0)")
    b = -1e-13
    mb = Mfunc(b)
    while mb - target <= 0:
        # M tends to 0 from below, so any negative target is reachable by
        # moving the near end of the bracket toward the origin
        b /= 1024.0
        if b > -1e-280:
            raise DomainError(f"target {target} is too close to zero to resolve")
        mb = Mfunc(b)
    a, prev = -1.0, mb
    ma = Mfunc(a)
    while ma - target > 0:
        if ma > prev + 1e-13:
            raise DomainError("function is not increasing on the negative axis")
        prev = ma
        a *= 4.0
        if a < -1e18:
            raise DomainError(f"target {target} is below the attainable range")
        ma = Mfunc(a)
    mid = 0.5 * (a + b)
    if not min(Mfunc(a), Mfunc(b)) - 1e-12 <= Mfunc(mid) <= max(Mfunc(a), Mfunc(b)) + 1e-12:
        raise DomainError("function is not monotone on the bracket")
    try:
        return float(brentq(lambda z: Mfunc(z) - target, a, b, xtol=xtol, rtol=8.9e-16))
    except Exception as exc:  # pragma: no cover - brentq is robust on real brackets
        raise NumericError(f"root solve failed on [{a}, {b}]: {exc}") from None
