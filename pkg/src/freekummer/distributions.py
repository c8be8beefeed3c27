"""Free-Poisson and free-Kummer laws on the half-line.

Constructors return SpectralMeasure objects; closed-form Cauchy transforms
are provided alongside and tested against quadrature.  The quadratic
equation satisfied by the Kummer transform drives a moment recursion, a
branch-selected reconstruction, and the characterization pipelines built
on top of this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError, UsageError
from .series import Series1, series_mul, series_scale
from .transforms import SpectralMeasure, atom_at_zero, extrapolated_density

ENDPOINT_TOL = 1e-11


@dataclass(frozen=True)
class FreePoissonParams:
    """Rate and scale of a free-Poisson (Marchenko-Pastur) law."""

    lam: float
    gamma_scale: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise UsageError("rate must be positive")
        if not self.gamma_scale > 0:
            raise UsageError("scale must be positive")

    def edges(self):
        r = np.sqrt(self.lam)
        return self.gamma_scale * (1 - r) ** 2, self.gamma_scale * (1 + r) ** 2


def mp_measure(p: FreePoissonParams) -> SpectralMeasure:
    """Free-Poisson law: max{0, 1-lam} at zero plus the semicircle-tilted density."""
    lam, gam = p.lam, p.gamma_scale
    a, b = p.edges()

    def f(x):
        return np.sqrt(np.clip((x - a) * (b - x), 0.0, None)) / (2 * np.pi * gam * x)

    return SpectralMeasure(max(0.0, 1.0 - lam), (a, b), f)


def mp_cauchy(p: FreePoissonParams, z) -> complex:
    """Closed-form Cauchy transform, branch vanishing at infinity."""
    lam, gam = p.lam, p.gamma_scale
    a, b = p.edges()
    z = complex(z)
    root = np.sqrt(z - a) * np.sqrt(z - b)
    return (z + gam * (1 - lam) - root) / (2 * gam * z)


def mp_inverse_mean(p: FreePoissonParams) -> float:
    """Mean of 1/V for V free-Poisson; finite only when the rate exceeds 1."""
    if p.lam <= 1:
        raise DomainError("inverse mean diverges unless the rate exceeds 1")
    return 1.0 / (p.gamma_scale * (p.lam - 1.0))


def _endpoint_residual(a, b, alpha, beta, gamma):
    d = abs(alpha - 1.0)
    Q = np.sqrt((a + 1.0) * (b + 1.0))
    P = np.sqrt(a * b)
    f1 = gamma + beta / Q - d / P
    f2 = gamma * (a + b) / 2.0 - alpha + 1.0 + beta - beta / Q - 2.0
    return f1, f2


def _endpoint_jacobian(a, b, alpha, beta, gamma):
    d = abs(alpha - 1.0)
    Q = np.sqrt((a + 1.0) * (b + 1.0))
    P32 = (a * b) ** 1.5
    Q3 = Q**3
    j11 = -beta * (b + 1.0) / (2 * Q3) + d * b / (2 * P32)
    j12 = -beta * (a + 1.0) / (2 * Q3) + d * a / (2 * P32)
    j21 = gamma / 2.0 + beta * (b + 1.0) / (2 * Q3)
    j22 = gamma / 2.0 + beta * (a + 1.0) / (2 * Q3)
    return np.array([[j11, j12], [j21, j22]])


def _endpoints_newton(alpha, beta, gamma):
    lam = alpha if alpha > 1 else 1.0 / alpha
    scale = 1.0 / gamma if alpha > 1 else alpha / gamma
    a = scale * (1 - np.sqrt(lam)) ** 2
    b = scale * (1 + np.sqrt(lam)) ** 2
    if a <= 0:
        a = 1e-3 * b
    fa, fb = _endpoint_residual(a, b, alpha, beta, gamma)
    norm = max(abs(fa), abs(fb))
    for _ in range(80):
        if norm <= 1e-13:
            return a, b
        step = np.linalg.solve(
            _endpoint_jacobian(a, b, alpha, beta, gamma), -np.array([fa, fb])
        )
        t = 1.0
        while t > 1e-8:
            na, nb = a + t * step[0], b + t * step[1]
            if 0 < na < nb:
                n1, n2 = _endpoint_residual(na, nb, alpha, beta, gamma)
                nn = max(abs(n1), abs(n2))
                if nn < norm:
                    a, b, fa, fb, norm = na, nb, n1, n2, nn
                    break
            t /= 2.0
        else:
            return None
    return (a, b) if norm <= ENDPOINT_TOL else None


def _endpoints_reduced(alpha, beta, gamma):
    """One-dimensional fallback: eliminate both square roots.

    Writing S = (a+b)/2 and P = sqrt(ab), the second equation pins
    beta/Q and the first pins d/P, leaving the algebraic constraint
    Q^2 = P^2 + 2S + 1 as a single equation in S.
    """
    d = abs(alpha - 1.0)

    def pq(S):
        denom_q = gamma * S - alpha - 1.0 + beta
        denom_p = gamma * S + gamma - alpha - 1.0 + beta
        return denom_p, denom_q

    def g(S):
        denom_p, denom_q = pq(S)
        P = d / denom_p
        Q = beta / denom_q
        return Q * Q - P * P - 2.0 * S - 1.0

    if beta == 0.0:
        S = (alpha + 1.0) / gamma
        P = d / gamma
    else:
        lo = (alpha + 1.0 - beta) / gamma + 1e-9 if beta > 0 else 1e-9
        lo = max(lo, 1e-9)
        span = np.geomspace(lo + 1e-9, lo + 1e6, 400)
        vals = []
        for S in span:
            denom_p, denom_q = pq(S)
            if denom_p <= 0 or (beta > 0) != (denom_q > 0):
                vals.append(np.nan)
                continue
            vals.append(g(S))
        S = None
        for i in range(len(span) - 1):
            v0, v1 = vals[i], vals[i + 1]
            if np.isnan(v0) or np.isnan(v1) or v0 * v1 > 0:
                continue
            S = brentq(g, span[i], span[i + 1], xtol=1e-15)
            break
        if S is None:
            return None
        P = d / pq(S)[0]
    disc = S * S - P * P
    if disc <= 0:
        return None
    r = np.sqrt(disc)
    a, b = S - r, S + r
    fa, fb = _endpoint_residual(a, b, alpha, beta, gamma)
    if max(abs(fa), abs(fb)) > ENDPOINT_TOL:
        return None
    return a, b


def _alpha1_b(beta, gamma):
    """Positive root of gamma*b/2 + beta - beta/sqrt(b+1) = 2."""

    def h(b):
        return gamma * b / 2.0 + beta - beta / np.sqrt(b + 1.0) - 2.0

    hi = 1.0
    while h(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise NumericError("no positive root found for the edge equation")
    return brentq(h, 1e-14, hi, xtol=1e-15)


def alpha1_regime_split(beta, gamma) -> bool:
    """True when the density regime applies (sigma >= 0), false for the shifted law."""
    return beta >= 1.0 - (1.0 + np.sqrt(gamma)) ** 2


def sigma_regime_check(beta, gamma) -> bool:
    if not gamma > 0:
        raise UsageError("gamma must be positive")
    return alpha1_regime_split(beta, gamma)


def kummer_sigma(beta, gamma) -> float:
    """sigma = gamma + beta/sqrt(b+1) with b from the edge equation."""
    b = _alpha1_b(beta, gamma)
    return gamma + beta / np.sqrt(b + 1.0)


@lru_cache(maxsize=256)
def kummer_endpoints(alpha, beta, gamma):
    """Support endpoints of the continuous part.

    alpha != 1 solves the two-equation system (damped Newton off a
    free-Poisson initial guess, with a reduced one-dimensional fallback);
    alpha == 1 uses the closed forms of the shifted free-Poisson regime or
    the one-dimensional edge equation.
    """
    alpha, beta, gamma = float(alpha), float(beta), float(gamma)
    if not alpha > 0 or not gamma > 0:
        raise UsageError("alpha and gamma must be positive")
    if alpha == 1.0:
        if alpha1_regime_split(beta, gamma):
            return 0.0, _alpha1_b(beta, gamma)
        lam = 1.0 - beta
        a = -1.0 + (1.0 - np.sqrt(lam)) ** 2 / gamma
        b = -1.0 + (1.0 + np.sqrt(lam)) ** 2 / gamma
        return a, b
    out = _endpoints_newton(alpha, beta, gamma)
    if out is None:
        out = _endpoints_reduced(alpha, beta, gamma)
    if out is None:
        raise NumericError(
            f"endpoint solve failed for alpha={alpha}, beta={beta}, gamma={gamma}"
        )
    return out


def _kummer_density(alpha, beta, gamma):
    """Density callable of the continuous part, and its support."""
    if alpha == 1.0 and alpha1_regime_split(beta, gamma):
        b = _alpha1_b(beta, gamma)
        sigma = gamma + beta / np.sqrt(b + 1.0)
        if sigma < -1e-12:
            raise DomainError("sigma is negative; no density in this regime")
        rb = np.sqrt(b + 1.0)

        def f(x):
            core = np.sqrt(np.clip(x * (b - x), 0.0, None))
            return core * (sigma / x - beta / ((1.0 + x) * rb)) / (2 * np.pi)

        return f, (0.0, b)
    if alpha == 1.0:
        lam = 1.0 - beta
        a, b = kummer_endpoints(alpha, beta, gamma)

        def f(x):
            core = np.sqrt(np.clip((x - a) * (b - x), 0.0, None))
            return gamma * core / (2 * np.pi * (x + 1.0))

        return f, (a, b)
    a, b = kummer_endpoints(alpha, beta, gamma)
    d = abs(alpha - 1.0)
    P = np.sqrt(a * b)
    Q = np.sqrt((a + 1.0) * (b + 1.0))

    def f(x):
        core = np.sqrt(np.clip((x - a) * (b - x), 0.0, None))
        return core * (d / (x * P) - beta / ((1.0 + x) * Q)) / (2 * np.pi)

    return f, (a, b)


@lru_cache(maxsize=64)
def _kummer_measure_cached(alpha, beta, gamma):
    f, (a, b) = _kummer_density(alpha, beta, gamma)
    atom = max(0.0, 1.0 - alpha)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    probe = mid + half * np.cos((np.arange(512) + 0.5) * np.pi / 512)
    if np.any(f(probe) < -1e-10):
        raise DomainError(
            "density is negative on the support; parameters outside the supported regime"
        )
    # Near alpha = 1 the lower edge collapses like (alpha-1)^2 and the 1/x
    # factor develops structure on that scale; the node count must grow
    # like 1/sqrt(a / half) to keep the quadrature spectrally converged.
    n = 2048
    ratio = a / half if a > 0 else 1.0
    if 0 < ratio < 1e-4:
        n = int(min(2**18, 2 ** np.ceil(np.log2(8.0 / np.sqrt(ratio)))))
        n = max(n, 2048)
    return SpectralMeasure(atom, (a, b), f, n_nodes=n)


def kummer_measure(alpha, beta, gamma) -> SpectralMeasure:
    """Free-Kummer law in any supported regime (atom plus density)."""
    return _kummer_measure_cached(float(alpha), float(beta), float(gamma))


def kummer_cauchy(alpha, beta, gamma, z) -> complex:
    """Closed-form Cauchy transform, all regimes.

    The apparent pole at z = -1 cancels against the root factor; the two
    offending terms are combined analytically so the formula stays finite
    there.  Branch: product of principal square roots, which makes
    z G(z) -> 1 along the negative axis.
    """
    alpha, beta, gamma = float(alpha), float(beta), float(gamma)
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise DomainError("z must avoid the nonnegative half-line")
    if alpha == 1.0 and not alpha1_regime_split(beta, gamma):
        out = mp_cauchy(FreePoissonParams(1.0 - beta, 1.0 / gamma), z + 1.0)
    elif alpha == 1.0:
        b = _alpha1_b(beta, gamma)
        sigma = gamma + beta / np.sqrt(b + 1.0)
        rb = np.sqrt(b + 1.0)
        root = np.sqrt(z) * np.sqrt(z - b)
        pole_pair = -beta * (z - b - 1.0) / (rb * (rb - root))
        out = 0.5 * (gamma + pole_pair - root * sigma / z)
    else:
        a, b = kummer_endpoints(alpha, beta, gamma)
        d = abs(alpha - 1.0)
        P = np.sqrt(a * b)
        Q = np.sqrt((a + 1.0) * (b + 1.0))
        root = np.sqrt(z - a) * np.sqrt(z - b)
        pole_pair = -beta * (z - a - b - 1.0) / (Q * (Q - root))
        out = 0.5 * (gamma - (alpha - 1.0) / z + pole_pair - root * d / (z * P))
    if z.imag > 1e-12 and out.imag > 1e-10:
        raise NumericError(f"branch inconsistency: Im G > 0 at z={z}")
    return out


def kummer_delta(alpha, beta, gamma) -> float:
    """Constant term of the quadratic transform equation.

    Equal to gamma*m1 - alpha + beta + gamma; the relation is pinned by an
    asymptotic-matching test before anything downstream relies on it.
    """
    m1 = kummer_measure(alpha, beta, gamma).moment(1)
    return gamma * m1 - alpha + beta + gamma


def kummer_equation_residual(alpha, beta, gamma, delta, z, G=None) -> complex:
    """Value of the quadratic the Cauchy transform must satisfy."""
    if G is None:
        G = kummer_cauchy(alpha, beta, gamma, z)
    z = complex(z)
    return (
        z * (z + 1) * G * G
        - (gamma * z * (z + 1) - (alpha - 1) * (z + 1) + beta * z) * G
        + gamma * z
        + delta
    )


def kummer_laurent_moments(alpha, beta, gamma, delta, order) -> list:
    """Moments implied by the quadratic equation, via its series recursion.

    Substituting G = u(1 + M(u)) with u = 1/z turns the quadratic into a
    fixed-point relation whose order-k coefficient only involves lower
    orders, so iterating the map `order` times solves it exactly.
    """
    if order < 1:
        raise UsageError("order must be at least 1")
    N = order
    one = Series1([1.0] + [0.0] * N)
    u = Series1.identity(N)
    oneu = one + u
    inv = Series1([(-1.0) ** k / gamma for k in range(N + 1)])  # 1/(gamma*(1+u))
    M = Series1.zero(N)
    for _ in range(N + 1):
        opm = one + M
        rhs = series_mul(oneu, series_mul(opm, opm))
        rhs = rhs + series_scale(series_mul(oneu, opm), alpha - 1.0)
        rhs = rhs + series_scale(opm, -beta)
        rhs = rhs + Series1.constant(delta - gamma, N)
        M = series_mul(series_mul(u, rhs), inv)
    return [float(complex(M.coefficient(k)).real) for k in range(1, order + 1)]


def kummer_cauchy_from_quadratic(alpha, beta, gamma, delta, z) -> complex:
    """Nevanlinna root of the quadratic at a single point."""
    z = complex(z)
    A = z * (z + 1)
    B = -(gamma * z * (z + 1) - (alpha - 1) * (z + 1) + beta * z)
    C = gamma * z + delta
    if abs(A) < 1e-14:
        return -C / B
    disc = np.sqrt(B * B - 4 * A * C)
    r1 = (-B + disc) / (2 * A)
    r2 = (-B - disc) / (2 * A)
    if z.imag > 1e-12:
        cands = [r for r in (r1, r2) if r.imag <= 1e-12]
        if not cands:
            raise DomainError(f"no Nevanlinna branch at z={z}")
        if len(cands) == 1:
            return cands[0]
    return min((r1, r2), key=lambda r: abs(z * r - 1.0))


def kummer_from_quadratic(alpha, beta, gamma, delta,
                          eps_ladder=(4e-5, 2e-5, 1e-5)) -> SpectralMeasure:
    """Reconstruct the law from its quadratic equation alone.

    Requires beta >= 0 or alpha > 1, the hypothesis under which the
    equation determines the distribution; delta must match the computed
    constant.  The transform is branch-selected pointwise and inverted on
    a two-pass grid (coarse support scan, then a dense window).
    """
    alpha, beta, gamma, delta = map(float, (alpha, beta, gamma, delta))
    if not (beta >= 0 or alpha > 1):
        raise DomainError(
            "determination requires beta >= 0 or alpha > 1"
        )
    expected = kummer_delta(alpha, beta, gamma)
    if abs(delta - expected) > 1e-6 * max(1.0, abs(expected)):
        raise UsageError(
            f"delta={delta} is inconsistent with the computed constant {expected}"
        )

    def G(z):
        return kummer_cauchy_from_quadratic(alpha, beta, gamma, delta, z)

    # Deflating the known atom before scanning keeps its Poisson smear out
    # of the support detection and the edge quadrature nodes.
    atom_expected = max(0.0, 1.0 - alpha)

    def Gc(z):
        return G(z) - atom_expected / z if atom_expected else G(z)

    m1, m2 = kummer_laurent_moments(alpha, beta, gamma, delta, 2)
    std = np.sqrt(max(m2 - m1 * m1, 1e-12))
    hi0 = m1 + 8 * std + 2.0
    density = extrapolated_density(Gc, eps_ladder)
    coarse = np.linspace(1e-6, hi0, 600)
    probe = density(coarse)
    on = np.nonzero(probe > 1e-6)[0]
    if len(on) == 0:
        raise NumericError("no continuous part detected on the scan window")
    pad = 2.0 * (coarse[1] - coarse[0])
    lo = max(0.0, coarse[on[0]] - pad)
    hi = min(hi0, coarse[on[-1]] + pad)
    atom0 = atom_at_zero(G)
    if abs(atom0 - atom_expected) > 1e-5:
        raise NumericError(
            f"atom probe {atom0} disagrees with the expected mass {atom_expected}"
        )
    # The density evaluates the extrapolation on demand, so there is no
    # interpolation error between grid nodes; the support window is the
    # numerically detected one and may overshoot the true edges slightly.
    return SpectralMeasure(atom0, (lo, hi), density, mass_tol=1e-4)


@dataclass(frozen=True)
class FreeKummerParams:
    """Kummer parameter triple with its derived quantities."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.alpha > 0 or not self.gamma > 0:
            raise UsageError("alpha and gamma must be positive")

    @cached_property
    def endpoints(self):
        return kummer_endpoints(self.alpha, self.beta, self.gamma)

    @cached_property
    def sigma(self):
        if self.alpha != 1.0 or not alpha1_regime_split(self.beta, self.gamma):
            return None
        return kummer_sigma(self.beta, self.gamma)

    @cached_property
    def delta(self):
        return kummer_delta(self.alpha, self.beta, self.gamma)

    def measure(self) -> SpectralMeasure:
        return kummer_measure(self.alpha, self.beta, self.gamma)


def pushforward_resolvent_shift(mu_X: SpectralMeasure,
                                allow_atom_approx=False) -> SpectralMeasure:
    """Law of 1/(1+X) for X distributed as mu_X.

    An atom of X at zero would put an atom at 1, which the measure model
    cannot hold exactly; such inputs are rejected unless the caller opts
    into a narrow smooth bump of the same mass just below 1.
    """
    lo, hi = mu_X.support
    if hi - lo < 1e-14 and mu_X.atom0 == 0.0:
        y = 1.0 / (1.0 + lo)
        return SpectralMeasure(0.0, (y, y), None)
    if mu_X.atom0 > 0 and not allow_atom_approx:
        raise DomainError(
            "atom at zero maps to an atom at 1; pass allow_atom_approx=True "
            "to accept a narrow-bump approximation"
        )
    fX = mu_X.density
    ylo, yhi = 1.0 / (1.0 + hi), 1.0 / (1.0 + lo)

    if mu_X.atom0 > 0:
        w = mu_X.atom0
        h = 5e-3

        def f(y):
            y = np.asarray(y, dtype=float)
            x = 1.0 / y - 1.0
            base = np.where(
                (y > ylo) & (y < yhi), fX(np.clip(x, lo, hi)) / y**2, 0.0
            )
            t = np.clip((y - (1.0 - h)) / h, 0.0, 1.0)
            bump = (w / h) * 2.0 * np.sin(np.pi * t) ** 2 * (y <= 1.0)
            return base + bump

        return SpectralMeasure(0.0, (ylo, 1.0), f, mass_tol=1e-3)

    def f(y):
        y = np.asarray(y, dtype=float)
        x = 1.0 / y - 1.0
        return fX(np.clip(x, lo, hi)) / y**2

    return SpectralMeasure(0.0, (ylo, yhi), f)
