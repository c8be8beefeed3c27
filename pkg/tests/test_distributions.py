"""Free-Poisson and free-Kummer constructors, transforms, reconstruction."""

from __future__ import annotations

import numpy as np
import pytest

from freekummer.distributions import (
    FreeKummerParams,
    FreePoissonParams,
    kummer_cauchy,
    kummer_cauchy_from_quadratic,
    kummer_delta,
    kummer_endpoints,
    kummer_equation_residual,
    kummer_from_quadratic,
    kummer_laurent_moments,
    kummer_measure,
    kummer_sigma,
    mp_cauchy,
    mp_inverse_mean,
    mp_measure,
    pushforward_resolvent_shift,
    sigma_regime_check,
    _endpoints_reduced,
)
from freekummer.errors import DomainError, UsageError
from freekummer.transforms import SpectralMeasure, cauchy_transform, s_transform_series


def quad_delta(alpha, beta, gamma, z=-2.7):
    """Constant of the quadratic solved from a quadrature Cauchy transform.

    Independent of the closed-form transform and of the moment relation
    inside kummer_delta: plug G into the quadratic and solve for the
    constant term directly.
    """
    G = cauchy_transform(kummer_measure(alpha, beta, gamma), z)
    val = z * (z + 1) * G * G - (gamma * z * (z + 1) - (alpha - 1) * (z + 1) + beta * z) * G + gamma * z
    return -val.real


class TestFreePoisson:
    def test_standard_support_and_mean(self):
        mu = mp_measure(FreePoissonParams(1.0, 1.0))
        assert mu.support == (0.0, 4.0)
        assert mu.atom0 == 0.0
        assert abs(mu.moment(1) - 1.0) < 1e-10

    def test_atom_weight(self):
        mu = mp_measure(FreePoissonParams(0.5, 1.0))
        assert mu.atom0 == 0.5

    def test_s_transform_series(self):
        # S(z) = 1/(gamma z + lam gamma), expanded as a geometric series
        lam, gam = 2.0, 1.5
        S = s_transform_series(mp_measure(FreePoissonParams(lam, gam)), 6)
        for k in range(7):
            expect = (-1.0) ** k / (gam * lam ** (k + 1))
            assert abs(S.coefficient(k) - expect) < 1e-9

    def test_closed_cauchy_matches_quadrature(self):
        p = FreePoissonParams(2.0, 1.5)
        mu = mp_measure(p)
        for z in (-0.3, -2.0, complex(1.0, 0.7)):
            assert abs(mp_cauchy(p, z) - cauchy_transform(mu, z)) < 1e-10

    def test_inverse_mean(self):
        p = FreePoissonParams(2.0, 1.5)
        mu = mp_measure(p)
        direct = float(mu.weights @ (1.0 / mu.nodes))
        assert abs(mp_inverse_mean(p) - direct) < 1e-10
        with pytest.raises(DomainError):
            mp_inverse_mean(FreePoissonParams(1.0, 1.0))

    def test_parameter_validation(self):
        with pytest.raises(UsageError):
            FreePoissonParams(0.0, 1.0)
        with pytest.raises(UsageError):
            FreePoissonParams(1.0, -2.0)


class TestKummerEndpoints:
    def test_shifted_regime_closed_form(self):
        a, b = kummer_endpoints(1.0, -5.0, 1.0)
        assert abs(a - ((1 - np.sqrt(6)) ** 2 - 1)) < 1e-12
        assert abs(b - ((1 + np.sqrt(6)) ** 2 - 1)) < 1e-12

    def test_beta_zero_collapse(self):
        # the edge equation reduces to gamma*b/2 = 2
        assert abs(kummer_endpoints(1.0, 0.0, 2.0)[1] - 2.0) < 1e-12
        assert abs(kummer_endpoints(1.0, 0.0, 0.5)[1] - 8.0) < 1e-12

    def test_system_residual(self):
        for alpha, beta, gamma in [(2, 1, 1), (1.5, -1, 2), (0.5, -1, 1), (3, 2, 0.5)]:
            a, b = kummer_endpoints(alpha, beta, gamma)
            assert 0 < a < b
            d = abs(alpha - 1)
            Q = np.sqrt((a + 1) * (b + 1))
            r1 = gamma + beta / Q - d / np.sqrt(a * b)
            r2 = gamma * (a + b) / 2 - alpha + 1 + beta - beta / Q - 2
            assert max(abs(r1), abs(r2)) <= 1e-10

    def test_fallback_route_agrees(self):
        for alpha, beta, gamma in [(2, 1, 1), (1.5, -1, 2), (3, 2, 0.5)]:
            nt = kummer_endpoints(alpha, beta, gamma)
            rd = _endpoints_reduced(alpha, beta, gamma)
            assert max(abs(nt[0] - rd[0]), abs(nt[1] - rd[1])) < 1e-9

    def test_beta_zero_is_free_poisson(self):
        # with no tilt the law coincides with a free-Poisson of rate alpha
        a, b = kummer_endpoints(2.0, 0.0, 3.0)
        lam, scale = 2.0, 1.0 / 3.0
        assert abs(a - scale * (1 - np.sqrt(lam)) ** 2) < 1e-10
        assert abs(b - scale * (1 + np.sqrt(lam)) ** 2) < 1e-10

    def test_validation(self):
        with pytest.raises(UsageError):
            kummer_endpoints(-1.0, 0.0, 1.0)
        with pytest.raises(UsageError):
            kummer_endpoints(2.0, 0.0, 0.0)


class TestKummerMeasure:
    def test_mass(self):
        for p in [(2, 1, 1), (0.5, 1, 1), (1, -5, 1), (1, 1, 1), (1.001, 1, 1)]:
            assert abs(kummer_measure(*p).mass() - 1.0) < 1e-8

    def test_small_alpha_scaling(self):
        mu = kummer_measure(0.5, 1.0, 1.0)
        ref = kummer_measure(2.0, 2.0, 2.0)
        assert mu.atom0 == 0.5
        assert abs(mu.support[0] - ref.support[0]) < 1e-10
        xs = np.linspace(mu.support[0] + 0.01, mu.support[1] - 0.01, 50)
        assert np.abs(mu.density(xs) - 0.5 * ref.density(xs)).max() < 1e-12

    def test_shifted_free_poisson_regime(self):
        mu = kummer_measure(1.0, -5.0, 1.0)
        shifted = mp_measure(FreePoissonParams(6.0, 1.0))
        xs = np.linspace(mu.support[0] + 0.01, mu.support[1] - 0.01, 200)
        assert np.abs(mu.density(xs) - shifted.density(xs + 1.0)).max() <= 1e-10

    def test_no_tilt_is_free_poisson(self):
        mu = kummer_measure(2.0, 0.0, 3.0)
        ref = mp_measure(FreePoissonParams(2.0, 1.0 / 3.0))
        xs = np.linspace(mu.support[0] + 1e-3, mu.support[1] - 1e-3, 200)
        assert np.abs(mu.density(xs) - ref.density(xs)).max() < 1e-12

    def test_alpha_one_continuity(self):
        base = kummer_measure(1.0, 1.0, 1.0)
        up = kummer_measure(1.001, 1.0, 1.0)
        dn = kummer_measure(0.999, 1.0, 1.0)
        lo = max(m.support[0] for m in (base, up, dn))
        hi = min(m.support[1] for m in (base, up, dn))
        xs = np.linspace(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo), 200)
        assert np.abs(up.density(xs) - base.density(xs)).max() <= 1e-2
        assert np.abs(dn.density(xs) - base.density(xs)).max() <= 1e-2


class TestSigmaRegime:
    def test_boundary_sigma_vanishes(self):
        for gamma in (0.7, 1.0, 1.3):
            beta = 1.0 - (1.0 + np.sqrt(gamma)) ** 2
            assert sigma_regime_check(beta, gamma)
            assert abs(kummer_sigma(beta, gamma)) <= 1e-10

    def test_positive_beta(self):
        assert sigma_regime_check(0.0, 1.0)
        assert kummer_sigma(0.0, 1.0) > 0
        assert kummer_sigma(1.0, 2.0) > 0

    def test_below_boundary(self):
        gamma = 1.3
        beta = 1.0 - (1.0 + np.sqrt(gamma)) ** 2 - 0.5
        assert not sigma_regime_check(beta, gamma)
        assert kummer_sigma(beta, gamma) < 0

    def test_boundary_measure_still_valid(self):
        gamma = 1.0
        beta = 1.0 - (1.0 + np.sqrt(gamma)) ** 2
        mu = kummer_measure(1.0, beta, gamma)
        assert abs(mu.mass() - 1.0) < 1e-8


class TestKummerCauchy:
    def test_quadrature_agreement(self):
        for alpha, beta, gamma in [(2, 1, 1), (0.5, 1, 1), (1, 1, 1), (1, -5, 1)]:
            mu = kummer_measure(alpha, beta, gamma)
            for z in np.linspace(-10, -0.1, 50):
                err = abs(kummer_cauchy(alpha, beta, gamma, z) - cauchy_transform(mu, z))
                assert err <= 1e-8

    def test_tail_normalization(self):
        z = -1e8
        assert abs(z * kummer_cauchy(2.0, 1.0, 1.0, z) - 1.0) < 1e-6

    def test_finite_at_minus_one(self):
        g0 = kummer_cauchy(1.0, 1.0, 1.0, -1.0)
        gl = kummer_cauchy(1.0, 1.0, 1.0, -1.0 - 1e-7)
        gr = kummer_cauchy(1.0, 1.0, 1.0, -1.0 + 1e-7)
        assert np.isfinite(g0.real)
        assert abs(0.5 * (gl + gr) - g0) < 1e-10
        g0 = kummer_cauchy(2.0, 1.0, 1.0, -1.0)
        gl = kummer_cauchy(2.0, 1.0, 1.0, -1.0 - 1e-7)
        gr = kummer_cauchy(2.0, 1.0, 1.0, -1.0 + 1e-7)
        assert abs(0.5 * (gl + gr) - g0) < 1e-10

    def test_small_alpha_split(self):
        # G splits into an atom part plus the rescaled transform
        z = complex(-0.7, 0.4)
        lhs = kummer_cauchy(0.5, 1.0, 1.0, z)
        rhs = 0.5 / z + 0.5 * kummer_cauchy(2.0, 2.0, 2.0, z)
        assert abs(lhs - rhs) < 1e-13

    def test_herglotz(self):
        for x in np.linspace(-3, 8, 12):
            for y in (0.05, 0.5, 3.0):
                assert kummer_cauchy(2.0, 1.0, 1.0, complex(x, y)).imag <= 0

    def test_nonnegative_real_axis_rejected(self):
        with pytest.raises(DomainError):
            kummer_cauchy(2.0, 1.0, 1.0, 0.5)


class TestKummerDelta:
    def test_matches_substitution_oracle_before_use(self):
        # the closed relation is pinned against a quadrature-only route
        for p in [(2, 1, 1), (1.5, -0.5, 1), (3, 2, 0.5), (1, 1, 1), (0.5, 1, 1), (1, -5, 1)]:
            assert abs(kummer_delta(*p) - quad_delta(*p)) <= 1e-10

    def test_overdetermined_residual(self):
        for alpha, beta, gamma in [(2, 1, 1), (1, 1, 1), (0.5, 1, 1)]:
            delta = kummer_delta(alpha, beta, gamma)
            for z in np.linspace(-9, -0.05, 25):
                assert abs(kummer_equation_residual(alpha, beta, gamma, delta, z)) <= 1e-9

    def test_scaling_coherence(self):
        # the same constant through the small-alpha scaling relation
        alpha, beta, gamma = 0.5, 1.0, 1.0
        m1_big = kummer_measure(1 / alpha, beta / alpha, gamma / alpha).moment(1)
        expected = gamma * (alpha * m1_big) - alpha + beta + gamma
        assert abs(kummer_delta(alpha, beta, gamma) - expected) < 1e-10

    def test_inverse_moment_relation(self):
        # the constant equals (alpha - 1) times the inverse moment
        for alpha, beta, gamma in [(2, 1, 1), (3, -1, 0.5)]:
            mu = kummer_measure(alpha, beta, gamma)
            inv = float(mu.weights @ (1.0 / mu.nodes))
            assert abs(kummer_delta(alpha, beta, gamma) - (alpha - 1) * inv) < 1e-9


class TestLaurentMoments:
    def test_match_quadrature(self):
        for alpha, beta, gamma in [(2, 1, 1), (0.5, 1, 1), (1, -5, 1), (1.5, -1, 2)]:
            mu = kummer_measure(alpha, beta, gamma)
            delta = kummer_delta(alpha, beta, gamma)
            lm = kummer_laurent_moments(alpha, beta, gamma, delta, 6)
            for k in range(1, 7):
                ref = mu.moment(k)
                assert abs(lm[k - 1] - ref) <= 1e-8 * max(1.0, abs(ref))

    def test_order_validation(self):
        with pytest.raises(UsageError):
            kummer_laurent_moments(2, 1, 1, 1.0, 0)


class TestFromQuadratic:
    def test_reconstruction_alpha_two(self):
        mu = kummer_measure(2.0, 1.0, 1.0)
        rec = kummer_from_quadratic(2.0, 1.0, 1.0, kummer_delta(2.0, 1.0, 1.0))
        a, b = mu.support
        xs = np.linspace(a + 1e-3 * (b - a), b - 1e-3 * (b - a), 300)
        assert np.abs(rec.density(xs) - mu.density(xs)).max() <= 1e-6
        assert rec.atom0 <= 1e-8

    def test_reconstruction_with_atom(self):
        mu = kummer_measure(0.5, 1.0, 1.0)
        rec = kummer_from_quadratic(0.5, 1.0, 1.0, kummer_delta(0.5, 1.0, 1.0))
        assert abs(rec.atom0 - 0.5) <= 1e-6
        a, b = mu.support
        xs = np.linspace(a + 1e-3 * (b - a), b - 1e-3 * (b - a), 200)
        assert np.abs(rec.density(xs) - mu.density(xs)).max() <= 1e-6

    def test_branch_matches_closed_form(self):
        delta = kummer_delta(2.0, 1.0, 1.0)
        pts = list(np.linspace(-9, -0.1, 20)) + [complex(0.5, 0.3), complex(-1, 2)]
        for z in pts:
            got = kummer_cauchy_from_quadratic(2.0, 1.0, 1.0, delta, z)
            assert abs(got - kummer_cauchy(2.0, 1.0, 1.0, z)) <= 1e-10

    def test_linear_fallback_at_minus_one(self):
        delta = kummer_delta(2.0, 1.0, 1.0)
        got = kummer_cauchy_from_quadratic(2.0, 1.0, 1.0, delta, -1.0)
        assert abs(got - kummer_cauchy(2.0, 1.0, 1.0, -1.0)) <= 1e-10

    def test_mismatched_delta_rejected(self):
        delta = kummer_delta(2.0, 1.0, 1.0)
        with pytest.raises(UsageError):
            kummer_from_quadratic(2.0, 1.0, 1.0, delta + 0.1)

    def test_hypothesis_violation_rejected(self):
        with pytest.raises(DomainError):
            kummer_from_quadratic(0.7, -0.5, 1.0, 0.3)


class TestPushforward:
    def test_point_mass(self):
        pm = SpectralMeasure(0.0, (1.0, 1.0), None)
        out = pushforward_resolvent_shift(pm)
        assert out.support == (0.5, 0.5)
        assert abs(out.moment(1) - 0.5) < 1e-14

    def test_moments_match_direct(self):
        mu = kummer_measure(2.0, 1.0, 1.0)
        out = pushforward_resolvent_shift(mu)
        assert abs(out.mass() - 1.0) < 1e-8
        for k in range(1, 9):
            direct = float(mu.weights @ (1.0 + mu.nodes) ** (-k))
            assert abs(out.moment(k) - direct) <= 1e-10

    def test_atom_rejected_by_default(self):
        mu = mp_measure(FreePoissonParams(0.5, 1.0))
        with pytest.raises(DomainError):
            pushforward_resolvent_shift(mu)

    def test_atom_bump_approximation(self):
        mu = mp_measure(FreePoissonParams(0.5, 1.0))
        out = pushforward_resolvent_shift(mu, allow_atom_approx=True)
        assert abs(out.mass() - 1.0) <= 1e-3


class TestParams:
    def test_derived_fields(self):
        p = FreeKummerParams(2.0, 1.0, 1.0)
        assert p.endpoints == kummer_endpoints(2.0, 1.0, 1.0)
        assert p.sigma is None
        assert abs(p.delta - kummer_delta(2.0, 1.0, 1.0)) < 1e-14
        assert abs(p.measure().mass() - 1.0) < 1e-8

    def test_sigma_only_for_alpha_one(self):
        p = FreeKummerParams(1.0, 1.0, 1.0)
        assert p.sigma is not None and p.sigma > 0

    def test_validation(self):
        with pytest.raises(UsageError):
            FreeKummerParams(0.0, 1.0, 1.0)
