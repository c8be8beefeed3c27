"""Subordination pair construction, pointwise inversion, eta functions."""

from __future__ import annotations

import numpy as np
import pytest

from freekummer.distributions import (
    FreePoissonParams,
    kummer_cauchy,
    kummer_measure,
    mp_measure,
    pushforward_resolvent_shift,
)
from freekummer.errors import DomainError, NumericError, UsageError
from freekummer.partitions import (
    MixedWord,
    MomentOracle,
    boolean_cumulant_of_word,
    moments_to_boolean_cumulants,
    r_letter,
    y_letter,
)
from freekummer.subordination import (
    _m_point,
    eta_exchange_residual,
    eta_h_series,
    omega2_pointwise,
    product_m_pointwise,
    subordination_series,
    verify_conditional_subordination,
    verify_useful_identity,
)
from freekummer.transforms import moment_transform

DELTA_ONE = (np.array([1.0]), np.array([1.0]))


def hv_style_pair():
    """R from the resolvent shift of a Kummer law, Y free Poisson."""
    alpha, beta, gamma = 2.0, 0.5, 1.0
    mu_r = pushforward_resolvent_shift(kummer_measure(alpha, alpha + beta, gamma))
    mu_y = mp_measure(FreePoissonParams(alpha + beta, 1.0 / gamma))

    def m_u(z):
        return (kummer_cauchy(alpha + beta, alpha, gamma, 1.0 / z) / z - 1.0).real

    return mu_r, mu_y, m_u


class TestSubordinationSeries:
    def test_coefficients_are_alternating_cumulants(self):
        o = MomentOracle.random(3)
        pair = subordination_series(o, o, 5)
        for n in range(1, 6):
            w1 = tuple(
                r_letter() if i % 2 == 0 else y_letter() for i in range(2 * n - 1)
            )
            w2 = tuple(
                y_letter() if i % 2 == 0 else r_letter() for i in range(2 * n - 1)
            )
            b1 = boolean_cumulant_of_word(MixedWord(w1), o)
            b2 = boolean_cumulant_of_word(MixedWord(w2), o)
            assert abs(complex(pair.omega1.coefficient(n)).real - b1) <= 1e-10 * max(1, abs(b1))
            assert abs(complex(pair.omega2.coefficient(n)).real - b2) <= 1e-10 * max(1, abs(b2))

    def test_first_coefficients_are_means(self):
        o = MomentOracle.random(17)
        pair = subordination_series(o, o, 3)
        assert abs(complex(pair.omega1.coefficient(1)).real - o.phi_r((("r", 1),))) < 1e-12
        assert abs(complex(pair.omega2.coefficient(1)).real - o.phi_y(1)) < 1e-12

    def test_composition_recovers_product(self):
        o = MomentOracle.random(29)
        pair = subordination_series(o, o, 7)
        from freekummer.series import series_compose, Series1

        m_y = Series1([0.0] + [o.phi_y(k) for k in range(1, 8)])
        m_r = Series1([0.0] + [o.phi_r((("r", k),)) for k in range(1, 8)])
        for marginal, om in ((m_y, pair.omega1), (m_r, pair.omega2)):
            back = series_compose(marginal, om)
            for n in range(1, 8):
                ref = complex(pair.m_product.coefficient(n)).real
                assert abs(complex(back.coefficient(n)).real - ref) <= 1e-9 * max(1, abs(ref))

    def test_unit_r_factor(self):
        o = MomentOracle.random(7)
        pair = subordination_series(DELTA_ONE, o, 6)
        for n in range(1, 7):
            expect = 1.0 if n == 1 else 0.0
            assert abs(complex(pair.omega1.coefficient(n)).real - expect) < 1e-12
        eta_y = moments_to_boolean_cumulants([o.phi_y(k) for k in range(1, 7)])
        for n in range(1, 7):
            assert abs(complex(pair.omega2.coefficient(n)).real - eta_y[n - 1]) < 1e-12

    def test_zero_first_moment_rejected(self):
        zero_mass = (np.array([0.0]), np.array([1.0]))
        with pytest.raises(DomainError):
            subordination_series(zero_mass, DELTA_ONE, 4)

    def test_order_validated(self):
        with pytest.raises(UsageError):
            subordination_series(DELTA_ONE, DELTA_ONE, 0)


class TestPointwise:
    def test_product_transform_round_trip(self):
        o = MomentOracle.random(41)
        pair = subordination_series(o, o, 4)
        for z in (-0.3, -1.0, -4.0):
            m = pair.m_product_at(z)
            assert -1.0 < m < 0.0
            got1 = _m_point(o.y_nodes, o.y_weights, pair.omega1_at(z))
            got2 = _m_point(o.r_nodes, o.r_weights, pair.omega2_at(z))
            assert abs(got1 - m) <= 1e-12
            assert abs(got2 - m) <= 1e-12

    def test_series_agreement_near_origin(self):
        o = MomentOracle.random(43)
        pair = subordination_series(o, o, 8)
        z = -0.05
        assert abs(complex(pair.omega2(z)).real - pair.omega2_at(z)) <= 1e-8
        assert abs(complex(pair.omega1(z)).real - pair.omega1_at(z)) <= 1e-8

    def test_unit_factor_pointwise(self):
        # with R a unit mass the product law is Y itself
        o = MomentOracle.random(13)
        mu_y = (o.y_nodes, o.y_weights)
        for z in (-0.5, -2.0):
            got = product_m_pointwise(*DELTA_ONE, *mu_y, z)
            assert abs(got - _m_point(o.y_nodes, o.y_weights, z)) <= 1e-12

    def test_hv_style_value_at_minus_one(self):
        mu_r, _, m_u = hv_style_pair()
        w = omega2_pointwise(mu_r, m_u, -1.0)
        assert np.isfinite(w) and w < 0
        assert abs(moment_transform(mu_r, w).real - m_u(-1.0)) <= 1e-12

    def test_closed_form_product_transform(self):
        # independent check of the pointwise engine against a known law
        mu_r, mu_y, m_u = hv_style_pair()
        pair = subordination_series(mu_r, mu_y, 4)
        for z in (-0.5, -2.0, -7.0):
            assert abs(pair.m_product_at(z) - m_u(z)) <= 1e-8

    def test_positive_z_rejected(self):
        mu_r, _, m_u = hv_style_pair()
        with pytest.raises(DomainError):
            omega2_pointwise(mu_r, m_u, 0.5)


class TestUsefulIdentity:
    def test_random_pairs(self):
        for seed in (1, 2, 3):
            o = MomentOracle.random(seed)
            pair = subordination_series(o, o, 6)
            assert verify_useful_identity(pair, 6, grid=(-0.5, -2.0)) <= 1e-9

    def test_order_two_coefficient(self):
        o = MomentOracle.random(4, n_atoms=2)
        pair = subordination_series(o, o, 2)
        lhs = complex(pair.omega1.coefficient(1) * pair.omega2.coefficient(1)).real
        rhs = complex(pair.m_product.coefficient(1)).real
        assert abs(lhs - rhs) <= 1e-12

    def test_unit_factor_exact(self):
        o = MomentOracle.random(9)
        pair = subordination_series(DELTA_ONE, o, 6)
        assert verify_useful_identity(pair, 6) <= 1e-12


class TestEtaH:
    def test_dual_construction(self):
        o = MomentOracle.random(21, support=(0.05, 0.9))
        for h in ((), "r", (("r", 2),), (("x", -1),)):
            e = eta_h_series(o, h, 6)
            assert e.eta1.order == 6
            assert e.eta2.order == 6

    def test_unit_weight(self):
        o = MomentOracle.random(23, support=(0.05, 0.9))
        e = eta_h_series(o, (), 5)
        assert complex(e.eta1.coefficient(0)).real == pytest.approx(1.0)
        for k in range(1, 6):
            assert abs(complex(e.eta1.coefficient(k))) <= 1e-12

    def test_r_weight_is_shifted_eta(self):
        o = MomentOracle.random(25)
        e = eta_h_series(o, "r", 6)
        m = [o.phi_r((("r", k),)) for k in range(1, 8)]
        b = moments_to_boolean_cumulants(m)
        for k in range(7):
            assert abs(complex(e.eta1.coefficient(k)).real - b[k]) <= 1e-12

    def test_symmetry_and_restriction(self):
        o = MomentOracle.random(27, support=(0.05, 0.9))
        e = eta_h_series(o, (("r", 2),), 5)
        for l in range(6):
            for k in range(6 - l):
                assert complex(e.eta2.coefficient(l, k)) == pytest.approx(
                    complex(e.eta2.coefficient(k, l)), abs=1e-12
                )
        for k in range(6):
            assert complex(e.eta2.coefficient(k, 0)) == pytest.approx(
                complex(e.eta1.coefficient(k)), abs=1e-12
            )

    def test_exchange_identity(self):
        for seed in (31, 32):
            o = MomentOracle.random(seed, support=(0.05, 0.9))
            for h in ((), "r", (("r", 2),), (("x", -1),)):
                assert eta_exchange_residual(o, h, 6) <= 1e-12


class TestConditionalSubordination:
    def test_unit_weight_reduces_to_subordination(self):
        o = MomentOracle.random(51)
        assert verify_conditional_subordination(o, o, (), 6) <= 1e-10

    def test_r_weight(self):
        o = MomentOracle.random(53)
        assert verify_conditional_subordination(o, o, "r", 6) <= 1e-10

    def test_unit_r_factor(self):
        o = MomentOracle.random(55)
        assert verify_conditional_subordination(DELTA_ONE, o, "r", 5) <= 1e-12
