import numpy as np
import pytest

from freekummer.errors import UsageError
from freekummer.partitions import (
    IntervalPartition,
    MixedWord,
    MomentOracle,
    boolean_cumulant_of_word,
    boolean_cumulants_to_moments,
    enumerate_interval_partitions,
    free_mixed_moment,
    moments_to_boolean_cumulants,
    partition_join,
    r_letter,
    verify_boolmain,
    verify_product_formula,
    y_letter,
)


class TestEnumerate:
    def test_n1(self):
        parts = enumerate_interval_partitions(1)
        assert parts == [IntervalPartition(((1, 1),))]

    def test_n3_explicit(self):
        got = {p.blocks for p in enumerate_interval_partitions(3)}
        want = {
            ((1, 3),),
            ((1, 1), (2, 3)),
            ((1, 2), (3, 3)),
            ((1, 1), (2, 2), (3, 3)),
        }
        assert got == want

    def test_counts(self):
        for n in (1, 2, 3, 4, 5, 6, 7, 8, 10):
            parts = enumerate_interval_partitions(n)
            assert len(parts) == 2 ** (n - 1)
            assert len(set(parts)) == len(parts)

    def test_out_of_range(self):
        with pytest.raises(UsageError):
            enumerate_interval_partitions(0)
        with pytest.raises(UsageError):
            enumerate_interval_partitions(17)


class TestJoin:
    def test_three_letter_example(self):
        p = IntervalPartition(((1, 2), (3, 3)))
        q = IntervalPartition(((1, 1), (2, 3)))
        assert partition_join(p, q) == IntervalPartition(((1, 3),))

    def test_idempotent(self):
        for p in enumerate_interval_partitions(5):
            assert partition_join(p, p) == p

    def test_matches_exhaustive_lattice_search(self):
        # join must be the least upper bound in reversed refinement order
        def leq(a, b):
            # every block of a contained in some block of b
            return all(
                any(bs <= s and e <= be for bs, be in b.blocks) for s, e in a.blocks
            )

        rng = np.random.default_rng(3)
        parts = enumerate_interval_partitions(5)
        for _ in range(25):
            i, k = rng.choice(len(parts), size=2)
            p, q = parts[i], parts[k]
            ubs = [u for u in parts if leq(p, u) and leq(q, u)]
            j = partition_join(p, q)
            assert j in ubs
            assert all(leq(j, u) for u in ubs)

    def test_size_mismatch(self):
        with pytest.raises(UsageError):
            partition_join(
                IntervalPartition(((1, 2),)), IntervalPartition(((1, 3),))
            )


class TestCumulantConversion:
    def test_first_two(self):
        assert moments_to_boolean_cumulants([3.0]) == [3.0]
        b = moments_to_boolean_cumulants([1.5, 4.0])
        assert b[0] == 1.5
        assert abs(b[1] - (4.0 - 1.5**2)) < 1e-15

    def test_roundtrip(self):
        rng = np.random.default_rng(11)
        m = list(rng.uniform(-2, 2, size=8))
        back = boolean_cumulants_to_moments(moments_to_boolean_cumulants(m))
        assert max(abs(a - b) for a, b in zip(m, back)) < 1e-12

    def test_roundtrip_other_direction(self):
        rng = np.random.default_rng(12)
        b = list(rng.uniform(-2, 2, size=10))
        back = moments_to_boolean_cumulants(boolean_cumulants_to_moments(b))
        assert max(abs(a - x) for a, x in zip(b, back)) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            moments_to_boolean_cumulants([])


def simple_oracle(seed=0, **kw):
    return MomentOracle.random(seed, **kw)


class TestFreeMixedMoment:
    def test_phi_xy_factorizes(self):
        o = simple_oracle(5)
        got = free_mixed_moment([r_letter("r"), y_letter()], o)
        assert abs(got - o.phi_r((("r", 1),)) * o.phi_y(1)) < 1e-14

    def test_phi_xyxy(self):
        o = simple_oracle(6)
        got = free_mixed_moment(
            [r_letter("r"), y_letter(), r_letter("r"), y_letter()], o
        )
        x1, x2 = o.phi_r((("r", 1),)), o.phi_r((("r", 2),))
        y1, y2 = o.phi_y(1), o.phi_y(2)
        want = x2 * y1**2 + x1**2 * y2 - x1**2 * y1**2
        assert abs(got - want) < 1e-13

    def test_deterministic_y_reduces_to_plain_moment(self):
        o = MomentOracle([0.3, 0.9], [0.5, 0.5], [1.0], [1.0])
        word = [r_letter("r"), y_letter(), r_letter("r"), y_letter(), r_letter("r")]
        got = free_mixed_moment(word, o)
        assert abs(got - o.phi_r((("r", 3),))) < 1e-14

    def test_traciality_under_rotation(self):
        o = simple_oracle(7)
        word = [
            y_letter(),
            r_letter("r"),
            y_letter(2),
            r_letter((("r", 2),)),
            y_letter(),
            r_letter("r"),
        ]
        base = free_mixed_moment(word, o)
        for k in range(1, len(word)):
            rot = word[k:] + word[:k]
            assert abs(free_mixed_moment(rot, o) - base) < 1e-12

    def test_centered_alternating_word_vanishes(self):
        # expand phi(prod (w_i - phi(w_i))) by inclusion-exclusion; freeness
        # makes it vanish for alternating words
        o = simple_oracle(8)
        word = [y_letter(), r_letter("r"), y_letter(2), r_letter((("r", 2),))]
        means = [o.phi_letter(l) for l in word]
        total = 0.0
        for mask in range(2 ** len(word)):
            sub = [word[i] for i in range(len(word)) if mask >> i & 1]
            coef = 1.0
            for i in range(len(word)):
                if not mask >> i & 1:
                    coef *= -means[i]
            total += coef * (free_mixed_moment(sub, o) if sub else 1.0)
        assert abs(total) < 1e-12

    def test_empty_word_rejected(self):
        with pytest.raises(UsageError):
            MixedWord(())


class TestBooleanCumulantOfWord:
    def test_beta1(self):
        o = simple_oracle(9)
        assert abs(boolean_cumulant_of_word([y_letter()], o) - o.phi_y(1)) < 1e-14

    def test_beta3_with_deterministic_r(self):
        # R = 1 a.s.: beta_3(Y, R, Y) collapses to beta_2(Y, Y), the second
        # coefficient of eta_Y
        o = MomentOracle([1.0], [1.0], [0.4, 1.3, 1.9], [0.3, 0.5, 0.2])
        got = boolean_cumulant_of_word([y_letter(), r_letter("r"), y_letter()], o)
        want = o.phi_y(2) - o.phi_y(1) ** 2
        assert abs(got - want) < 1e-13

    def test_beta2_variance(self):
        # phi(X)=1, phi(X^2)=2 -> beta_2 = 1
        o = MomentOracle([2.0, 0.0], [0.5, 0.5], [1.0], [1.0])
        got = boolean_cumulant_of_word([r_letter("r"), r_letter("r")], o)
        assert abs(got - 1.0) < 1e-14


class TestProductFormula:
    def test_n2_collapses(self):
        assert verify_product_formula([1, 1], simple_oracle(14), 2) < 1e-14

    def test_n4(self):
        assert verify_product_formula([2, 2], simple_oracle(15), 4) < 1e-10

    def test_n6(self):
        assert verify_product_formula([3, 3], simple_oracle(16), 6) < 1e-10

    def test_other_splits(self):
        for split in ([1, 3], [2, 1, 1], [1, 1, 2]):
            assert verify_product_formula(split, simple_oracle(17), 4) < 1e-10

    def test_bad_split(self):
        with pytest.raises(UsageError):
            verify_product_formula([2, 1], simple_oracle(18), 4)


class TestBoolmain:
    def test_variant1_n1(self):
        assert verify_boolmain(1, 1, simple_oracle(20)) < 1e-14

    def test_variant1_n3(self):
        assert verify_boolmain(1, 3, simple_oracle(21)) < 1e-10

    def test_variant3_n3(self):
        assert verify_boolmain(3, 3, simple_oracle(22)) < 1e-10

    def test_variant3_n1(self):
        assert verify_boolmain(3, 1, simple_oracle(23)) < 1e-12

    def test_depth_guard(self):
        with pytest.raises(UsageError):
            verify_boolmain(1, 7, simple_oracle(24))
        with pytest.raises(UsageError):
            verify_boolmain(2, 3, simple_oracle(25))


class TestOracle:
    def test_weights_must_normalize(self):
        with pytest.raises(UsageError):
            MomentOracle([1.0], [0.7], [1.0], [1.0])

    def test_depth_cap(self):
        o = MomentOracle([0.5], [1.0], [1.0], [1.0], max_order=4)
        with pytest.raises(UsageError):
            o.phi_y(5)
        with pytest.raises(UsageError):
            o.phi_r((("r", 5),))

    def test_unknown_function(self):
        o = simple_oracle(26)
        with pytest.raises(UsageError):
            o.phi_r((("nope", 1),))
