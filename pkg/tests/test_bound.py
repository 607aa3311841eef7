import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphpac.bound import (
    BoundInputs,
    binary_kl,
    default_quantization,
    evaluate_bound,
    finite_alphabet_bound,
    inv_kl_upper,
    parse_report,
    quantized_bound,
)

# frozen from a 40-digit mpmath evaluation of the two-term formula
KL_HALF_QUARTER = 0.14384103622589046


class TestBinaryKL:
    @pytest.mark.parametrize("p", [0.0, 1e-9, 0.3, 0.5, 0.999, 1.0])
    def test_identical(self, p):
        q = min(max(p, 1e-12), 1 - 1e-12) if p in (0.0, 1.0) else p
        assert binary_kl(q, q) == 0.0

    def test_degenerate_p(self):
        assert binary_kl(0.0, 0.5) == pytest.approx(math.log(2), abs=1e-15)
        assert binary_kl(0.0, 0.3) == pytest.approx(-math.log(0.7), abs=1e-15)
        assert binary_kl(1.0, 0.3) == pytest.approx(-math.log(0.3), abs=1e-15)

    def test_value(self):
        assert binary_kl(0.5, 0.25) == pytest.approx(KL_HALF_QUARTER, abs=1e-15)

    def test_boundary_q(self):
        assert binary_kl(0.2, 0.0) == math.inf
        assert binary_kl(0.2, 1.0) == math.inf
        assert binary_kl(0.0, 0.0) == 0.0
        assert binary_kl(1.0, 1.0) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            binary_kl(1.1, 0.5)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6), st.floats(0, 1))
    def test_nonnegative_and_convex(self, p, a, b, t):
        assert binary_kl(p, a) >= 0
        mid = t * a + (1 - t) * b
        assert binary_kl(p, mid) <= t * binary_kl(p, a) + (1 - t) * binary_kl(p, b) + 1e-9


class TestInverseKL:
    @pytest.mark.parametrize("p", [0.0, 0.1, 0.7, 1.0])
    def test_zero_budget(self, p):
        assert inv_kl_upper(p, 0.0) == p

    @pytest.mark.parametrize("eps", [1e-4, 0.01, 0.3, 2.0, 10.0])
    def test_closed_form_at_zero(self, eps):
        assert inv_kl_upper(0.0, eps) == pytest.approx(-math.expm1(-eps), abs=1e-12)

    def test_saturates_at_one(self):
        assert inv_kl_upper(0.9, 100.0) == 1.0

    def test_random_pairs_hit_budget(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p, eps = rng.random(), 10 ** rng.uniform(-6, 0.5)
            z = inv_kl_upper(p, eps)
            assert p <= z <= 1
            if z < 1:
                kl = binary_kl(p, z)
                assert kl <= eps
                # near z = 1 adjacent doubles can straddle the root by more than 1e-9
                assert kl >= eps - 1e-9 or binary_kl(p, math.nextafter(z, 2.0)) > eps

    def test_nothing_feasible_above(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p, eps = rng.random(), rng.uniform(0, 0.5)
            z = inv_kl_upper(p, eps)
            grid = np.arange(z + 1e-6, 1.0, 1e-4)
            assert all(binary_kl(p, float(x)) > eps for x in grid)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 3), st.floats(0, 3))
    def test_monotone(self, p1, p2, e1, e2):
        (p1, p2), (e1, e2) = sorted((p1, p2)), sorted((e1, e2))
        assert inv_kl_upper(p1, e1) <= inv_kl_upper(p2, e1)
        assert inv_kl_upper(p1, e1) <= inv_kl_upper(p1, e2)


def _inputs(**kw):
    base = dict(empirical_loss=0.1, mutual_info=0.0, num_nodes=20, num_clusters=1,
                sample_size=500, delta=0.05, alphabet_size=2)
    base.update(kw)
    return BoundInputs(**base)


class TestFiniteAlphabet:
    def test_plug_in(self):
        # frozen from an independent mpmath evaluation
        rep = finite_alphabet_bound(_inputs())
        assert rep.complexity == pytest.approx(0.020970125914877937, abs=1e-15)
        assert rep.expected_loss_bound == pytest.approx(0.17231425555870974, abs=1e-11)
        expected = (math.log(20) + math.log(2) + 0.5 * math.log(2000) - math.log(0.05)) / 500
        assert rep.complexity == pytest.approx(expected, abs=1e-15)

    def test_vanishing_complexity(self):
        prev = 1.0
        for n in (10**3, 10**4, 10**5, 10**6, 10**8):
            b = finite_alphabet_bound(_inputs(sample_size=n)).expected_loss_bound
            assert 0.1 <= b < prev
            prev = b
        assert prev == pytest.approx(0.1, abs=1e-3)

    def test_monotone_in_information(self):
        lo = finite_alphabet_bound(_inputs(num_clusters=3, mutual_info=0.2)).expected_loss_bound
        hi = finite_alphabet_bound(_inputs(num_clusters=3, mutual_info=0.9)).expected_loss_bound
        assert hi > lo

    def test_needs_alphabet(self):
        with pytest.raises(ValueError):
            finite_alphabet_bound(_inputs(alphabet_size=None))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            _inputs(mutual_info=1.0)  # exceeds ln 1
        with pytest.raises(ValueError):
            _inputs(delta=1.0)
        with pytest.raises(ValueError):
            _inputs(empirical_loss=1.2)


# (L, I, |X|, |C|, N, delta) -> frozen (Delta, eps, kl argument, inverse, bound), from mpmath
QUANTIZED_CASES = [
    ((0.02, 1.3, 1740, 4, 1_000_000, 0.05),
     (8e-05, 0.0024533789390745767, 0.0200800016, 0.031520290594850562, 0.031600292194850562)),
    ((0.1, 0.5, 100, 3, 20_000, 0.05),
     (0.00225, 0.006366377967661927, 0.102251265625, 0.13977407423125585, 0.14202533985625585)),
    ((0.3, 0.0, 50, 2, 5000, 0.01),
     (0.004, 0.007893360728912287, 0.304004, 0.3636425970197409, 0.3676465970197409)),
]


class TestQuantized:
    @pytest.mark.parametrize("args,expected", QUANTIZED_CASES)
    def test_hand_arithmetic(self, args, expected):
        loss, mi, n_x, k, n, delta = args
        d = default_quantization(k, n)
        assert d == pytest.approx(expected[0], rel=1e-15)
        rep = quantized_bound(BoundInputs(loss, mi, n_x, k, n, delta, quantization=d))
        assert rep.complexity == pytest.approx(expected[1], abs=1e-15)
        assert rep.correction == pytest.approx(d + d * d / 4, rel=1e-15)
        assert rep.expected_loss_bound == pytest.approx(expected[4], abs=1e-10)

    def test_default_step_rule(self):
        assert default_quantization(4, 1_000_000) == pytest.approx(8e-5, rel=1e-15)
        assert default_quantization(15, 100) == 0.5
        assert default_quantization(1, 10**12) == 1e-9

    def test_matches_finite_alphabet_up_to_correction(self):
        # with |W| = 1/Delta the complexities coincide term by term
        d = 1 / 64
        q = quantized_bound(_inputs(num_clusters=3, mutual_info=0.4, alphabet_size=None, quantization=d))
        t = finite_alphabet_bound(_inputs(num_clusters=3, mutual_info=0.4, alphabet_size=64))
        assert q.complexity == pytest.approx(t.complexity, abs=1e-15)
        corr = d + d * d / 4
        assert q.expected_loss_bound == pytest.approx(
            inv_kl_upper(0.1 + corr, t.complexity) + corr, abs=1e-15)
        assert q.expected_loss_bound > t.expected_loss_bound

    def test_two_step_sizes(self):
        # smaller Delta: smaller correction, larger -|C|^2 ln Delta term
        small = quantized_bound(_inputs(num_clusters=2, alphabet_size=None, quantization=0.001))
        large = quantized_bound(_inputs(num_clusters=2, alphabet_size=None, quantization=0.01))
        assert small.correction < large.correction
        assert small.complexity > large.complexity
        for rep, d in ((small, 0.001), (large, 0.01)):
            eps = (20 * 0.0 + 2 * math.log(20) - 4 * math.log(d) + 0.5 * math.log(4 * 500 / 0.05 ** 2)) / 500
            assert rep.complexity == pytest.approx(eps, abs=1e-15)
            assert rep.expected_loss_bound == pytest.approx(inv_kl_upper(0.1 + d + d * d / 4, eps) + d + d * d / 4,
                                                            abs=1e-15)

    def test_capped_at_one(self):
        rep = quantized_bound(_inputs(empirical_loss=0.95, num_clusters=3, mutual_info=1.0,
                                      alphabet_size=None, quantization=0.2, sample_size=20))
        assert rep.expected_loss_bound == 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 6), st.integers(10, 10**6),
           st.floats(1e-4, 0.5), st.booleans())
    def test_bound_at_least_empirical(self, loss, frac, k, n, delta, quantized):
        mi = frac * math.log(k)
        kw = dict(quantization=default_quantization(k, n)) if quantized else dict(alphabet_size=16)
        rep = evaluate_bound(BoundInputs(loss, mi, 30, k, n, delta, **kw))
        assert rep.expected_loss_bound >= loss

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 0.5), st.integers(1, 5), st.booleans())
    def test_monotone_in_inputs(self, loss, k, quantized):
        kw = dict(quantization=0.01) if quantized else dict(alphabet_size=8)

        def b(**over):
            args = dict(empirical_loss=loss, mutual_info=0.3 * math.log(k), num_nodes=40,
                        num_clusters=k, sample_size=3000, delta=0.05, **kw)
            args.update(over)
            return evaluate_bound(BoundInputs(**args)).expected_loss_bound

        base = b()
        assert b(mutual_info=0.6 * math.log(k)) >= base
        assert b(num_clusters=k + 1, mutual_info=0.3 * math.log(k)) >= base
        assert b(sample_size=6000) <= base
        assert b(delta=0.2) <= base


def test_report_round_trip():
    rep = quantized_bound(_inputs(num_clusters=2, mutual_info=0.3, alphabet_size=None, quantization=0.01))
    rec = parse_report(rep.format())
    assert rec["kind"] == "quantized"
    assert rec["bound"] == rep.expected_loss_bound
    assert rec["complexity"] == rep.complexity
    assert rec["num_clusters"] == 2
    assert "alphabet_size" not in rec
