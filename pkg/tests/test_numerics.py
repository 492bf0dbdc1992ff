import numpy as np
import pytest

from phasesep.errors import OracleError, UndefinedCorrelationError
from phasesep.numerics import (
    RNG_ALGORITHM,
    RngStream,
    finite_difference_gradient,
    gaussian_sample,
    pearson,
    summarize,
)


class TestFiniteDifference:
    def test_quadratic(self):
        grad = finite_difference_gradient(lambda x: float(np.sum(x**2)), np.array([3.0]))
        assert abs(grad[0] - 6.0) < 1e-9

    def test_constant(self):
        grad = finite_difference_gradient(lambda x: 1.5, np.array([1.0, 2.0]))
        assert np.all(grad == 0.0)

    def test_matrix_shaped_input(self):
        w = np.arange(6.0).reshape(2, 3)
        grad = finite_difference_gradient(lambda m: float((m**2).sum()), w)
        assert grad.shape == (2, 3)
        assert np.allclose(grad, 2 * w, atol=1e-8)

    def test_nonfinite_names_component(self):
        def f(x):
            return float("nan") if x[1] > 0.5 else 0.0

        with pytest.raises(OracleError, match="component 1"):
            finite_difference_gradient(f, np.array([0.0, 0.5]))

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            finite_difference_gradient(lambda x: 0.0, np.array([1.0]), eps=0.0)


class TestPearson:
    def test_exact_linearity(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_exact_antilinearity(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_zero_variance_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])

    def test_affine_invariance(self):
        rng = RngStream(11)
        for _ in range(25):
            x = rng.normal(0, 1, 20)
            y = rng.normal(0, 1, 20)
            r = pearson(x, y)
            a, b = float(rng.random() * 5 + 0.1), float(rng.normal())
            assert abs(pearson(a * x + b, y) - r) < 1e-12
            assert abs(pearson(x, a * y + b) - r) < 1e-12

    def test_clipped_to_unit_interval(self):
        rng = RngStream(3)
        for _ in range(50):
            x = rng.normal(0, 1, 8)
            y = rng.normal(0, 1, 8)
            assert -1.0 <= pearson(x, y) <= 1.0


class TestRngStream:
    def test_same_seed_identical(self):
        a = gaussian_sample(RngStream(123), 64, 0.0, 1.0)
        b = gaussian_sample(RngStream(123), 64, 0.0, 1.0)
        assert np.array_equal(a, b)

    def test_zero_std_degenerate(self):
        v = gaussian_sample(RngStream(5), 10, 3.25, 0.0)
        assert np.all(v == 3.25)

    def test_law_of_large_numbers(self):
        # tolerance 5*std/sqrt(n); fails with probability ~6e-7 per seed,
        # pinned here for seed 2718
        n, mean, std = 100_000, 1.5, 2.0
        v = gaussian_sample(RngStream(2718), n, mean, std)
        assert abs(v.mean() - mean) < 5 * std / np.sqrt(n)

    def test_negative_std_rejected(self):
        with pytest.raises(ValueError):
            gaussian_sample(RngStream(0), 4, 0.0, -1.0)

    def test_split_streams_differ_but_replay(self):
        parent = RngStream(9)
        c1, c2 = parent.split(2)
        a1, a2 = c1.normal(0, 1, 16), c2.normal(0, 1, 16)
        assert not np.array_equal(a1, a2)
        d1, d2 = RngStream(9).split(2)
        assert np.array_equal(d1.normal(0, 1, 16), a1)
        assert np.array_equal(d2.normal(0, 1, 16), a2)

    def test_algorithm_id(self):
        assert RngStream(0).algorithm == RNG_ALGORITHM
        assert "philox" in RNG_ALGORITHM


class TestStatSummary:
    def test_basic(self):
        s = summarize([1.0, 2.0, 3.0])
        assert s.mean == pytest.approx(2.0)
        assert s.std == pytest.approx(np.sqrt(2.0 / 3.0))
        assert s.min == 1.0 and s.max == 3.0 and s.n == 3

    def test_invariants(self):
        rng = RngStream(77)
        for _ in range(20):
            v = rng.normal(0, 3, int(rng.integers(1, 30)))
            s = summarize(v)
            assert s.std >= 0
            assert s.min <= s.mean <= s.max
            assert s.n >= 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])
