import numpy as np
import pytest

from phasesep.complexspace import (
    AngleMode,
    ComplexEmbedding,
    amplitude,
    chunk_to_complex,
    complex_divide,
    hard_chunk_projection,
    phase_delta,
)
from phasesep.errors import DimensionError, SingularDivisionError
from phasesep.numerics import RngStream


def _rand_cemb(rng, k):
    return ComplexEmbedding(re=rng.normal(0, 1, k), im=rng.normal(0, 1, k))


class TestChunk:
    def test_definition(self):
        c = chunk_to_complex(np.array([1.0, 2.0, 3.0, 4.0]))
        assert np.array_equal(c.re, [1.0, 2.0])
        assert np.array_equal(c.im, [3.0, 4.0])

    def test_zero_case(self):
        c = chunk_to_complex(np.array([0.0, 0.0]))
        assert np.array_equal(c.re, [0.0]) and np.array_equal(c.im, [0.0])

    def test_round_trip(self):
        rng = RngStream(1)
        for _ in range(20):
            h = rng.normal(0, 1, 2 * int(rng.integers(1, 9)))
            assert np.array_equal(chunk_to_complex(h).flat(), h)

    def test_odd_dim_rejected(self):
        with pytest.raises(DimensionError):
            chunk_to_complex(np.array([1.0, 2.0, 3.0]))

    def test_hard_chunk_is_alias(self):
        rng = RngStream(2)
        for _ in range(10):
            h = rng.normal(0, 1, 8)
            a, b = hard_chunk_projection(h), chunk_to_complex(h)
            assert np.array_equal(a.re, b.re) and np.array_equal(a.im, b.im)
        c = hard_chunk_projection(np.array([1.0, 0.0]))
        assert np.array_equal(c.re, [1.0]) and np.array_equal(c.im, [0.0])


class TestComplexDivide:
    def test_divide_by_one(self):
        q = complex_divide(
            ComplexEmbedding(re=[1.0], im=[1.0]), ComplexEmbedding(re=[1.0], im=[0.0])
        )
        assert q.re[0] == pytest.approx(1.0) and q.im[0] == pytest.approx(1.0)

    def test_self_division(self):
        rng = RngStream(3)
        z = _rand_cemb(rng, 5)
        q = complex_divide(z, z)
        assert np.allclose(q.re, 1.0) and np.allclose(q.im, 0.0, atol=1e-15)

    def test_one_over_i(self):
        q = complex_divide(
            ComplexEmbedding(re=[1.0], im=[0.0]), ComplexEmbedding(re=[0.0], im=[1.0])
        )
        assert q.re[0] == pytest.approx(0.0) and q.im[0] == pytest.approx(-1.0)

    def test_singularity_names_coordinate(self):
        z = ComplexEmbedding(re=[1.0, 1.0], im=[1.0, 1.0])
        w = ComplexEmbedding(re=[1.0, 0.0], im=[0.0, 0.0])
        with pytest.raises(SingularDivisionError) as exc:
            complex_divide(z, w)
        assert exc.value.coordinate == 1

    def test_floor_suppresses_singularity(self):
        z = ComplexEmbedding(re=[1.0], im=[0.0])
        w = ComplexEmbedding(re=[0.0], im=[0.0])
        q = complex_divide(z, w, floor=1e-12)
        assert np.isfinite(q.re).all()

    def test_multiply_back_recovers(self):
        # independent arithmetic oracle: (z/w) * w == z per coordinate
        rng = RngStream(4)
        for _ in range(30):
            k = int(rng.integers(1, 9))
            z, w = _rand_cemb(rng, k), _rand_cemb(rng, k)
            q = complex_divide(z, w)
            re_back = q.re * w.re - q.im * w.im
            im_back = q.re * w.im + q.im * w.re
            assert np.allclose(re_back, z.re, atol=1e-10)
            assert np.allclose(im_back, z.im, atol=1e-10)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            complex_divide(
                ComplexEmbedding(re=[1.0], im=[0.0]),
                ComplexEmbedding(re=[1.0, 2.0], im=[0.0, 0.0]),
            )


class TestAmplitude:
    def test_three_four_five(self):
        assert amplitude(ComplexEmbedding(re=[3.0], im=[4.0])) == pytest.approx(5.0)

    def test_zero_vector(self):
        assert amplitude(ComplexEmbedding(re=[0.0, 0.0], im=[0.0, 0.0])) == 0.0

    def test_homogeneity(self):
        rng = RngStream(5)
        for _ in range(20):
            z = _rand_cemb(rng, 6)
            s = float(rng.random() * 10 + 0.01)
            scaled = ComplexEmbedding(re=s * z.re, im=s * z.im)
            assert amplitude(scaled) == pytest.approx(s * amplitude(z), rel=1e-12)


class TestPhaseDelta:
    def test_arg_of_one_plus_i(self):
        d = phase_delta(
            ComplexEmbedding(re=[1.0], im=[1.0]), ComplexEmbedding(re=[1.0], im=[0.0])
        )
        assert d == pytest.approx(np.pi / 4)

    def test_identical_phase_zero(self):
        rng = RngStream(6)
        z = _rand_cemb(rng, 4)
        assert phase_delta(z, z) == pytest.approx(0.0, abs=1e-12)

    def test_opposite_reals_pi(self):
        d = phase_delta(
            ComplexEmbedding(re=[1.0], im=[0.0]), ComplexEmbedding(re=[-1.0], im=[0.0])
        )
        assert d == pytest.approx(np.pi)

    @pytest.mark.parametrize("mode", [AngleMode.EXACT_PHASE, AngleMode.SURROGATE_SUM])
    @pytest.mark.parametrize("s", [0.1, 3.7, 100.0])
    def test_scale_invariance(self, mode, s):
        rng = RngStream(7)
        for _ in range(10):
            z, w = _rand_cemb(rng, 5), _rand_cemb(rng, 5)
            base = phase_delta(z, w, mode)
            zs = ComplexEmbedding(re=s * z.re, im=s * z.im)
            ws = ComplexEmbedding(re=s * w.re, im=s * w.im)
            assert abs(phase_delta(zs, w, mode) - base) < 1e-10 * max(1, base)
            assert abs(phase_delta(z, ws, mode) - base) < 1e-10 * max(1, base)

    def test_per_coordinate_rescale_invariance_exact(self):
        rng = RngStream(8)
        for _ in range(10):
            k = 6
            z, w = _rand_cemb(rng, k), _rand_cemb(rng, k)
            base = phase_delta(z, w)
            scales = rng.random(k) * 5 + 0.1
            zs = ComplexEmbedding(re=scales * z.re, im=scales * z.im)
            assert abs(phase_delta(zs, w) - base) < 1e-10

    def test_symmetry_exact(self):
        rng = RngStream(9)
        for _ in range(20):
            z, w = _rand_cemb(rng, 5), _rand_cemb(rng, 5)
            assert phase_delta(z, w) == pytest.approx(phase_delta(w, z), abs=1e-12)

    def test_bounds(self):
        rng = RngStream(10)
        for _ in range(30):
            z, w = _rand_cemb(rng, 4), _rand_cemb(rng, 4)
            assert 0.0 <= phase_delta(z, w) <= np.pi
            assert phase_delta(z, w, AngleMode.SURROGATE_SUM) >= 0.0

    def test_singularity_propagates(self):
        z = ComplexEmbedding(re=[1.0], im=[1.0])
        w = ComplexEmbedding(re=[0.0], im=[0.0])
        with pytest.raises(SingularDivisionError):
            phase_delta(z, w)


class TestComplexEmbedding:
    def test_from_flat_round_trip(self):
        v = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.array_equal(ComplexEmbedding.from_flat(v).flat(), v)

    def test_mismatched_halves_rejected(self):
        with pytest.raises(DimensionError):
            ComplexEmbedding(re=[1.0, 2.0], im=[3.0])

    def test_nonfinite_rejected(self):
        from phasesep.errors import NumericError

        with pytest.raises(NumericError):
            ComplexEmbedding(re=[np.nan], im=[0.0])
