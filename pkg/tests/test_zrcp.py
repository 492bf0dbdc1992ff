import numpy as np
import pytest

from phasesep.complexspace import ComplexEmbedding, chunk_to_complex
from phasesep.errors import DimensionError
from phasesep.numerics import RngStream, finite_difference_gradient
from phasesep.zrcp import ZrcpParams, zrcp_backward, zrcp_forward, zrcp_init


class TestInit:
    def test_shapes_and_zeros(self):
        p = zrcp_init(4)
        assert p.W_re.shape == (2, 2) and p.b_re.shape == (2,)
        assert p.W_im.shape == (2, 2) and p.b_im.shape == (2,)
        for arr in (p.W_re, p.b_re, p.W_im, p.b_im):
            assert np.all(arr == 0.0)

    def test_minimal_dim(self):
        p = zrcp_init(2)
        assert p.W_re.shape == (1, 1) and np.all(p.W_re == 0.0)

    def test_odd_dim_rejected(self):
        with pytest.raises(DimensionError):
            zrcp_init(5)

    def test_identity_at_init(self):
        rng = RngStream(1)
        for _ in range(50):
            d = 2 * int(rng.integers(1, 17))
            h = rng.normal(0, 1, d)
            out = zrcp_forward(zrcp_init(d), h)
            ref = chunk_to_complex(h)
            # bit-exact: x + 0 @ (x + b) must not perturb x
            assert np.array_equal(out.re, ref.re)
            assert np.array_equal(out.im, ref.im)


def _random_params(rng, k, scale=0.5):
    return ZrcpParams(
        W_re=rng.normal(0, scale, (k, k)),
        b_re=rng.normal(0, scale, k),
        W_im=rng.normal(0, scale, (k, k)),
        b_im=rng.normal(0, scale, k),
    )


class TestForward:
    def test_zero_params_identity(self):
        out = zrcp_forward(zrcp_init(4), np.array([1.0, 2.0, 3.0, 4.0]))
        assert np.array_equal(out.re, [1.0, 2.0])
        assert np.array_equal(out.im, [3.0, 4.0])

    def test_identity_weight_doubles_real_chunk(self):
        p = zrcp_init(4)
        p.W_re[:] = np.eye(2)
        out = zrcp_forward(p, np.array([1.0, 2.0, 3.0, 4.0]))
        assert np.allclose(out.re, [2.0, 4.0])
        assert np.allclose(out.im, [3.0, 4.0])

    def test_zero_weight_annihilates_bias(self):
        # printed form W(x+b): with W=0 the bias is unreachable
        p = zrcp_init(4)
        p.b_re[:] = [13.0, -7.0]
        h = np.array([1.0, 2.0, 3.0, 4.0])
        out = zrcp_forward(p, h)
        assert np.array_equal(out.re, [1.0, 2.0])

    def test_bias_outside_reaches_output(self):
        p = zrcp_init(4)
        p.b_re[:] = [13.0, -7.0]
        out = zrcp_forward(p, np.array([1.0, 2.0, 3.0, 4.0]), bias_outside=True)
        assert np.allclose(out.re, [14.0, -5.0])

    def test_linearity_with_zero_bias(self):
        rng = RngStream(2)
        k = 4
        p = _random_params(rng, k)
        p.b_re[:] = 0.0
        p.b_im[:] = 0.0
        h1, h2 = rng.normal(0, 1, 2 * k), rng.normal(0, 1, 2 * k)
        a, b = 1.7, -0.4
        lhs = zrcp_forward(p, a * h1 + b * h2)
        r1, r2 = zrcp_forward(p, h1), zrcp_forward(p, h2)
        assert np.allclose(lhs.re, a * r1.re + b * r2.re, atol=1e-12)
        assert np.allclose(lhs.im, a * r1.im + b * r2.im, atol=1e-12)

    def test_affine_consistency_general_bias(self):
        # with bias, forward(h1) - forward(h2) is linear in h1 - h2
        rng = RngStream(3)
        k = 3
        p = _random_params(rng, k)
        h1, h2 = rng.normal(0, 1, 2 * k), rng.normal(0, 1, 2 * k)
        f1, f2 = zrcp_forward(p, h1), zrcp_forward(p, h2)
        p0 = ZrcpParams(W_re=p.W_re, b_re=np.zeros(k), W_im=p.W_im, b_im=np.zeros(k))
        lin = zrcp_forward(p0, h1 - h2)
        assert np.allclose(f1.re - f2.re, lin.re, atol=1e-12)
        assert np.allclose(f1.im - f2.im, lin.im, atol=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            zrcp_forward(zrcp_init(4), np.zeros(6))


class TestBackward:
    def test_identity_jacobian_at_init(self):
        rng = RngStream(4)
        p = zrcp_init(8)
        h = rng.normal(0, 1, 8)
        g = ComplexEmbedding(re=rng.normal(0, 1, 4), im=rng.normal(0, 1, 4))
        grads = zrcp_backward(p, h, g)
        assert np.array_equal(grads.grad_h, np.concatenate([g.re, g.im]))

    def test_bias_grad_is_w_transpose_g(self):
        rng = RngStream(5)
        k = 3
        p = _random_params(rng, k)
        h = rng.normal(0, 1, 2 * k)
        g = ComplexEmbedding(re=rng.normal(0, 1, k), im=rng.normal(0, 1, k))
        grads = zrcp_backward(p, h, g)
        assert np.allclose(grads.grad_b_re, p.W_re.T @ g.re, atol=1e-12)
        assert np.allclose(grads.grad_b_im, p.W_im.T @ g.im, atol=1e-12)
        # zero params zero the bias gradient
        z = zrcp_backward(zrcp_init(2 * k), h, g)
        assert np.all(z.grad_b_re == 0.0) and np.all(z.grad_b_im == 0.0)

    @pytest.mark.parametrize("bias_outside", [False, True])
    def test_matches_finite_differences(self, bias_outside):
        rng = RngStream(6)
        for _ in range(25):
            k = int(rng.integers(1, 9))
            d = 2 * k
            p = _random_params(rng, k)
            h = rng.normal(0, 1, d)
            g = ComplexEmbedding(re=rng.normal(0, 1, k), im=rng.normal(0, 1, k))
            grads = zrcp_backward(p, h, g, bias_outside=bias_outside)
            analytic = np.concatenate(
                [
                    grads.grad_W_re.ravel(),
                    grads.grad_b_re,
                    grads.grad_W_im.ravel(),
                    grads.grad_b_im,
                    grads.grad_h,
                ]
            )

            def f(flat):
                o = 0
                w_re = flat[o : o + k * k].reshape(k, k)
                o += k * k
                b_re = flat[o : o + k]
                o += k
                w_im = flat[o : o + k * k].reshape(k, k)
                o += k * k
                b_im = flat[o : o + k]
                o += k
                out = zrcp_forward(
                    ZrcpParams(W_re=w_re, b_re=b_re, W_im=w_im, b_im=b_im),
                    flat[o : o + d],
                    bias_outside=bias_outside,
                )
                return float(g.re @ out.re + g.im @ out.im)

            x0 = np.concatenate([p.W_re.ravel(), p.b_re, p.W_im.ravel(), p.b_im, h])
            fd = finite_difference_gradient(f, x0)
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-2)
            assert (np.abs(analytic - fd) / denom).max() < 1e-5
