"""Zero-initialized residual complex projection head.

Two linear-plus-bias maps applied residually to the real and imaginary
chunks of the input embedding:

    re = x_re + W_re (x_re + b_re)
    im = x_im + W_im (x_im + b_im)

All parameters start at exactly zero, so a fresh head is the identity on the
chunked input. Note the bias sits inside the matrix product (the printed
form); with W = 0 the bias is therefore unreachable by gradients. The
conventional W x + b form is available via ``bias_outside=True``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complexspace import ComplexEmbedding
from .errors import DimensionError
from .numerics import assert_finite


@dataclass
class ZrcpParams:
    W_re: np.ndarray
    b_re: np.ndarray
    W_im: np.ndarray
    b_im: np.ndarray

    def __post_init__(self):
        self.W_re = np.asarray(self.W_re, dtype=np.float64)
        self.b_re = np.asarray(self.b_re, dtype=np.float64)
        self.W_im = np.asarray(self.W_im, dtype=np.float64)
        self.b_im = np.asarray(self.b_im, dtype=np.float64)
        k = self.half_dim
        for name, arr, shape in (
            ("W_re", self.W_re, (k, k)),
            ("b_re", self.b_re, (k,)),
            ("W_im", self.W_im, (k, k)),
            ("b_im", self.b_im, (k,)),
        ):
            if arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
            assert_finite(arr, f"ZrcpParams.{name}")

    @property
    def half_dim(self) -> int:
        return self.W_re.shape[0]


@dataclass
class ZrcpGradients:
    grad_W_re: np.ndarray
    grad_b_re: np.ndarray
    grad_W_im: np.ndarray
    grad_b_im: np.ndarray
    grad_h: np.ndarray


def zrcp_init(d: int) -> ZrcpParams:
    """Fresh head for full dimension d: every parameter exactly 0.0."""
    if d < 2 or d % 2 != 0:
        raise DimensionError(f"dimension must be even and >= 2, got {d}")
    k = d // 2
    return ZrcpParams(
        W_re=np.zeros((k, k)),
        b_re=np.zeros(k),
        W_im=np.zeros((k, k)),
        b_im=np.zeros(k),
    )


def zrcp_forward_batch(
    p: ZrcpParams, h: np.ndarray, bias_outside: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Project a batch of embeddings; h is (N, d), returns (RE, IM) each (N, d/2)."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != 2 * p.half_dim:
        raise DimensionError(
            f"batch shape {h.shape} incompatible with half-dim {p.half_dim}"
        )
    k = p.half_dim
    x_re = h[:, :k]
    x_im = h[:, k:]
    if bias_outside:
        re = x_re + x_re @ p.W_re.T + p.b_re
        im = x_im + x_im @ p.W_im.T + p.b_im
    else:
        re = x_re + (x_re + p.b_re) @ p.W_re.T
        im = x_im + (x_im + p.b_im) @ p.W_im.T
    return re, im


def zrcp_forward(p: ZrcpParams, h: np.ndarray, bias_outside: bool = False) -> ComplexEmbedding:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise DimensionError("embedding must be 1-D")
    re, im = zrcp_forward_batch(p, h[None, :], bias_outside=bias_outside)
    return ComplexEmbedding(re=re[0], im=im[0])


def zrcp_backward_batch(
    p: ZrcpParams,
    h: np.ndarray,
    g_re: np.ndarray,
    g_im: np.ndarray,
    bias_outside: bool = False,
) -> ZrcpGradients:
    """Chain-rule gradients for a batch; parameter gradients are summed over
    the batch, grad_h is per-row (N, d)."""
    h = np.asarray(h, dtype=np.float64)
    g_re = np.asarray(g_re, dtype=np.float64)
    g_im = np.asarray(g_im, dtype=np.float64)
    k = p.half_dim
    if h.ndim != 2 or h.shape[1] != 2 * k:
        raise DimensionError(f"batch shape {h.shape} incompatible with half-dim {k}")
    if g_re.shape != (h.shape[0], k) or g_im.shape != (h.shape[0], k):
        raise DimensionError("upstream gradient shape mismatch")
    x_re = h[:, :k]
    x_im = h[:, k:]
    # d out / d x = I + W, so grad_x rows are g + g W
    grad_x_re = g_re + g_re @ p.W_re
    grad_x_im = g_im + g_im @ p.W_im
    if bias_outside:
        grad_w_re = g_re.T @ x_re
        grad_w_im = g_im.T @ x_im
        grad_b_re = g_re.sum(axis=0)
        grad_b_im = g_im.sum(axis=0)
    else:
        grad_w_re = g_re.T @ (x_re + p.b_re)
        grad_w_im = g_im.T @ (x_im + p.b_im)
        grad_b_re = p.W_re.T @ g_re.sum(axis=0)
        grad_b_im = p.W_im.T @ g_im.sum(axis=0)
    return ZrcpGradients(
        grad_W_re=grad_w_re,
        grad_b_re=grad_b_re,
        grad_W_im=grad_w_im,
        grad_b_im=grad_b_im,
        grad_h=np.concatenate([grad_x_re, grad_x_im], axis=1),
    )


def zrcp_backward(
    p: ZrcpParams,
    h: np.ndarray,
    upstream: ComplexEmbedding,
    bias_outside: bool = False,
) -> ZrcpGradients:
    """Single-item gradients; upstream carries dL/d(re) and dL/d(im)."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise DimensionError("embedding must be 1-D")
    grads = zrcp_backward_batch(
        p, h[None, :], upstream.re[None, :], upstream.im[None, :], bias_outside=bias_outside
    )
    grads.grad_h = grads.grad_h[0]
    return grads
