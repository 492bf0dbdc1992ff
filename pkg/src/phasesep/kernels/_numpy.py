"""Pure-numpy implementations of the hot inner kernels.

Reference backend: the numba twin in `_numba.py` must agree with these to
floating-point noise. Keep both files in lockstep.
"""

import numpy as np


def exact_phase_pairs(qa, qb, ta, tb, floor):
    """Per-pair mean absolute phase of the coordinatewise quotient z/w.

    qa,qb / ta,tb: (P, K) real and imaginary halves of P query/target pairs.
    Returns (delta, d_qa, d_qb, d_ta, d_tb): the (P,) phase deltas and the
    (P, K) partial derivatives of delta with respect to each input block.

    The quotient's argument is atan2(bc-ad, ac+bd); the common positive
    denominator c^2+d^2 cancels inside atan2. Callers must either verify
    that no target coordinate has zero magnitude or pass floor > 0, which
    clamps the gradient denominators.
    """
    x = qa * ta + qb * tb
    y = qb * ta - qa * tb
    phi = np.arctan2(y, x)
    k = qa.shape[1]
    delta = np.abs(phi).sum(axis=1) / k
    sgn = np.sign(phi) / k
    zmag = qa * qa + qb * qb
    wmag = ta * ta + tb * tb
    if floor > 0.0:
        zmag = np.maximum(zmag, floor)
        wmag = np.maximum(wmag, floor)
    d_qa = sgn * (-qb) / zmag
    d_qb = sgn * qa / zmag
    d_ta = sgn * tb / wmag
    d_tb = sgn * (-ta) / wmag
    return delta, d_qa, d_qb, d_ta, d_tb


def ibn_loss_grad(u, norms, anchors, positives, mask, tau):
    """Masked in-batch negative loss (sum over anchors) and its gradient.

    u: (N, d) unit-normalized embeddings; norms: (N,) original L2 norms;
    mask: (N, N) uint8 anti-collision matrix. Denominator terms for anchor
    `a` are the designated positive plus every j with mask[a, j] == 0,
    excluding `a` itself; masked bystanders are never touched, so their
    gradient contribution through `a` is exactly zero.

    Returns (loss_sum, grad) with grad taken with respect to the raw
    (un-normalized) embeddings.
    """
    n, d = u.shape
    s = u @ u.T
    grad = np.zeros((n, d))
    total = 0.0
    for a, p in zip(anchors, positives):
        keep = mask[a] == 0
        keep[a] = False
        keep[p] = True
        idx = np.flatnonzero(keep)
        logits = tau * s[a, idx]
        m = logits.max()
        w = np.exp(logits - m)
        z = w.sum()
        total += m + np.log(z) - tau * s[a, p]
        coef = (tau / z) * w
        coef[idx == p] -= tau
        sj = s[a, idx]
        uj = u[idx]
        grad[a] += (coef[:, None] * (uj - sj[:, None] * u[a][None, :])).sum(axis=0) / norms[a]
        np.add.at(
            grad,
            idx,
            coef[:, None] * (u[a][None, :] - sj[:, None] * uj) / norms[idx][:, None],
        )
    return total, grad
