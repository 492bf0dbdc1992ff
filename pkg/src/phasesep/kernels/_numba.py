"""Numba-jitted twins of the kernels in `_numpy.py`.

Same signatures, same semantics, loop-fused for speed. No fastmath: results
must track the numpy backend to rounding noise.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def exact_phase_pairs(qa, qb, ta, tb, floor):
    p, k = qa.shape
    delta = np.zeros(p)
    d_qa = np.empty((p, k))
    d_qb = np.empty((p, k))
    d_ta = np.empty((p, k))
    d_tb = np.empty((p, k))
    inv_k = 1.0 / k
    for r in range(p):
        acc = 0.0
        for c in range(k):
            a = qa[r, c]
            b = qb[r, c]
            cc = ta[r, c]
            dd = tb[r, c]
            x = a * cc + b * dd
            y = b * cc - a * dd
            phi = np.arctan2(y, x)
            acc += abs(phi)
            if phi > 0.0:
                sgn = inv_k
            elif phi < 0.0:
                sgn = -inv_k
            else:
                sgn = 0.0
            zm = a * a + b * b
            wm = cc * cc + dd * dd
            if floor > 0.0:
                if zm < floor:
                    zm = floor
                if wm < floor:
                    wm = floor
            d_qa[r, c] = sgn * (-b) / zm
            d_qb[r, c] = sgn * a / zm
            d_ta[r, c] = sgn * dd / wm
            d_tb[r, c] = sgn * (-cc) / wm
        delta[r] = acc * inv_k
    return delta, d_qa, d_qb, d_ta, d_tb


@njit(cache=True)
def ibn_loss_grad(u, norms, anchors, positives, mask, tau):
    n, d = u.shape
    s = u @ u.T
    grad = np.zeros((n, d))
    total = 0.0
    for t in range(anchors.shape[0]):
        a = anchors[t]
        p = positives[t]
        # max logit over the kept denominator set
        m = -1.0e300
        for j in range(n):
            if j == a:
                continue
            if mask[a, j] != 0 and j != p:
                continue
            v = tau * s[a, j]
            if v > m:
                m = v
        z = 0.0
        for j in range(n):
            if j == a:
                continue
            if mask[a, j] != 0 and j != p:
                continue
            z += np.exp(tau * s[a, j] - m)
        total += m + np.log(z) - tau * s[a, p]
        for j in range(n):
            if j == a:
                continue
            if mask[a, j] != 0 and j != p:
                continue
            coef = (tau / z) * np.exp(tau * s[a, j] - m)
            if j == p:
                coef -= tau
            saj = s[a, j]
            for q in range(d):
                grad[a, q] += coef * (u[j, q] - saj * u[a, q]) / norms[a]
                grad[j, q] += coef * (u[a, q] - saj * u[j, q]) / norms[j]
    return total, grad
