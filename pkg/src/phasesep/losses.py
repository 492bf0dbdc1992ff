"""The four training objectives and their analytic gradients.

Every loss returns a LossOutput: a scalar value plus a gradient per input
embedding, keyed by batch index. Gradients are carried in the flat chunk
layout (real half followed by imaginary half), which coincides with the
real-valued embedding layout, so component gradients merge additively in
``total_loss`` regardless of whether the objective saw real or complex
inputs.

Similarities in the in-batch-negative and cosine objectives are computed on
unit-normalized copies; stored embeddings stay un-normalized so amplitudes
keep their meaning for the geometry analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .complexspace import AngleMode, ComplexEmbedding, amplitude
from .errors import (
    CompositionError,
    DimensionError,
    NormalizationError,
    NumericError,
    SingularDivisionError,
)
from .masking import PairIndex

COMPONENT_NAMES = ("ibn", "angle", "cos", "amp")


@dataclass(frozen=True)
class LossWeights:
    w_ibn: float = 1.0
    w_angle: float = 1.0
    w_cos: float = 1.0
    w_amp: float = 0.0

    def __post_init__(self):
        vals = (self.w_ibn, self.w_angle, self.w_cos, self.w_amp)
        if any(w < 0 for w in vals):
            raise ValueError("loss weights must be >= 0")
        if all(w == 0 for w in vals):
            raise ValueError("at least one loss weight must be > 0")

    def get(self, name: str) -> float:
        return {
            "ibn": self.w_ibn,
            "angle": self.w_angle,
            "cos": self.w_cos,
            "amp": self.w_amp,
        }[name]


@dataclass(frozen=True)
class Temperatures:
    tau_ibn: float = 20.0
    tau_angle: float = 20.0
    tau_cos: float = 20.0

    def __post_init__(self):
        if min(self.tau_ibn, self.tau_angle, self.tau_cos) <= 0:
            raise ValueError("temperatures must be > 0")


@dataclass
class LossOutput:
    value: float
    grads: dict[int, np.ndarray] = field(default_factory=dict)

    def scaled(self, s: float) -> "LossOutput":
        return LossOutput(self.value * s, {i: g * s for i, g in self.grads.items()})


def _stack_real(embs: Sequence[np.ndarray]) -> np.ndarray:
    x = np.ascontiguousarray(np.stack([np.asarray(e, dtype=np.float64) for e in embs]))
    if x.ndim != 2:
        raise DimensionError("embeddings must be 1-D vectors of equal length")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite embedding in batch")
    return x


def _check_pairs(pairs: Sequence[PairIndex], n: int) -> None:
    for pr in pairs:
        for i in (pr.anchor, pr.positive, *pr.negatives):
            if not 0 <= i < n:
                raise IndexError(f"pair index {i} out of range for batch of {n}")


def ibn_loss(
    embs: Sequence[np.ndarray],
    pairs: Sequence[PairIndex],
    mask: np.ndarray,
    tau: float,
) -> LossOutput:
    """Masked in-batch negative loss, summed over anchors.

    Per anchor i with positive p: -log( e^{s(i,p) tau} / (e^{s(i,p) tau} +
    sum over unmasked j of e^{s(i,j) tau}) ), where s is the dot product of
    unit-normalized embeddings. Same-label bystanders are masked out of the
    denominator; the designated positive is exempt from masking.
    """
    x = _stack_real(embs)
    n = x.shape[0]
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    if mask.shape != (n, n):
        raise DimensionError(f"mask shape {mask.shape} does not match batch of {n}")
    _check_pairs(pairs, n)
    if not pairs:
        return LossOutput(0.0, {i: np.zeros(x.shape[1]) for i in range(n)})
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise NormalizationError("zero-norm embedding in IBN batch")
    u = np.ascontiguousarray(x / norms[:, None])
    anchors = np.asarray([p.anchor for p in pairs], dtype=np.int64)
    positives = np.asarray([p.positive for p in pairs], dtype=np.int64)
    value, grad = kernels.ibn_loss_grad(u, norms, anchors, positives, mask, float(tau))
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericError("non-finite IBN loss or gradient")
    return LossOutput(float(value), {i: grad[i] for i in range(n)})


def _pair_table(pairs: Sequence[PairIndex]) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Flatten (anchor, target) rows: positive pair first, then the
    negatives, per anchor. Returns (query idx, target idx, per-anchor
    (start, count) slices)."""
    q_idx: list[int] = []
    t_idx: list[int] = []
    slices: list[tuple[int, int]] = []
    for pr in pairs:
        start = len(q_idx)
        q_idx.append(pr.anchor)
        t_idx.append(pr.positive)
        for ng in pr.negatives:
            q_idx.append(pr.anchor)
            t_idx.append(ng)
        slices.append((start, 1 + len(pr.negatives)))
    return np.asarray(q_idx, dtype=np.int64), np.asarray(t_idx, dtype=np.int64), slices


def _ranking_terms(deltas: np.ndarray, slices, tau: float, flip_sign: bool):
    """Shared log(1 + sum exp(...)) machinery over per-anchor pair deltas.

    Default exponent is tau*(delta_pos - delta_neg): minimizing pulls the
    positive-pair delta below every negative-pair delta. ``flip_sign``
    reproduces the reversed ordering for comparison runs.

    Returns (loss_sum, coefficients dL/d(delta) aligned with `deltas`).
    """
    coef = np.zeros_like(deltas)
    total = 0.0
    for start, count in slices:
        if count < 2:
            continue  # no negatives: the term is log(1) = 0
        dp = deltas[start]
        dn = deltas[start + 1 : start + count]
        exps = tau * (dn - dp) if flip_sign else tau * (dp - dn)
        m = max(0.0, float(exps.max()))
        e = np.exp(exps - m)
        z = np.exp(-m) + e.sum()
        total += m + np.log(z)
        w = e / z
        if flip_sign:
            coef[start] += -tau * w.sum()
            coef[start + 1 : start + count] += tau * w
        else:
            coef[start] += tau * w.sum()
            coef[start + 1 : start + count] += -tau * w
    return total, coef


def angle_loss(
    cembs: Sequence[ComplexEmbedding],
    pairs: Sequence[PairIndex],
    tau: float,
    mode: AngleMode = AngleMode.EXACT_PHASE,
    paper_literal_sign: bool = False,
    floor: float = 0.0,
) -> LossOutput:
    """Phase-margin ranking loss over triplet-scoped negatives.

    Per anchor: log(1 + sum over its negatives of exp(tau * (delta(z, pos) -
    delta(z, neg)))). Scale-invariant in both angle modes because the phase
    delta is. Gradients are returned in flat chunk layout.
    """
    n = len(cembs)
    if n == 0:
        raise ValueError("empty batch")
    k = cembs[0].half_dim
    re = np.ascontiguousarray(np.stack([c.re for c in cembs]))
    im = np.ascontiguousarray(np.stack([c.im for c in cembs]))
    if re.shape[1] != k or im.shape != re.shape:
        raise DimensionError("inconsistent complex embedding dimensions")
    _check_pairs(pairs, n)
    grad = np.zeros((n, 2 * k))
    if not pairs:
        return LossOutput(0.0, {i: grad[i] for i in range(n)})
    q_idx, t_idx, slices = _pair_table(pairs)
    qa, qb = re[q_idx], im[q_idx]
    ta, tb = re[t_idx], im[t_idx]
    if floor <= 0.0:
        wmag = ta * ta + tb * tb
        bad = np.argwhere(wmag == 0.0)
        if bad.size:
            r, c = bad[0]
            raise SingularDivisionError(
                int(c),
                f"pair anchor={q_idx[r]} target={t_idx[r]}",
            )
    if mode == AngleMode.EXACT_PHASE:
        deltas, d_qa, d_qb, d_ta, d_tb = kernels.exact_phase_pairs(qa, qb, ta, tb, floor)
    elif mode == AngleMode.SURROGATE_SUM:
        deltas, d_qa, d_qb, d_ta, d_tb = _surrogate_phase_pairs(qa, qb, ta, tb, floor)
    else:
        raise ValueError(f"unknown angle mode: {mode!r}")
    total, coef = _ranking_terms(deltas, slices, float(tau), paper_literal_sign)
    c = coef[:, None]
    np.add.at(grad[:, :k], q_idx, c * d_qa)
    np.add.at(grad[:, k:], q_idx, c * d_qb)
    np.add.at(grad[:, :k], t_idx, c * d_ta)
    np.add.at(grad[:, k:], t_idx, c * d_tb)
    if not np.isfinite(total) or not np.all(np.isfinite(grad)):
        raise NumericError("non-finite angle loss or gradient")
    return LossOutput(float(total), {i: grad[i] for i in range(n)})


def _surrogate_phase_pairs(qa, qb, ta, tb, floor):
    """Summed-component phase surrogate and its derivatives, per pair row.

    value = | (sum re' + sum im') / (|z|/|w|) | with (re', im') the
    coordinatewise quotient. Not backend-dispatched: it is the parity mode,
    not a hot path.
    """
    denom = ta * ta + tb * tb
    if floor > 0.0:
        denom = np.maximum(denom, floor)
    re_q = (qa * ta + qb * tb) / denom
    im_q = (qb * ta - qa * tb) / denom
    znorm = np.sqrt((qa * qa + qb * qb).sum(axis=1))
    wnorm = np.sqrt((ta * ta + tb * tb).sum(axis=1))
    if np.any(znorm == 0.0) or np.any(wnorm == 0.0):
        raise NormalizationError("zero-amplitude embedding in surrogate phase delta")
    ratio = znorm / wnorm
    s = (re_q + im_q).sum(axis=1)
    t = s / ratio
    delta = np.abs(t)
    sgn = np.sign(t)
    # dS/d(inputs)
    ds_qa = (ta - tb) / denom
    ds_qb = (tb + ta) / denom
    ds_ta = (qa + qb) / denom - 2.0 * ta * (re_q + im_q) / denom
    ds_tb = (qb - qa) / denom - 2.0 * tb * (re_q + im_q) / denom
    # dR/d(inputs), R = |z|/|w|
    dr_qa = qa / (znorm * wnorm)[:, None]
    dr_qb = qb / (znorm * wnorm)[:, None]
    dr_ta = -(znorm / wnorm**3)[:, None] * ta
    dr_tb = -(znorm / wnorm**3)[:, None] * tb
    inv_r = (1.0 / ratio)[:, None]
    s_over_r2 = (s / ratio**2)[:, None]
    g = sgn[:, None]
    d_qa = g * (ds_qa * inv_r - s_over_r2 * dr_qa)
    d_qb = g * (ds_qb * inv_r - s_over_r2 * dr_qb)
    d_ta = g * (ds_ta * inv_r - s_over_r2 * dr_ta)
    d_tb = g * (ds_tb * inv_r - s_over_r2 * dr_tb)
    return delta, d_qa, d_qb, d_ta, d_tb


def cosine_loss(
    embs: Sequence[np.ndarray], pairs: Sequence[PairIndex], tau: float
) -> LossOutput:
    """Cosine ranking loss over per-anchor (positive, negative) pair combos.

    Per anchor: log(1 + sum over negatives of exp(tau * (cos(x, n) -
    cos(x, pos)))). Negatives are triplet-scoped, which keeps the loss
    additive across micro-batches for gradient accumulation.
    """
    x = _stack_real(embs)
    n = x.shape[0]
    _check_pairs(pairs, n)
    grad = np.zeros_like(x)
    if not pairs:
        return LossOutput(0.0, {i: grad[i] for i in range(n)})
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise NormalizationError("zero-norm embedding in cosine batch")
    u = x / norms[:, None]
    q_idx, t_idx, slices = _pair_table(pairs)
    cos = np.einsum("ij,ij->i", u[q_idx], u[t_idx])
    total, coef = _ranking_terms(cos, slices, float(tau), flip_sign=True)
    # d cos(x_a, x_b) / d x_a = (u_b - cos * u_a) / ||x_a||
    c = coef[:, None]
    np.add.at(grad, q_idx, c * (u[t_idx] - cos[:, None] * u[q_idx]) / norms[q_idx][:, None])
    np.add.at(grad, t_idx, c * (u[q_idx] - cos[:, None] * u[t_idx]) / norms[t_idx][:, None])
    if not np.isfinite(total) or not np.all(np.isfinite(grad)):
        raise NumericError("non-finite cosine loss or gradient")
    return LossOutput(float(total), {i: grad[i] for i in range(n)})


def amplitude_penalty(
    cembs: Sequence[ComplexEmbedding], aspects: Sequence[str]
) -> LossOutput:
    """Mean squared deviation of each amplitude from its aspect-group mean.

    value = (1/N) * sum_i (|z_i| - mean_{j in aspect(i)} |z_j|)^2. Zero when
    every group's amplitudes coincide and for single-member groups.
    """
    n = len(cembs)
    if n < 1:
        raise ValueError("empty batch")
    if len(aspects) != n:
        raise DimensionError("aspects/embeddings length mismatch")
    amps = np.array([amplitude(c) for c in cembs])
    group_mean: dict[str, float] = {}
    for a in set(aspects):
        members = [i for i in range(n) if aspects[i] == a]
        group_mean[a] = float(amps[members].mean())
    dev = amps - np.array([group_mean[a] for a in aspects])
    value = float((dev * dev).mean())
    grads: dict[int, np.ndarray] = {}
    for i, c in enumerate(cembs):
        if amps[i] == 0.0 or dev[i] == 0.0:
            grads[i] = np.zeros(2 * c.half_dim)
        else:
            # group-mean term cancels: sum of deviations within a group is 0
            grads[i] = (2.0 / n) * dev[i] * c.flat() / amps[i]
    return LossOutput(value, grads)


def total_loss(components: Mapping[str, LossOutput], weights: LossWeights) -> LossOutput:
    """Weighted sum of objective outputs; gradient maps merge additively.

    Components with weight zero contribute exactly nothing; a missing
    component with a positive weight is a composition error, as is any
    gradient shape mismatch across components for the same input id.
    """
    unknown = set(components) - set(COMPONENT_NAMES)
    if unknown:
        raise CompositionError(f"unknown loss components: {sorted(unknown)}")
    value = 0.0
    merged: dict[int, np.ndarray] = {}
    for name in COMPONENT_NAMES:
        w = weights.get(name)
        if w == 0.0:
            continue
        if name not in components:
            raise CompositionError(f"component {name!r} has weight {w} but is missing")
        out = components[name]
        value += w * out.value
        for i, g in out.grads.items():
            if i in merged:
                if merged[i].shape != g.shape:
                    raise CompositionError(
                        f"gradient shape mismatch for input {i}: "
                        f"{merged[i].shape} vs {g.shape}"
                    )
                merged[i] = merged[i] + w * g
            else:
                merged[i] = w * g
    return LossOutput(value, merged)


def cosine_gradient_magnitude(theta):
    """|d/d theta (1 - cos theta)| = |sin theta|; vanishes as theta -> 0."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.abs(np.sin(theta))
    return float(out) if out.ndim == 0 else out


def angle_gradient_magnitude(theta, tau: float):
    """Constant tau for every theta: the phase objective's driving force
    does not decay in the dense near-zero-angle zone."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    theta = np.asarray(theta, dtype=np.float64)
    out = np.full(theta.shape, float(tau))
    return float(tau) if theta.ndim == 0 else out
