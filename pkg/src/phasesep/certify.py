"""Finite-difference certification of every analytic gradient.

Each target draws seeded random instances (batch size <= 8, dimension <= 16),
computes the analytic gradient, and compares against the central-difference
oracle. Instances whose quotient phases sit within the exclusion margin of an
atan2 branch point (the +-pi discontinuity or the |.| kink at 0) are
resampled: the forward value is fine there but the derivative of the
absolute phase is not defined.

A component passes when |analytic - fd| / max(|analytic|, |fd|, 0.01) < tol.
The 0.01 floor keeps the oracle's own rounding noise (about |f| * ulp /
(2*eps), up to ~1e-8 absolute here) from registering on near-zero
components, while any disagreement at a magnitude that matters for training
still fails by orders of magnitude.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .complexspace import AngleMode, ComplexEmbedding
from .encoder import encode, encode_backward, encoder_init
from .errors import PhasesepError
from .losses import (
    LossWeights,
    amplitude_penalty,
    angle_loss,
    cosine_loss,
    ibn_loss,
    total_loss,
)
from .masking import PairIndex, SemanticLabel, build_anticollision_mask
from .numerics import RngStream, finite_difference_gradient
from .zrcp import ZrcpParams, zrcp_backward, zrcp_forward

DEFAULT_EPS = 1e-5
DEFAULT_TOL = 1e-5
ATOL_SCALE = 1e-2  # denominator floor; absorbs the oracle's rounding noise
BRANCH_MARGIN = 1e-3
# Coordinates with |z_k|^2 or |w_k|^2 below this sit near the atan2 origin
# (arg undefined) where the oracle's truncation error blows up with the
# 1/|.|^2 gradient scale; such instances are resampled.
MIN_COORD_MAG2 = 0.05
MAX_RESAMPLES = 200

TARGETS = (
    "zrcp",
    "zrcp_bias_outside",
    "encoder",
    "ibn",
    "angle_exact",
    "angle_surrogate",
    "cosine",
    "amplitude",
    "total",
)


@dataclass
class TargetReport:
    target: str
    instances: int
    max_rel_err: float
    resamples: int
    passed: bool


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    diff = np.abs(analytic.ravel() - fd.ravel())
    denom = np.maximum(
        np.maximum(np.abs(analytic.ravel()), np.abs(fd.ravel())), ATOL_SCALE
    )
    return float((diff / denom).max())


def _random_batch(rng: RngStream, with_labels: bool = True):
    """1-2 triplets (query, positive, 1-2 negatives) of gaussian embeddings,
    d in {8..16} even."""
    d = 2 * int(rng.integers(4, 9))
    n_trip = int(rng.integers(1, 3))
    embs, labels, pairs = [], [], []
    idx = 0
    for t in range(n_trip):
        aspect = f"a{t}"
        n_neg = int(rng.integers(1, 3))
        members = 2 + n_neg
        if idx + members > 8:
            break
        q, p = idx, idx + 1
        negs = list(range(idx + 2, idx + 2 + n_neg))
        for role_i in range(members):
            embs.append(rng.normal(0.0, 1.0, d))
        labels += [SemanticLabel(aspect, "pos")] * 2 + [SemanticLabel(aspect, "neg")] * n_neg
        pairs.append(PairIndex(anchor=q, positive=p, negatives=negs))
        idx += members
    if with_labels:
        return embs, labels, pairs, d
    return embs, pairs, d


def _phases_clear_of_branches(embs, pairs) -> bool:
    k = embs[0].size // 2
    for pr in pairs:
        z = embs[pr.anchor]
        if np.any(z[:k] ** 2 + z[k:] ** 2 < MIN_COORD_MAG2):
            return False
        for j in (pr.positive, *pr.negatives):
            w = embs[j]
            if np.any(w[:k] ** 2 + w[k:] ** 2 < MIN_COORD_MAG2):
                return False
            x = z[:k] * w[:k] + z[k:] * w[k:]
            y = z[k:] * w[:k] - z[:k] * w[k:]
            phi = np.abs(np.arctan2(y, x))
            if np.any(phi < BRANCH_MARGIN) or np.any(np.pi - phi < BRANCH_MARGIN):
                return False
    return True


def _surrogate_clear(embs, pairs) -> bool:
    from .complexspace import phase_delta

    if not _phases_clear_of_branches(embs, pairs):
        return False
    for pr in pairs:
        za = ComplexEmbedding.from_flat(embs[pr.anchor])
        for j in (pr.positive, *pr.negatives):
            # the |sum| kink of the surrogate scalar
            if phase_delta(za, ComplexEmbedding.from_flat(embs[j]), AngleMode.SURROGATE_SUM) < BRANCH_MARGIN:
                return False
    return True


def _flatten_batch(embs) -> np.ndarray:
    return np.concatenate(embs)


def _unflatten(v: np.ndarray, n: int, d: int):
    return [v[i * d : (i + 1) * d] for i in range(n)]


def _grads_to_vector(grads: dict[int, np.ndarray], n: int, d: int) -> np.ndarray:
    out = np.zeros(n * d)
    for i, g in grads.items():
        out[i * d : (i + 1) * d] = g
    return out


def _check_loss_target(rng: RngStream, make_value, make_grads, clear_fn=None, eps=DEFAULT_EPS):
    """Generic loss-vs-embeddings check on one instance. Returns rel err and
    resample count."""
    resamples = 0
    while True:
        embs, labels, pairs, d = _random_batch(rng)
        if clear_fn is None or clear_fn(embs, pairs):
            break
        resamples += 1
        if resamples > MAX_RESAMPLES:
            raise PhasesepError("could not sample an instance clear of branch points")
    n = len(embs)

    def f(flat):
        return make_value(_unflatten(flat, n, d), labels, pairs)

    analytic = _grads_to_vector(make_grads(embs, labels, pairs), n, d)
    fd = finite_difference_gradient(f, _flatten_batch(embs), eps)
    return _rel_err(analytic, fd), resamples


def certify(
    seed: int = 0,
    instances: int = 100,
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
    targets: tuple[str, ...] = TARGETS,
) -> dict:
    """Run the certification suite; returns a JSON-serializable report."""
    t0 = time.perf_counter()
    streams = dict(zip(TARGETS, RngStream(seed).split(len(TARGETS))))
    reports: list[TargetReport] = []
    for target in targets:
        rng = streams[target]
        worst = 0.0
        resamples = 0
        for _ in range(instances):
            if target in ("zrcp", "zrcp_bias_outside"):
                err, rs = _certify_zrcp(rng, eps, bias_outside=target.endswith("outside"))
            elif target == "encoder":
                err, rs = _certify_encoder(rng, eps)
            elif target == "ibn":
                err, rs = _check_loss_target(
                    rng,
                    lambda e, l, p: ibn_loss(e, p, build_anticollision_mask(l), 20.0).value,
                    lambda e, l, p: ibn_loss(e, p, build_anticollision_mask(l), 20.0).grads,
                    eps=eps,
                )
            elif target == "angle_exact":
                err, rs = _check_loss_target(
                    rng,
                    lambda e, l, p: angle_loss(
                        [ComplexEmbedding.from_flat(v) for v in e], p, 20.0
                    ).value,
                    lambda e, l, p: angle_loss(
                        [ComplexEmbedding.from_flat(v) for v in e], p, 20.0
                    ).grads,
                    clear_fn=_phases_clear_of_branches,
                    eps=eps,
                )
            elif target == "angle_surrogate":
                err, rs = _check_loss_target(
                    rng,
                    lambda e, l, p: angle_loss(
                        [ComplexEmbedding.from_flat(v) for v in e],
                        p,
                        1.0,
                        mode=AngleMode.SURROGATE_SUM,
                    ).value,
                    lambda e, l, p: angle_loss(
                        [ComplexEmbedding.from_flat(v) for v in e],
                        p,
                        1.0,
                        mode=AngleMode.SURROGATE_SUM,
                    ).grads,
                    clear_fn=lambda e, p: _surrogate_clear(e, p),
                    eps=eps,
                )
            elif target == "cosine":
                err, rs = _check_loss_target(
                    rng,
                    lambda e, l, p: cosine_loss(e, p, 20.0).value,
                    lambda e, l, p: cosine_loss(e, p, 20.0).grads,
                    eps=eps,
                )
            elif target == "amplitude":
                err, rs = _check_loss_target(
                    rng,
                    lambda e, l, p: amplitude_penalty(
                        [ComplexEmbedding.from_flat(v) for v in e], [x.aspect for x in l]
                    ).value,
                    lambda e, l, p: amplitude_penalty(
                        [ComplexEmbedding.from_flat(v) for v in e], [x.aspect for x in l]
                    ).grads,
                    eps=eps,
                )
            elif target == "total":
                err, rs = _certify_total(rng, eps)
            else:
                raise ValueError(f"unknown certification target {target!r}")
            worst = max(worst, err)
            resamples += rs
        reports.append(
            TargetReport(
                target=target,
                instances=instances,
                max_rel_err=worst,
                resamples=resamples,
                passed=worst < tol,
            )
        )
    elapsed = time.perf_counter() - t0
    overall = max(r.max_rel_err for r in reports)
    return {
        "seed": seed,
        "instances": instances,
        "eps": eps,
        "tol": tol,
        "elapsed_seconds": elapsed,
        "max_rel_err": overall,
        "passed": all(r.passed for r in reports),
        "targets": {
            r.target: {
                "instances": r.instances,
                "max_rel_err": r.max_rel_err,
                "resamples": r.resamples,
                "passed": r.passed,
            }
            for r in reports
        },
    }


def _certify_zrcp(rng: RngStream, eps: float, bias_outside: bool):
    d = 2 * int(rng.integers(2, 9))
    k = d // 2
    params = ZrcpParams(
        W_re=rng.normal(0, 0.5, (k, k)),
        b_re=rng.normal(0, 0.5, k),
        W_im=rng.normal(0, 0.5, (k, k)),
        b_im=rng.normal(0, 0.5, k),
    )
    h = rng.normal(0, 1.0, d)
    g = ComplexEmbedding(re=rng.normal(0, 1.0, k), im=rng.normal(0, 1.0, k))
    grads = zrcp_backward(params, h, g, bias_outside=bias_outside)
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
        hh = flat[o : o + d]
        out = zrcp_forward(
            ZrcpParams(W_re=w_re, b_re=b_re, W_im=w_im, b_im=b_im),
            hh,
            bias_outside=bias_outside,
        )
        return float(g.re @ out.re + g.im @ out.im)

    x0 = np.concatenate([params.W_re.ravel(), params.b_re, params.W_im.ravel(), params.b_im, h])
    fd = finite_difference_gradient(f, x0, eps)
    return _rel_err(analytic, fd), 0


def _certify_encoder(rng: RngStream, eps: float):
    vocab, d_embed, d_out = 10, 6, 8
    params = encoder_init(vocab, d_embed, d_out, rng)
    toks = [int(t) for t in rng.integers(0, vocab, int(rng.integers(1, 7)))]
    g = rng.normal(0, 1.0, d_out)
    grads = encode_backward(params, toks, g)
    analytic = np.concatenate(
        [grads.grad_token_table.ravel(), grads.grad_head_W.ravel(), grads.grad_head_b]
    )

    def f(flat):
        o = 0
        table = flat[o : o + vocab * d_embed].reshape(vocab, d_embed)
        o += vocab * d_embed
        w = flat[o : o + d_out * d_embed].reshape(d_out, d_embed)
        o += d_out * d_embed
        b = flat[o : o + d_out]
        h = encode(ToyEncoderParamsShim(table, w, b), toks)
        return float(g @ h)

    x0 = np.concatenate([params.token_table.ravel(), params.head_W.ravel(), params.head_b])
    fd = finite_difference_gradient(f, x0, eps)
    return _rel_err(analytic, fd), 0


class ToyEncoderParamsShim:
    """Duck-typed parameter holder for the FD closure; skips re-validation
    on every oracle evaluation."""

    def __init__(self, table, w, b):
        self.token_table = table
        self.head_W = w
        self.head_b = b
        self.vocab_size = table.shape[0]
        self.d_embed = table.shape[1]
        self.d_out = w.shape[0]


def _certify_total(rng: RngStream, eps: float):
    weights = LossWeights(w_ibn=1.0, w_angle=1.0, w_cos=1.0, w_amp=1.0)

    def components(embs, labels, pairs):
        cembs = [ComplexEmbedding.from_flat(v) for v in embs]
        return {
            "ibn": ibn_loss(embs, pairs, build_anticollision_mask(labels), 20.0),
            "angle": angle_loss(cembs, pairs, 20.0),
            "cos": cosine_loss(embs, pairs, 20.0),
            "amp": amplitude_penalty(cembs, [x.aspect for x in labels]),
        }

    return _check_loss_target(
        rng,
        lambda e, l, p: total_loss(components(e, l, p), weights).value,
        lambda e, l, p: total_loss(components(e, l, p), weights).grads,
        clear_fn=_phases_clear_of_branches,
        eps=eps,
    )
