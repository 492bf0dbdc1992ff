"""Complex-embedding geometry: chunking, coordinatewise division, amplitude,
and the two phase-divergence estimators."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, NormalizationError, SingularDivisionError
from .numerics import assert_finite


class AngleMode(str, Enum):
    """How the phase divergence between two complex embeddings is measured.

    EXACT_PHASE: mean absolute argument of the coordinatewise quotient; an
    angle in [0, pi]. This is the default because it is the quantity the
    geometric claims are stated about.

    SURROGATE_SUM: the summed-component estimator from the angle-optimized
    embedding lineage; a non-negative scalar, not an angle in radians. Kept
    for parity experiments.
    """

    EXACT_PHASE = "exact"
    SURROGATE_SUM = "surrogate"


@dataclass
class ComplexEmbedding:
    """Paired real/imag half-vectors representing z = re + im*i per coordinate."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        self.re = np.asarray(self.re, dtype=np.float64)
        self.im = np.asarray(self.im, dtype=np.float64)
        if self.re.ndim != 1 or self.im.ndim != 1:
            raise DimensionError("re and im must be 1-D")
        if self.re.size != self.im.size or self.re.size < 1:
            raise DimensionError(
                f"re/im length mismatch or empty: {self.re.size} vs {self.im.size}"
            )
        assert_finite(self.re, "ComplexEmbedding.re")
        assert_finite(self.im, "ComplexEmbedding.im")

    @property
    def half_dim(self) -> int:
        return self.re.size

    def flat(self) -> np.ndarray:
        """Chunk layout: the real half followed by the imaginary half."""
        return np.concatenate([self.re, self.im])

    @classmethod
    def from_flat(cls, v: np.ndarray) -> "ComplexEmbedding":
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or v.size % 2 != 0 or v.size < 2:
            raise DimensionError(f"flat vector must have even length >= 2, got {v.size}")
        k = v.size // 2
        return cls(re=v[:k].copy(), im=v[k:].copy())


def chunk_to_complex(h: np.ndarray) -> ComplexEmbedding:
    """Bisect an even-dimensional real vector into (real, imaginary) halves."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise DimensionError("embedding must be 1-D")
    if h.size < 2 or h.size % 2 != 0:
        raise DimensionError(f"embedding dimension must be even and >= 2, got {h.size}")
    k = h.size // 2
    return ComplexEmbedding(re=h[:k].copy(), im=h[k:].copy())


def hard_chunk_projection(h: np.ndarray) -> ComplexEmbedding:
    """Direct bisection of the hidden state; the projection-ablation leg."""
    return chunk_to_complex(h)


def complex_divide(z: ComplexEmbedding, w: ComplexEmbedding, floor: float = 0.0) -> ComplexEmbedding:
    """Coordinatewise complex division z/w.

    Per coordinate: (ac+bd)/(c^2+d^2) + i*(bc-ad)/(c^2+d^2). A coordinate of
    w with zero magnitude raises SingularDivisionError naming the coordinate
    unless floor > 0, in which case denominators are clamped from below.
    """
    if z.half_dim != w.half_dim:
        raise DimensionError(f"half-dim mismatch: {z.half_dim} vs {w.half_dim}")
    denom = w.re * w.re + w.im * w.im
    if floor > 0.0:
        denom = np.maximum(denom, floor)
    else:
        zero = np.flatnonzero(denom == 0.0)
        if zero.size:
            raise SingularDivisionError(int(zero[0]))
    re = (z.re * w.re + z.im * w.im) / denom
    im = (z.im * w.re - z.re * w.im) / denom
    return ComplexEmbedding(re=re, im=im)


def amplitude(z: ComplexEmbedding) -> float:
    """L2 magnitude of the complex embedding: sqrt(sum re^2 + im^2)."""
    return float(np.sqrt(z.re @ z.re + z.im @ z.im))


def phase_delta(
    z: ComplexEmbedding,
    w: ComplexEmbedding,
    mode: AngleMode = AngleMode.EXACT_PHASE,
    floor: float = 0.0,
) -> float:
    """Phase divergence between z and w under the chosen estimator.

    EXACT_PHASE returns the mean |atan2| of the quotient's coordinates, in
    [0, pi]. The global |z|/|w| amplitude normalization is a mathematical
    no-op here (atan2 is invariant to positive scaling of its arguments), so
    it is not applied; do not mistake that for a missing step.

    SURROGATE_SUM divides the quotient by the amplitude ratio |z|/|w| (where
    the normalization is load-bearing) and returns |sum(re') + sum(im')|.
    """
    q = complex_divide(z, w, floor=floor)
    if mode == AngleMode.EXACT_PHASE:
        return float(np.mean(np.abs(np.arctan2(q.im, q.re))))
    if mode == AngleMode.SURROGATE_SUM:
        ratio = amplitude(z) / amplitude(w)
        if ratio == 0.0:
            raise NormalizationError("zero-amplitude query in surrogate phase delta")
        return float(abs((q.re.sum() + q.im.sum()) / ratio))
    raise ValueError(f"unknown angle mode: {mode!r}")
