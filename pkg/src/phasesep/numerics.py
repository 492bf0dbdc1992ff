"""Deterministic vector math: seeded RNG streams, statistics helpers, and the
central finite-difference oracle used to certify every analytic gradient in
this package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, OracleError, UndefinedCorrelationError

# Counter-based generator: identical draw sequences for identical seeds on
# every platform numpy supports. The id is stored in run artifacts so results
# are replayable.
RNG_ALGORITHM = "numpy-philox4x64-10"


class RngStream:
    """Single-consumer stream of pseudo-random draws.

    Never share one stream across threads; `split` it first. Splitting is
    deterministic given the parent seed and the order of split calls.
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self.algorithm = RNG_ALGORITHM
        self._seq = _seq if _seq is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def split(self, n: int) -> list["RngStream"]:
        return [RngStream(self.seed, _seq=c) for c in self._seq.spawn(n)]

    # Thin delegates; kept explicit so the consumed surface is visible.
    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def random(self, size=None):
        return self._gen.random(size)

    def choice(self, a, size=None, replace=True, p=None):
        return self._gen.choice(a, size=size, replace=replace, p=p)

    def shuffle(self, x):
        self._gen.shuffle(x)

    def permutation(self, x):
        return self._gen.permutation(x)

    def poisson(self, lam, size=None):
        return self._gen.poisson(lam, size)


def gaussian_sample(rng: RngStream, n: int, mean: float, std: float) -> np.ndarray:
    """`n` gaussian draws from the stream. Deterministic given the seed;
    std=0 degenerates to `mean` repeated."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if std < 0:
        raise ValueError("std must be >= 0")
    return rng.normal(float(mean), float(std), int(n))


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient oracle.

    Component i is (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps). This is the
    independent reference every analytic gradient is checked against; it must
    never share code with the paths it certifies.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1).copy()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(flat.reshape(x.shape).copy()))
        flat[i] = orig - eps
        fm = float(f(flat.reshape(x.shape).copy()))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise OracleError(f"non-finite evaluation while perturbing component {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad.reshape(x.shape)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient, clipped to [-1, 1].

    Raises UndefinedCorrelationError when either sequence has zero variance.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise ValueError("pearson expects 1-D sequences")
    if xa.size != ya.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise ValueError("pearson needs at least 2 points")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    sx = float(np.sqrt(xd @ xd))
    sy = float(np.sqrt(yd @ yd))
    if sx == 0.0 or sy == 0.0:
        which = "x" if sx == 0.0 else "y"
        raise UndefinedCorrelationError(f"zero variance in {which}")
    r = float((xd @ yd) / (sx * sy))
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class StatSummary:
    mean: float
    std: float
    min: float
    max: float
    n: int


def summarize(values: Sequence[float]) -> StatSummary:
    """Population statistics (std with ddof=0) of a non-empty sequence."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 1:
        raise ValueError("summarize needs at least one value")
    if not np.all(np.isfinite(v)):
        raise NumericError("non-finite value in summary input")
    return StatSummary(
        mean=float(v.mean()),
        std=float(v.std()),
        min=float(v.min()),
        max=float(v.max()),
        n=int(v.size),
    )


def assert_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")
