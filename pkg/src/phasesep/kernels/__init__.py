"""Backend dispatch for the hot numeric kernels.

Two interchangeable implementations exist: a numba-jitted one and a pure
numpy one. Selection order:

  1. the ``PHASESEP_BACKEND`` environment variable (``numba`` or ``numpy``),
  2. otherwise numba when importable, numpy as the fallback.

`set_backend` overrides the choice at runtime (used by tests and the
benchmark). Both backends agree to floating-point rounding noise; see
``benchmarks/bench_kernels.py`` for the speed comparison.
"""

import os

from ..errors import ConfigError
from . import _numpy

_BACKENDS = {"numpy": _numpy}
try:
    from . import _numba

    _BACKENDS["numba"] = _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    pass

_env = os.environ.get("PHASESEP_BACKEND", "").strip().lower()
if _env and _env not in _BACKENDS:
    raise ConfigError(
        f"PHASESEP_BACKEND={_env!r} is not available; choose one of {sorted(_BACKENDS)}"
    )
_active = _env or ("numba" if "numba" in _BACKENDS else "numpy")


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def active_backend() -> str:
    return _active


def set_backend(name: str) -> str:
    """Switch the kernel backend; returns the previous one."""
    global _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; choose one of {sorted(_BACKENDS)}")
    previous = _active
    _active = name
    return previous


def exact_phase_pairs(qa, qb, ta, tb, floor=0.0):
    return _BACKENDS[_active].exact_phase_pairs(qa, qb, ta, tb, floor)


def ibn_loss_grad(u, norms, anchors, positives, mask, tau):
    return _BACKENDS[_active].ibn_loss_grad(u, norms, anchors, positives, mask, tau)
