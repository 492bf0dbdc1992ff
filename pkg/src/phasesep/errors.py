"""Exception types shared across the package."""


class PhasesepError(Exception):
    """Base class for all package errors."""


class ConfigError(PhasesepError, ValueError):
    """Invalid configuration, flags, or schema violation (CLI exit code 1)."""


class DimensionError(PhasesepError, ValueError):
    """Vector or matrix dimensions violate a contract (odd dim, mismatch)."""


class SingularDivisionError(PhasesepError, ValueError):
    """Complex division by a coordinate with zero magnitude."""

    def __init__(self, coordinate: int, detail: str = ""):
        self.coordinate = coordinate
        msg = f"complex division singular at coordinate {coordinate}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NormalizationError(PhasesepError, ValueError):
    """Unit normalization of a zero-norm (or zero-amplitude) vector."""


class DataIntegrityError(PhasesepError, ValueError):
    """Triplet/batch structure violates the same-aspect / polarity contracts."""


class CompositionError(PhasesepError, ValueError):
    """Loss components cannot be merged (mismatched ids or shapes)."""


class NumericError(PhasesepError, ArithmeticError):
    """Non-finite value produced where a finite one is required."""


class OracleError(PhasesepError, RuntimeError):
    """The finite-difference oracle hit a non-finite evaluation."""


class UndefinedCorrelationError(PhasesepError, ValueError):
    """Pearson correlation requested on a zero-variance sequence."""


class EvaluationError(PhasesepError, ValueError):
    """Classification metrics cannot be computed (e.g. empty reference class)."""


class ReportError(PhasesepError, ValueError):
    """Analysis report preconditions violated (single polarity, bad grid)."""


class EmbfFormatError(PhasesepError, ValueError):
    """Malformed EMBF container or labels sidecar."""


class LockError(PhasesepError, RuntimeError):
    """Run directory is already locked by another process."""
