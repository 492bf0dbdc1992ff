"""Phase/amplitude disentanglement toolkit for aspect-sentiment embeddings.

Real-valued embeddings are mapped into a complex space by a zero-initialized
residual projection head; masked in-batch, angle, cosine, and amplitude
objectives (all with analytic gradients certified against finite
differences) train the head and a toy encoder on a synthetic corpus, and
analysis tooling reports the resulting geometry.
"""

from .complexspace import (
    AngleMode,
    ComplexEmbedding,
    amplitude,
    chunk_to_complex,
    complex_divide,
    hard_chunk_projection,
    phase_delta,
)
from .losses import (
    LossOutput,
    LossWeights,
    Temperatures,
    amplitude_penalty,
    angle_gradient_magnitude,
    angle_loss,
    cosine_gradient_magnitude,
    cosine_loss,
    ibn_loss,
    total_loss,
)
from .masking import (
    PairIndex,
    SemanticLabel,
    build_anticollision_mask,
    build_pair_index,
    identity_mask,
)
from .numerics import (
    RngStream,
    StatSummary,
    finite_difference_gradient,
    gaussian_sample,
    pearson,
    summarize,
)
from .zrcp import ZrcpGradients, ZrcpParams, zrcp_backward, zrcp_forward, zrcp_init

__version__ = "0.1.0"

__all__ = [
    "AngleMode",
    "ComplexEmbedding",
    "LossOutput",
    "LossWeights",
    "PairIndex",
    "RngStream",
    "SemanticLabel",
    "StatSummary",
    "Temperatures",
    "ZrcpGradients",
    "ZrcpParams",
    "amplitude",
    "amplitude_penalty",
    "angle_gradient_magnitude",
    "angle_loss",
    "build_anticollision_mask",
    "build_pair_index",
    "chunk_to_complex",
    "complex_divide",
    "cosine_gradient_magnitude",
    "cosine_loss",
    "finite_difference_gradient",
    "gaussian_sample",
    "hard_chunk_projection",
    "ibn_loss",
    "identity_mask",
    "pearson",
    "phase_delta",
    "summarize",
    "total_loss",
    "zrcp_backward",
    "zrcp_forward",
    "zrcp_init",
]
