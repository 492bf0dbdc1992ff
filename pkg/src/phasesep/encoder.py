"""Toy sentence encoder and the external-embedding bridge.

The encoder is a token embedding table, mean pooling and a linear head:
h = W * mean(table[tokens]) + b. It stands in for a pre-trained backbone at
desk scale; anyone with real backbone embeddings feeds them in through the
EMBF table instead and freezes encoder training.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import embf
from .errors import DataIntegrityError, DimensionError, EmbfFormatError
from .numerics import RngStream, assert_finite

INIT_STD = 0.02  # non-divergent across a {0.2, 0.02, 0.002} sweep; see docs


@dataclass
class ToyEncoderParams:
    token_table: np.ndarray  # (vocab, d_embed)
    head_W: np.ndarray  # (d_out, d_embed)
    head_b: np.ndarray  # (d_out,)

    def __post_init__(self):
        self.token_table = np.asarray(self.token_table, dtype=np.float64)
        self.head_W = np.asarray(self.head_W, dtype=np.float64)
        self.head_b = np.asarray(self.head_b, dtype=np.float64)
        if self.token_table.ndim != 2 or self.head_W.ndim != 2 or self.head_b.ndim != 1:
            raise DimensionError("bad encoder parameter ranks")
        if self.head_W.shape[1] != self.token_table.shape[1]:
            raise DimensionError("head_W width must match token embedding dim")
        if self.head_W.shape[0] != self.head_b.size:
            raise DimensionError("head_b length must match head_W rows")
        if self.d_out % 2 != 0:
            raise DimensionError(f"output dim must be even, got {self.d_out}")
        for name in ("token_table", "head_W", "head_b"):
            assert_finite(getattr(self, name), f"encoder.{name}")

    @property
    def vocab_size(self) -> int:
        return self.token_table.shape[0]

    @property
    def d_embed(self) -> int:
        return self.token_table.shape[1]

    @property
    def d_out(self) -> int:
        return self.head_W.shape[0]


@dataclass
class EncoderGradients:
    grad_token_table: np.ndarray
    grad_head_W: np.ndarray
    grad_head_b: np.ndarray


def encoder_init(vocab_size: int, d_embed: int, d_out: int, rng: RngStream) -> ToyEncoderParams:
    if d_out % 2 != 0:
        raise DimensionError(f"d_out must be even, got {d_out}")
    if vocab_size < 1 or d_embed < 1:
        raise ValueError("vocab_size and d_embed must be >= 1")
    return ToyEncoderParams(
        token_table=rng.normal(0.0, INIT_STD, (vocab_size, d_embed)),
        head_W=rng.normal(0.0, INIT_STD, (d_out, d_embed)),
        head_b=np.zeros(d_out),
    )


def _check_tokens(p: ToyEncoderParams, toks: Sequence[int]) -> np.ndarray:
    t = np.asarray(toks, dtype=np.int64)
    if t.ndim != 1 or t.size == 0:
        raise DataIntegrityError("token sequence must be non-empty")
    if t.min() < 0 or t.max() >= p.vocab_size:
        raise DataIntegrityError(
            f"token id out of range [0, {p.vocab_size}): {t[(t < 0) | (t >= p.vocab_size)][0]}"
        )
    return t


def encode(p: ToyEncoderParams, toks: Sequence[int]) -> np.ndarray:
    """Bag-of-tokens embedding: head over the mean token vector."""
    t = _check_tokens(p, toks)
    mean = p.token_table[t].mean(axis=0)
    return p.head_W @ mean + p.head_b


def encode_batch(p: ToyEncoderParams, tok_seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Returns (H, means): stacked embeddings and the pooled token means
    (means are reused by the backward pass)."""
    means = np.stack([p.token_table[_check_tokens(p, t)].mean(axis=0) for t in tok_seqs])
    h = means @ p.head_W.T + p.head_b
    return h, means


def encode_backward(p: ToyEncoderParams, toks: Sequence[int], grad_h: np.ndarray) -> EncoderGradients:
    """Exact gradients; only rows of tokens actually present receive mass."""
    t = _check_tokens(p, toks)
    grad_h = np.asarray(grad_h, dtype=np.float64)
    if grad_h.shape != (p.d_out,):
        raise DimensionError(f"grad_h shape {grad_h.shape}, expected ({p.d_out},)")
    mean = p.token_table[t].mean(axis=0)
    grad_table = np.zeros_like(p.token_table)
    grad_mean = p.head_W.T @ grad_h
    np.add.at(grad_table, t, grad_mean / t.size)
    return EncoderGradients(
        grad_token_table=grad_table,
        grad_head_W=np.outer(grad_h, mean),
        grad_head_b=grad_h.copy(),
    )


def encode_backward_batch(
    p: ToyEncoderParams,
    tok_seqs: Sequence[Sequence[int]],
    means: np.ndarray,
    grad_H: np.ndarray,
) -> EncoderGradients:
    grad_H = np.asarray(grad_H, dtype=np.float64)
    grad_table = np.zeros_like(p.token_table)
    grad_means = grad_H @ p.head_W
    for i, toks in enumerate(tok_seqs):
        t = np.asarray(toks, dtype=np.int64)
        np.add.at(grad_table, t, grad_means[i] / t.size)
    return EncoderGradients(
        grad_token_table=grad_table,
        grad_head_W=grad_H.T @ means,
        grad_head_b=grad_H.sum(axis=0),
    )


@dataclass
class EmbeddingTable:
    """Externally computed embeddings plus their per-row labels."""

    data: np.ndarray  # (rows, dim) float32
    labels: list[dict] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise DimensionError("embedding table must be 2-D")
        if self.data.shape[1] % 2 != 0:
            raise EmbfFormatError(f"table dim must be even, got {self.data.shape[1]}")
        if self.labels is not None and len(self.labels) != self.data.shape[0]:
            raise EmbfFormatError(
                f"labels rows ({len(self.labels)}) != table rows ({self.data.shape[0]})"
            )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def load_external_embeddings(path: str | Path) -> EmbeddingTable:
    """Read an EMBF table; the float32 payload round-trips bit-exactly and is
    widened to float64 downstream (widening is exact)."""
    data = embf.read_array(path)
    if data.shape[1] % 2 != 0:
        raise EmbfFormatError(f"{path}: embedding dim must be even, got {data.shape[1]}")
    labels = None
    if embf.labels_sidecar_path(path).exists():
        labels = embf.read_labels(path)
        if len(labels) != data.shape[0]:
            raise EmbfFormatError(
                f"{path}: sidecar has {len(labels)} rows, table has {data.shape[0]}"
            )
    return EmbeddingTable(data=data, labels=labels)


def write_external_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    embf.write_array(path, table.data)
    if table.labels is not None:
        embf.write_labels(path, table.labels)
