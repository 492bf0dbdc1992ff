"""Anti-collision mask construction and triplet-to-pair unrolling.

The semantic label of an item is its (aspect, polarity) pair. The mask M has
M[i, j] = 1 exactly when items i and j share that label; masked pairs are
removed from in-batch-negative denominators so same-label items are never
repelled. The designated positive of an anchor is exempted downstream (it
must appear in the denominator for the softmax to be well-posed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataIntegrityError

POLARITIES = ("pos", "neg", "neu")

ROLE_QUERY = "query"
ROLE_POSITIVE = "positive"
ROLE_NEGATIVE = "negative"
ROLES = (ROLE_QUERY, ROLE_POSITIVE, ROLE_NEGATIVE)


@dataclass(frozen=True)
class SemanticLabel:
    aspect: str
    polarity: str

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise DataIntegrityError(
                f"polarity {self.polarity!r} not one of {POLARITIES}"
            )


@dataclass
class PairIndex:
    anchor: int
    positive: int
    negatives: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.positive == self.anchor:
            raise DataIntegrityError("positive index equals anchor index")
        overlap = set(self.negatives) & {self.anchor, self.positive}
        if overlap:
            raise DataIntegrityError(f"negatives overlap anchor/positive: {overlap}")


def build_anticollision_mask(labels: list[SemanticLabel]) -> np.ndarray:
    """N x N uint8 matrix, 1 where both aspect and polarity match. Symmetric
    with an all-ones diagonal."""
    if len(labels) < 1:
        raise ValueError("need at least one label")
    key_ids: dict[tuple[str, str], int] = {}
    ids = np.empty(len(labels), dtype=np.int64)
    for i, lbl in enumerate(labels):
        ids[i] = key_ids.setdefault((lbl.aspect, lbl.polarity), len(key_ids))
    return (ids[:, None] == ids[None, :]).astype(np.uint8)


def identity_mask(n: int) -> np.ndarray:
    """Mask for the no-mask ablation: only self-pairs are excluded."""
    return np.eye(n, dtype=np.uint8)


def build_pair_index(
    labels: list[SemanticLabel], roles: list[tuple[int, str]]
) -> list[PairIndex]:
    """Turn per-item (triplet_id, role) annotations into anchor pair indices.

    Each triplet must contribute exactly one query, one positive and at least
    one negative; all members share the aspect, the positive shares the
    query's polarity, negatives oppose it. Violations raise
    DataIntegrityError naming the triplet.
    """
    if len(labels) != len(roles):
        raise DataIntegrityError(
            f"labels/roles length mismatch: {len(labels)} vs {len(roles)}"
        )
    groups: dict[int, dict[str, list[int]]] = {}
    for i, (tid, role) in enumerate(roles):
        if role not in ROLES:
            raise DataIntegrityError(f"unknown role {role!r} at item {i}")
        groups.setdefault(tid, {r: [] for r in ROLES})[role].append(i)

    pairs = []
    for tid in sorted(groups):
        g = groups[tid]
        if len(g[ROLE_QUERY]) != 1 or len(g[ROLE_POSITIVE]) != 1:
            raise DataIntegrityError(
                f"triplet {tid}: needs exactly one query and one positive"
            )
        if not g[ROLE_NEGATIVE]:
            raise DataIntegrityError(f"triplet {tid}: needs at least one negative")
        q = g[ROLE_QUERY][0]
        p = g[ROLE_POSITIVE][0]
        negs = sorted(g[ROLE_NEGATIVE])
        aspect = labels[q].aspect
        for i in (p, *negs):
            if labels[i].aspect != aspect:
                raise DataIntegrityError(
                    f"triplet {tid}: member {i} has aspect {labels[i].aspect!r}, "
                    f"query has {aspect!r}"
                )
        if labels[p].polarity != labels[q].polarity:
            raise DataIntegrityError(
                f"triplet {tid}: positive polarity {labels[p].polarity!r} differs "
                f"from query {labels[q].polarity!r}"
            )
        for i in negs:
            if labels[i].polarity == labels[q].polarity:
                raise DataIntegrityError(
                    f"triplet {tid}: negative {i} shares the query polarity"
                )
        pairs.append(PairIndex(anchor=q, positive=p, negatives=negs))
    pairs.sort(key=lambda pr: pr.anchor)
    return pairs
