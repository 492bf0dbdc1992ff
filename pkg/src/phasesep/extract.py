"""Context-aware extraction: TF-IDF anchor scoring, dynamic-window context
blocks, and hybrid triplet generation."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datagen import Lexicon, SyntheticReview, text_len_of
from .errors import ConfigError, DataIntegrityError
from .masking import POLARITIES, SemanticLabel
from .numerics import RngStream

STRATEGY_STANDARD = "standard"
STRATEGY_MULTI_POSITIVE = "multi_positive"
STRATEGY_HARD_MINED = "hard_mined"
STRATEGIES = (STRATEGY_STANDARD, STRATEGY_MULTI_POSITIVE, STRATEGY_HARD_MINED)


def tfidf_scores(sentences: Sequence[Sequence[int]]) -> dict[int, float]:
    """Corpus-level keyword score per token: max over documents of
    tf(t, doc) * idf(t), with idf(t) = ln((1+N)/(1+df(t))) + 1.

    The document unit is the sentence; anchors are sentence-local.
    """
    n_docs = len(sentences)
    if n_docs < 1:
        raise ValueError("tfidf needs at least one document")
    df: Counter[int] = Counter()
    max_tf: dict[int, int] = {}
    for sent in sentences:
        counts = Counter(sent)
        for tok, tf in counts.items():
            df[tok] += 1
            if tf > max_tf.get(tok, 0):
                max_tf[tok] = tf
    scores = {}
    for tok, tf in max_tf.items():
        idf = np.log((1.0 + n_docs) / (1.0 + df[tok])) + 1.0
        scores[tok] = float(tf * idf)
    return scores


def top_k_keywords(scores: dict[int, float], k: int) -> set[int]:
    """Top-k tokens by score; ties broken by token id for determinism."""
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return {tok for tok, _ in ranked[:k]}


@dataclass
class ContextBlock:
    tokens: list[int]
    anchor_position: int
    window_sentences: int
    label: SemanticLabel
    source_review: int
    text_len: int
    intensity: int | None = None
    row: int | None = None  # set when the block references an external embedding row

    def __post_init__(self):
        if self.window_sentences not in (2, 3, 4):
            raise DataIntegrityError(
                f"window_sentences must be in {{2,3,4}}, got {self.window_sentences}"
            )


def window_for_segment(n_tokens: int) -> int:
    """Window size rule: shorter anchor segments get more surrounding
    sentences (< 20 tokens -> 4, 20..60 -> 3, > 60 -> 2)."""
    if n_tokens < 20:
        return 4
    if n_tokens <= 60:
        return 3
    return 2


def _find_anchor(sentence: Sequence[int], lex: Lexicon, keywords: set[int]):
    """First lexicon anchor in the sentence; lexicon hits take precedence
    over TF-IDF keyword hits."""
    for pos, tok in enumerate(sentence):
        if tok in lex.anchor_aspect:
            return pos, tok
    for pos, tok in enumerate(sentence):
        if tok in keywords:
            return pos, tok
    return None


def extract_context_blocks(
    review: SyntheticReview,
    lex: Lexicon,
    scores: dict[int, float],
    k: int = 24,
) -> list[ContextBlock]:
    """One block per anchored sentence: the anchor sentence plus up to its
    window of surrounding sentences, stopping at any sentence of a different
    aspect so no foreign sentiment leaks in. A review with no anchor yields
    an empty list.
    """
    keywords = top_k_keywords(scores, k)
    blocks = []
    n = len(review.sentences)
    for si, sent in enumerate(review.sentences):
        hit = _find_anchor(sent, lex, keywords)
        if hit is None:
            continue
        anchor_pos, anchor_tok = hit
        truth = review.truth[si]
        aspect = lex.anchor_aspect.get(anchor_tok, truth.aspect)
        w = window_for_segment(len(sent))
        before = w // 2
        after = w - before
        lo = si
        for j in range(si - 1, max(-1, si - 1 - before), -1):
            if review.truth[j].aspect != aspect:
                break
            lo = j
        hi = si
        for j in range(si + 1, min(n, si + 1 + after)):
            if review.truth[j].aspect != aspect:
                break
            hi = j
        tokens: list[int] = []
        anchor_in_block = 0
        for j in range(lo, hi + 1):
            if j == si:
                anchor_in_block = len(tokens) + anchor_pos
            tokens.extend(review.sentences[j])
        blocks.append(
            ContextBlock(
                tokens=tokens,
                anchor_position=anchor_in_block,
                window_sentences=w,
                label=SemanticLabel(aspect=aspect, polarity=truth.polarity),
                source_review=review.review_id,
                text_len=text_len_of(tokens, lex),
                intensity=truth.intensity,
            )
        )
    return blocks


def extract_all(
    reviews: Sequence[SyntheticReview], lex: Lexicon, k: int = 24
) -> list[ContextBlock]:
    """Corpus-level TF-IDF, then per-review extraction in canonical order."""
    all_sentences = [s for r in reviews for s in r.sentences]
    scores = tfidf_scores(all_sentences)
    blocks = []
    for r in reviews:
        blocks.extend(extract_context_blocks(r, lex, scores, k))
    return blocks


@dataclass(frozen=True)
class TripletConfig:
    n_triplets: int = 3000
    mix: tuple[float, float, float] = (0.70, 0.15, 0.15)  # standard, multi, hard
    seq_cap: int = 192
    fuse_range: tuple[int, int] = (2, 3)

    def __post_init__(self):
        if self.n_triplets < 1:
            raise ConfigError("n_triplets must be >= 1")
        if len(self.mix) != 3 or min(self.mix) < 0 or abs(sum(self.mix) - 1.0) > 1e-9:
            raise ConfigError("mix must be 3 non-negative proportions summing to 1")
        if self.seq_cap < 1:
            raise ConfigError("seq_cap must be >= 1")
        lo, hi = self.fuse_range
        if not (2 <= lo <= hi):
            raise ConfigError("fuse_range must satisfy 2 <= lo <= hi")


@dataclass
class Triplet:
    query: ContextBlock
    positive: ContextBlock
    negatives: list[ContextBlock]
    strategy: str


def _allocate_counts(n: int, mix: tuple[float, float, float]) -> list[int]:
    """Largest-remainder allocation: counts per strategy within +-1 of n*mix."""
    raw = [n * m for m in mix]
    counts = [int(np.floor(r)) for r in raw]
    remainder = n - sum(counts)
    order = sorted(range(3), key=lambda i: (raw[i] - counts[i], -i), reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def _jaccard(a: Sequence[int], b: Sequence[int]) -> float:
    sa, sb = set(a), set(b)
    union = len(sa | sb)
    return len(sa & sb) / union if union else 1.0


def _fuse_blocks(members: list[ContextBlock], cap: int, lex: Lexicon | None) -> ContextBlock:
    """Concatenate same-polarity blocks into one augmented block, keeping the
    anchor-bearing head and truncating to the sequence cap."""
    tokens: list[int] = []
    for b in members:
        tokens.extend(b.tokens)
    tokens = tokens[:cap]
    head = members[0]
    text_len = (
        text_len_of(tokens, lex)
        if lex is not None
        else sum(b.text_len for b in members)
    )
    return ContextBlock(
        tokens=tokens,
        anchor_position=min(head.anchor_position, len(tokens) - 1),
        window_sentences=head.window_sentences,
        label=head.label,
        source_review=head.source_review,
        text_len=text_len,
        intensity=head.intensity,
    )


def generate_triplets(
    blocks: Sequence[ContextBlock],
    cfg: TripletConfig,
    rng: RngStream,
    lex: Lexicon | None = None,
) -> tuple[list[Triplet], list[dict]]:
    """Hybrid triplet generation over extracted blocks.

    standard: one sampled positive (same aspect and polarity) and one sampled
    negative (same aspect, different polarity). multi_positive: fused
    positive and symmetric fused negative from 2..3 same-polarity blocks.
    hard_mined: the positive minimizing token-set Jaccard overlap with the
    query. Strategies short of candidates are skipped with a warning record.
    """
    by_label: dict[tuple[str, str], list[int]] = {}
    by_aspect: dict[str, list[int]] = {}
    for i, b in enumerate(blocks):
        by_label.setdefault((b.label.aspect, b.label.polarity), []).append(i)
        by_aspect.setdefault(b.label.aspect, []).append(i)

    def positives_of(i: int) -> list[int]:
        b = blocks[i]
        return [j for j in by_label[(b.label.aspect, b.label.polarity)] if j != i]

    def negatives_of(i: int) -> list[int]:
        b = blocks[i]
        return [
            j
            for j in by_aspect[b.label.aspect]
            if blocks[j].label.polarity != b.label.polarity
        ]

    eligible = [i for i in range(len(blocks)) if positives_of(i) and negatives_of(i)]
    if not eligible:
        raise DataIntegrityError(
            "no block has both a same-label positive and an opposite-polarity "
            "negative within its aspect"
        )
    counts = _allocate_counts(cfg.n_triplets, cfg.mix)
    warnings: list[dict] = []
    triplets: list[Triplet] = []
    for strategy, count in zip(STRATEGIES, counts):
        for _ in range(count):
            q = int(rng.choice(eligible))
            pos_cands = positives_of(q)
            neg_cands = negatives_of(q)
            if strategy == STRATEGY_STANDARD:
                pos = blocks[int(rng.choice(pos_cands))]
                neg = blocks[int(rng.choice(neg_cands))]
            elif strategy == STRATEGY_MULTI_POSITIVE:
                lo, hi = cfg.fuse_range
                if len(pos_cands) < lo or len(neg_cands) < lo:
                    warnings.append(
                        {
                            "strategy": strategy,
                            "query": q,
                            "reason": f"needs >= {lo} positive and negative candidates",
                        }
                    )
                    continue
                m = int(rng.integers(lo, min(hi, len(pos_cands)) + 1))
                mn = int(rng.integers(lo, min(hi, len(neg_cands)) + 1))
                pos_members = [blocks[int(j)] for j in rng.choice(pos_cands, size=m, replace=False)]
                neg_members = [blocks[int(j)] for j in rng.choice(neg_cands, size=mn, replace=False)]
                pos = _fuse_blocks(pos_members, cfg.seq_cap, lex)
                neg = _fuse_blocks(neg_members, cfg.seq_cap, lex)
            else:  # hard mining: lowest lexical overlap positive
                overlaps = [( _jaccard(blocks[q].tokens, blocks[j].tokens), j) for j in pos_cands]
                overlaps.sort(key=lambda t: (t[0], t[1]))
                pos = blocks[overlaps[0][1]]
                neg = blocks[int(rng.choice(neg_cands))]
            triplets.append(
                Triplet(query=blocks[q], positive=pos, negatives=[neg], strategy=strategy)
            )
    validate_triplets(triplets)
    return triplets, warnings


def validate_triplets(triplets: Sequence[Triplet]) -> None:
    """Exhaustive structural check run on every generation pass."""
    for t_idx, t in enumerate(triplets):
        if t.strategy not in STRATEGIES:
            raise DataIntegrityError(f"triplet {t_idx}: unknown strategy {t.strategy!r}")
        aspect = t.query.label.aspect
        if t.positive.label.aspect != aspect or any(
            n.label.aspect != aspect for n in t.negatives
        ):
            raise DataIntegrityError(f"triplet {t_idx}: members span multiple aspects")
        if t.positive.label.polarity != t.query.label.polarity:
            raise DataIntegrityError(f"triplet {t_idx}: positive polarity differs from query")
        if not t.negatives:
            raise DataIntegrityError(f"triplet {t_idx}: no negatives")
        for n in t.negatives:
            if n.label.polarity == t.query.label.polarity:
                raise DataIntegrityError(f"triplet {t_idx}: negative shares query polarity")


def _block_to_json(b: ContextBlock) -> dict:
    return {
        "tokens": list(map(int, b.tokens)),
        "aspect": b.label.aspect,
        "polarity": b.label.polarity,
        "window": int(b.window_sentences),
        "text_len": int(b.text_len),
    }


def _block_from_json(obj: dict) -> ContextBlock:
    return ContextBlock(
        tokens=[int(t) for t in obj["tokens"]],
        anchor_position=0,
        window_sentences=int(obj["window"]),
        label=SemanticLabel(aspect=obj["aspect"], polarity=obj["polarity"]),
        source_review=-1,
        text_len=int(obj["text_len"]),
    )


def write_triplets_jsonl(triplets: Sequence[Triplet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            obj = {
                "query": _block_to_json(t.query),
                "positive": _block_to_json(t.positive),
                "negatives": [_block_to_json(n) for n in t.negatives],
                "strategy": t.strategy,
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_triplets_jsonl(path: str | Path) -> list[Triplet]:
    triplets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            triplets.append(
                Triplet(
                    query=_block_from_json(obj["query"]),
                    positive=_block_from_json(obj["positive"]),
                    negatives=[_block_from_json(n) for n in obj["negatives"]],
                    strategy=obj["strategy"],
                )
            )
    validate_triplets(triplets)
    return triplets


def row_triplets(labels: list[dict], n_triplets: int, rng: RngStream) -> list[Triplet]:
    """Standard-strategy triplets over external embedding rows, grouped by the
    sidecar (aspect, polarity) labels. Hard mining needs tokens, so only the
    standard strategy applies to frozen embeddings."""
    blocks = []
    for i, lbl in enumerate(labels):
        if lbl["polarity"] not in POLARITIES:
            raise DataIntegrityError(f"row {i}: bad polarity {lbl['polarity']!r}")
        blocks.append(
            ContextBlock(
                tokens=[],
                anchor_position=0,
                window_sentences=2,
                label=SemanticLabel(aspect=lbl["aspect"], polarity=lbl["polarity"]),
                source_review=-1,
                text_len=int(lbl["text_len"]),
                intensity=lbl.get("intensity"),
                row=i,
            )
        )
    cfg = TripletConfig(n_triplets=n_triplets, mix=(1.0, 0.0, 0.0))
    triplets, _ = generate_triplets(blocks, cfg, rng)
    return triplets
