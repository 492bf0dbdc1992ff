"""Synthetic review corpus with controlled aspect/polarity/intensity structure.

Each sentence is one aspect anchor token, `intensity` sentiment tokens of the
sentence's polarity at the matching intensity grade, and a Poisson number of
filler tokens. Aspect and polarity persist across adjacent sentences with
configurable probability so context windows have same-aspect neighbours to
extend over. Every token carries a fixed surface length (characters) so text
length varies independently of sentiment mass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .masking import POLARITIES
from .numerics import RngStream

DEFAULT_ASPECTS = ("taste", "service", "price", "ambience", "parking", "portion")
INTENSITY_GRADES = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class GeneratorConfig:
    n_reviews: int = 1000
    n_aspects: int = 6
    sentences_per_review: tuple[int, int] = (2, 6)
    intensity_dist: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    filler_rate: float = 2.0
    neutral_prob: float = 0.1
    aspect_persistence: float = 0.4
    polarity_persistence: float = 0.9
    anchors_per_aspect: int = 2
    sentiment_tokens_per_grade: int = 2
    n_filler_tokens: int = 40

    def __post_init__(self):
        if self.n_reviews < 1:
            raise ConfigError("n_reviews must be >= 1")
        if self.n_aspects < 1:
            raise ConfigError("n_aspects must be >= 1")
        lo, hi = self.sentences_per_review
        if not (1 <= lo <= hi):
            raise ConfigError(f"bad sentences_per_review range: {self.sentences_per_review}")
        if len(self.intensity_dist) != len(INTENSITY_GRADES):
            raise ConfigError("intensity_dist needs one probability per grade 1..5")
        if abs(sum(self.intensity_dist) - 1.0) > 1e-9 or min(self.intensity_dist) < 0:
            raise ConfigError("intensity_dist must be a probability vector")
        if self.filler_rate < 0:
            raise ConfigError("filler_rate must be >= 0")
        if not 0.0 <= self.neutral_prob <= 1.0:
            raise ConfigError("neutral_prob must be in [0, 1]")
        if self.anchors_per_aspect < 1 or self.sentiment_tokens_per_grade < 1:
            raise ConfigError("anchor/sentiment pool sizes must be >= 1")
        if self.n_filler_tokens < 1:
            raise ConfigError("n_filler_tokens must be >= 1")

    def aspect_names(self) -> tuple[str, ...]:
        names = list(DEFAULT_ASPECTS[: self.n_aspects])
        names += [f"aspect{i}" for i in range(len(names), self.n_aspects)]
        return tuple(names)


@dataclass
class Lexicon:
    """Token-id pools: per-aspect anchors, per-polarity graded sentiment
    tokens, shared filler, plus each token's surface length in characters."""

    aspect_anchors: dict[str, tuple[int, ...]]
    sentiment: dict[str, dict[int, tuple[int, ...]]]
    filler: tuple[int, ...]
    surface_len: np.ndarray

    def __post_init__(self):
        seen: set[int] = set()
        for aspect, toks in self.aspect_anchors.items():
            overlap = seen & set(toks)
            if overlap:
                raise ConfigError(f"anchor sets overlap at tokens {sorted(overlap)}")
            seen |= set(toks)
        self.anchor_aspect = {
            t: a for a, toks in self.aspect_anchors.items() for t in toks
        }

    @property
    def vocab_size(self) -> int:
        return int(self.surface_len.size)


def build_lexicon(cfg: GeneratorConfig, rng: RngStream) -> Lexicon:
    """Deterministic id layout: anchors first (aspect-major), then sentiment
    tokens (polarity-major, grade-minor), then filler."""
    names = cfg.aspect_names()
    next_id = 0
    anchors: dict[str, tuple[int, ...]] = {}
    for a in names:
        anchors[a] = tuple(range(next_id, next_id + cfg.anchors_per_aspect))
        next_id += cfg.anchors_per_aspect
    sentiment: dict[str, dict[int, tuple[int, ...]]] = {}
    for pol in POLARITIES:
        grades = {}
        for g in INTENSITY_GRADES:
            grades[g] = tuple(range(next_id, next_id + cfg.sentiment_tokens_per_grade))
            next_id += cfg.sentiment_tokens_per_grade
        sentiment[pol] = grades
    filler = tuple(range(next_id, next_id + cfg.n_filler_tokens))
    next_id += cfg.n_filler_tokens
    surface = rng.integers(2, 9, next_id).astype(np.int64)
    return Lexicon(
        aspect_anchors=anchors,
        sentiment=sentiment,
        filler=filler,
        surface_len=surface,
    )


@dataclass
class SentenceTruth:
    aspect: str
    polarity: str
    intensity: int
    filler_count: int | None = None


@dataclass
class SyntheticReview:
    review_id: int
    sentences: list[list[int]] = field(default_factory=list)
    truth: list[SentenceTruth] = field(default_factory=list)


def generate_corpus(cfg: GeneratorConfig, lex: Lexicon, rng: RngStream) -> list[SyntheticReview]:
    names = cfg.aspect_names()
    pol_probs = _polarity_probs(cfg)
    grades = np.asarray(INTENSITY_GRADES)
    reviews = []
    for rid in range(cfg.n_reviews):
        lo, hi = cfg.sentences_per_review
        n_sent = int(rng.integers(lo, hi + 1))
        sentences = []
        truth = []
        aspect = None
        polarity = None
        for _ in range(n_sent):
            if aspect is None or rng.random() >= cfg.aspect_persistence:
                aspect = str(rng.choice(names))
                polarity = str(rng.choice(POLARITIES, p=pol_probs))
            elif rng.random() >= cfg.polarity_persistence:
                polarity = str(rng.choice(POLARITIES, p=pol_probs))
            intensity = int(rng.choice(grades, p=cfg.intensity_dist))
            n_filler = int(rng.poisson(cfg.filler_rate))
            toks = [int(rng.choice(lex.aspect_anchors[aspect]))]
            toks += [
                int(rng.choice(lex.sentiment[polarity][intensity]))
                for _ in range(intensity)
            ]
            toks += [int(rng.choice(lex.filler)) for _ in range(n_filler)]
            sentences.append(toks)
            truth.append(
                SentenceTruth(
                    aspect=aspect,
                    polarity=polarity,
                    intensity=intensity,
                    filler_count=n_filler,
                )
            )
        reviews.append(SyntheticReview(review_id=rid, sentences=sentences, truth=truth))
    return reviews


def _polarity_probs(cfg: GeneratorConfig) -> np.ndarray:
    rest = (1.0 - cfg.neutral_prob) / 2.0
    return np.array([rest, rest, cfg.neutral_prob])  # pos, neg, neu


def text_len_of(tokens: list[int], lex: Lexicon) -> int:
    """Simulated character length of a token span."""
    return int(lex.surface_len[np.asarray(tokens, dtype=np.int64)].sum())


def write_corpus_jsonl(reviews: list[SyntheticReview], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reviews:
            obj = {
                "id": r.review_id,
                "sentences": r.sentences,
                "labels": [
                    {"aspect": t.aspect, "polarity": t.polarity, "intensity": t.intensity}
                    for t in r.truth
                ],
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def read_corpus_jsonl(path: str | Path) -> list[SyntheticReview]:
    reviews = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            truth = [
                SentenceTruth(
                    aspect=lbl["aspect"],
                    polarity=lbl["polarity"],
                    intensity=int(lbl["intensity"]),
                )
                for lbl in obj["labels"]
            ]
            reviews.append(
                SyntheticReview(
                    review_id=int(obj["id"]),
                    sentences=[[int(t) for t in s] for s in obj["sentences"]],
                    truth=truth,
                )
            )
    return reviews
