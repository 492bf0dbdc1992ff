"""Evaluation and geometric analysis: nearest-centroid polarity metrics,
similarity-matrix reports, gradient-landscape curves, and amplitude geometry
reports, each with CSV and SVG emitters.

Emitters are pure functions of the report objects: identical reports yield
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import svgplot
from .complexspace import ComplexEmbedding, amplitude
from .errors import EvaluationError, ReportError, UndefinedCorrelationError
from .losses import angle_gradient_magnitude, cosine_gradient_magnitude
from .masking import POLARITIES, SemanticLabel
from .numerics import StatSummary, pearson, summarize

HIST_BINS = 30


# ---------------------------------------------------------------------------
# classification metrics


@dataclass
class AspectMetrics:
    per_aspect: dict[str, dict[str, float]]  # aspect -> {"f1": ..., "acc": ...}
    macro_f1: float
    macro_acc: float
    confusion: dict[tuple[str, str, str], int]  # (aspect, true, pred) -> count


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise EvaluationError("zero-norm embedding in evaluation batch")
    return x / norms[:, None]


def evaluate_embeddings(
    ref_embs: np.ndarray,
    ref_labels: list[SemanticLabel],
    test_embs: np.ndarray,
    test_labels: list[SemanticLabel],
    method: str = "centroid",
    knn_k: int = 5,
) -> AspectMetrics:
    """Predict each test item's polarity within its aspect and score it.

    centroid: cosine similarity against the mean unit-normalized reference
    embedding per (aspect, polarity); knn: majority vote of the k nearest
    reference items of the same aspect. Ties break by the fixed polarity
    order pos < neg < neu. The polarity label space is the set of polarities
    present anywhere in the reference split; an aspect missing a reference
    class raises EvaluationError naming it.
    """
    if method not in ("centroid", "knn"):
        raise ValueError(f"unknown method {method!r}")
    ref = np.asarray(ref_embs, dtype=np.float64)
    test = np.asarray(test_embs, dtype=np.float64)
    if ref.shape[0] != len(ref_labels) or test.shape[0] != len(test_labels):
        raise EvaluationError("embedding/label count mismatch")
    uref = _unit_rows(ref)
    utest = _unit_rows(test)
    label_space = [p for p in POLARITIES if any(l.polarity == p for l in ref_labels)]
    test_aspects = sorted({l.aspect for l in test_labels})
    missing = []
    centroids: dict[tuple[str, str], np.ndarray] = {}
    ref_by_aspect: dict[str, list[int]] = {}
    for a in test_aspects:
        ref_by_aspect[a] = [i for i, l in enumerate(ref_labels) if l.aspect == a]
        for p in label_space:
            rows = [i for i in ref_by_aspect[a] if ref_labels[i].polarity == p]
            if not rows:
                missing.append((a, p))
            else:
                c = uref[rows].mean(axis=0)
                n = np.linalg.norm(c)
                centroids[(a, p)] = c / n if n > 0 else c
    if missing:
        raise EvaluationError(f"empty reference classes: {missing}")

    confusion: dict[tuple[str, str, str], int] = {}
    predictions: list[str] = []
    for i, lbl in enumerate(test_labels):
        if method == "centroid":
            best_p, best_s = None, -np.inf
            for p in label_space:
                s = float(utest[i] @ centroids[(lbl.aspect, p)])
                if s > best_s:
                    best_p, best_s = p, s
            pred = best_p
        else:
            rows = ref_by_aspect[lbl.aspect]
            sims = uref[rows] @ utest[i]
            top = np.argsort(-sims, kind="stable")[: min(knn_k, len(rows))]
            votes = {p: 0 for p in label_space}
            for j in top:
                votes[ref_labels[rows[j]].polarity] += 1
            best = max(votes.values())
            pred = next(p for p in label_space if votes[p] == best)
        predictions.append(pred)
        key = (lbl.aspect, lbl.polarity, pred)
        confusion[key] = confusion.get(key, 0) + 1

    per_aspect = {}
    for a in test_aspects:
        idx = [i for i, l in enumerate(test_labels) if l.aspect == a]
        correct = sum(1 for i in idx if predictions[i] == test_labels[i].polarity)
        f1s = []
        for p in label_space:
            tp = sum(1 for i in idx if test_labels[i].polarity == p and predictions[i] == p)
            fp = sum(1 for i in idx if test_labels[i].polarity != p and predictions[i] == p)
            fn = sum(1 for i in idx if test_labels[i].polarity == p and predictions[i] != p)
            if tp + fp + fn == 0:
                continue  # class absent from truth and predictions: skip
            f1s.append(2.0 * tp / (2.0 * tp + fp + fn))
        per_aspect[a] = {
            "f1": float(np.mean(f1s)) if f1s else 0.0,
            "acc": correct / len(idx) if idx else 0.0,
        }
    macro_f1 = float(np.mean([m["f1"] for m in per_aspect.values()]))
    macro_acc = float(np.mean([m["acc"] for m in per_aspect.values()]))
    return AspectMetrics(
        per_aspect=per_aspect, macro_f1=macro_f1, macro_acc=macro_acc, confusion=confusion
    )


def metrics_csv(metrics: AspectMetrics) -> str:
    lines = ["aspect,f1,acc"]
    for a in sorted(metrics.per_aspect):
        m = metrics.per_aspect[a]
        lines.append(f"{a},{m['f1']:.6f},{m['acc']:.6f}")
    lines.append(f"MACRO,{metrics.macro_f1:.6f},{metrics.macro_acc:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# similarity structure


@dataclass
class SimReport:
    matrix: np.ndarray  # cosine matrix, positives first then negatives
    item_ids: list[int]
    n_pos: int
    group_means: dict[str, float]  # pos_pos, neg_neg, pos_neg
    deltas: dict[str, float] | None = None  # vs a comparison report


def similarity_report(
    embs: np.ndarray,
    labels: list[SemanticLabel],
    comparison: SimReport | None = None,
    item_ids: list[int] | None = None,
) -> SimReport:
    """Cosine-similarity structure of one aspect-matched batch.

    Items must share a single aspect and include at least two positives and
    two negatives (neutral items are ignored). Group means exclude the
    diagonal; deltas against a comparison report are new minus old.
    """
    x = np.asarray(embs, dtype=np.float64)
    if len(labels) != x.shape[0]:
        raise ReportError("embedding/label count mismatch")
    aspects = {l.aspect for l in labels}
    if len(aspects) != 1:
        raise ReportError(f"similarity report needs one aspect, got {sorted(aspects)}")
    if item_ids is None:
        item_ids = list(range(x.shape[0]))
    pos = [i for i, l in enumerate(labels) if l.polarity == "pos"]
    neg = [i for i, l in enumerate(labels) if l.polarity == "neg"]
    if len(pos) < 2 or len(neg) < 2:
        raise ReportError(
            f"need >= 2 items of each polarity, got {len(pos)} pos / {len(neg)} neg"
        )
    order = pos + neg
    u = _unit_rows(x[order])
    m = u @ u.T
    np_, nn = len(pos), len(neg)
    iu_p = np.triu_indices(np_, k=1)
    iu_n = np.triu_indices(nn, k=1)
    means = {
        "pos_pos": float(m[:np_, :np_][iu_p].mean()),
        "neg_neg": float(m[np_:, np_:][iu_n].mean()),
        "pos_neg": float(m[:np_, np_:].mean()),
    }
    deltas = None
    if comparison is not None:
        deltas = {k: means[k] - comparison.group_means[k] for k in means}
    return SimReport(
        matrix=m,
        item_ids=[item_ids[i] for i in order],
        n_pos=np_,
        group_means=means,
        deltas=deltas,
    )


def similarity_csv(report: SimReport) -> str:
    lines = []
    for row in report.matrix:
        lines.append(",".join(f"{v:.6f}" for v in row))
    for k in ("pos_pos", "neg_neg", "pos_neg"):
        lines.append(f"{k},{report.group_means[k]:.6f}")
    if report.deltas is not None:
        for k in ("pos_pos", "neg_neg", "pos_neg"):
            lines.append(f"delta_{k},{report.deltas[k]:+.6f}")
    return "\n".join(lines) + "\n"


def similarity_svg(report: SimReport) -> str:
    return svgplot.heatmap(report.matrix, boundaries=[report.n_pos])


def aggregate_similarity(
    embs: np.ndarray,
    labels: list[SemanticLabel],
    n_per_side: int = 5,
) -> dict[str, float]:
    """Group means averaged over every aspect that has at least `n_per_side`
    positive and negative items (first n of each, in given order)."""
    by_aspect: dict[str, list[int]] = {}
    for i, l in enumerate(labels):
        by_aspect.setdefault(l.aspect, []).append(i)
    sums = {"pos_pos": 0.0, "neg_neg": 0.0, "pos_neg": 0.0}
    used = 0
    for a in sorted(by_aspect):
        idx = by_aspect[a]
        pos = [i for i in idx if labels[i].polarity == "pos"][:n_per_side]
        neg = [i for i in idx if labels[i].polarity == "neg"][:n_per_side]
        if len(pos) < n_per_side or len(neg) < n_per_side:
            continue
        batch = pos + neg
        rep = similarity_report(
            np.asarray(embs)[batch], [labels[i] for i in batch], item_ids=batch
        )
        for k in sums:
            sums[k] += rep.group_means[k]
        used += 1
    if used == 0:
        raise ReportError(
            f"no aspect has {n_per_side} positive and {n_per_side} negative items"
        )
    return {k: v / used for k, v in sums.items()}


def mean_aspect_amplitude_std(
    cembs: list[ComplexEmbedding], labels: list[SemanticLabel]
) -> float:
    """Mean over aspects of the within-aspect amplitude standard deviation."""
    by_aspect: dict[str, list[float]] = {}
    for c, l in zip(cembs, labels):
        by_aspect.setdefault(l.aspect, []).append(amplitude(c))
    stds = [summarize(v).std for v in by_aspect.values() if len(v) >= 2]
    if not stds:
        raise ReportError("no aspect has 2+ items for an amplitude std")
    return float(np.mean(stds))


# ---------------------------------------------------------------------------
# gradient landscape


def gradient_landscape(theta_grid: np.ndarray, tau: float) -> np.ndarray:
    """Columns (theta, |sin theta|, constant angle gradient) over the grid."""
    theta = np.asarray(theta_grid, dtype=np.float64)
    if theta.size == 0:
        raise ReportError("empty theta grid")
    if theta.min() < 0.0 or theta.max() > np.pi:
        raise ReportError("theta grid must lie within [0, pi]")
    return np.column_stack(
        [theta, cosine_gradient_magnitude(theta), angle_gradient_magnitude(theta, tau)]
    )


def landscape_csv(table: np.ndarray) -> str:
    lines = ["theta,cosine_grad,angle_grad"]
    for row in table:
        lines.append(f"{row[0]:.8f},{row[1]:.8f},{row[2]:.8f}")
    return "\n".join(lines) + "\n"


def landscape_svg(table: np.ndarray) -> str:
    return svgplot.line_chart(
        table[:, 0],
        {"cosine |sin theta|": table[:, 1], "angle (constant)": table[:, 2]},
        x_label="theta",
        y_label="gradient magnitude",
    )


# ---------------------------------------------------------------------------
# amplitude geometry


@dataclass
class AmpReport:
    per_aspect: dict[str, StatSummary]
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    pearson_text_len: float | None
    pearson_intensity: float | None
    degenerate: bool
    argmin_id: int
    argmax_id: int
    z_min: float | None
    z_max: float | None
    rows: list[dict] = field(default_factory=list)


def amplitude_report(
    cembs: list[ComplexEmbedding],
    labels: list[SemanticLabel],
    text_lens: list[int],
    intensities: list[int | None] | None = None,
    aspect_filter: str | None = None,
    item_ids: list[int] | None = None,
) -> AmpReport:
    """Amplitude geometry of a batch: per-aspect spread, histogram, the
    amplitude-vs-text-length correlation, and extreme items with z-scores.
    A zero-variance amplitude distribution takes the degenerate branch
    (no z-scores, no correlations)."""
    n = len(cembs)
    if len(labels) != n or len(text_lens) != n:
        raise ReportError("labels/text_lens must match embeddings")
    if intensities is not None and len(intensities) != n:
        raise ReportError("intensities must match embeddings")
    if item_ids is None:
        item_ids = list(range(n))
    keep = [
        i for i in range(n) if aspect_filter is None or labels[i].aspect == aspect_filter
    ]
    if len(keep) < 2:
        raise ReportError("need at least 2 items after aspect filtering")
    amps = np.array([amplitude(cembs[i]) for i in keep])
    stats = summarize(amps)
    per_aspect = {}
    for a in sorted({labels[i].aspect for i in keep}):
        per_aspect[a] = summarize([amps[j] for j, i in enumerate(keep) if labels[i].aspect == a])
    edges = np.histogram_bin_edges(amps, bins=HIST_BINS)
    counts, _ = np.histogram(amps, bins=edges)
    degenerate = stats.std == 0.0
    zs = None if degenerate else (amps - stats.mean) / stats.std
    tl = np.array([text_lens[i] for i in keep], dtype=np.float64)
    try:
        r_len = pearson(amps, tl) if not degenerate else None
    except UndefinedCorrelationError:
        r_len = None
    r_int = None
    if intensities is not None and not degenerate:
        pairs = [(amps[j], intensities[i]) for j, i in enumerate(keep) if intensities[i] is not None]
        if len(pairs) >= 2:
            try:
                r_int = pearson([p[0] for p in pairs], [p[1] for p in pairs])
            except UndefinedCorrelationError:
                r_int = None
    amin = int(np.argmin(amps))
    amax = int(np.argmax(amps))
    rows = []
    for j, i in enumerate(keep):
        rows.append(
            {
                "item_id": item_ids[i],
                "aspect": labels[i].aspect,
                "polarity": labels[i].polarity,
                "amplitude": float(amps[j]),
                "text_len": int(text_lens[i]),
                "intensity": None if intensities is None else intensities[i],
                "z": None if degenerate else float(zs[j]),
            }
        )
    return AmpReport(
        per_aspect=per_aspect,
        hist_edges=edges,
        hist_counts=counts,
        pearson_text_len=r_len,
        pearson_intensity=r_int,
        degenerate=degenerate,
        argmin_id=item_ids[keep[amin]],
        argmax_id=item_ids[keep[amax]],
        z_min=None if degenerate else float(zs[amin]),
        z_max=None if degenerate else float(zs[amax]),
        rows=rows,
    )


def amplitude_csv(report: AmpReport) -> str:
    lines = ["item_id,aspect,polarity,amplitude,text_len,intensity,z"]
    for r in report.rows:
        intensity = "" if r["intensity"] is None else str(r["intensity"])
        z = "" if r["z"] is None else f"{r['z']:.6f}"
        lines.append(
            f"{r['item_id']},{r['aspect']},{r['polarity']},"
            f"{r['amplitude']:.6f},{r['text_len']},{intensity},{z}"
        )
    return "\n".join(lines) + "\n"


def amplitude_scatter_svg(report: AmpReport) -> str:
    x = np.array([r["text_len"] for r in report.rows], dtype=np.float64)
    y = np.array([r["amplitude"] for r in report.rows], dtype=np.float64)
    ids = [r["item_id"] for r in report.rows]
    highlight = [i for i, v in enumerate(ids) if v in (report.argmin_id, report.argmax_id)]
    return svgplot.scatter(x, y, highlight=highlight, x_label="text length", y_label="amplitude")


def amplitude_hist_svg(report: AmpReport) -> str:
    return svgplot.histogram(report.hist_edges, report.hist_counts, x_label="amplitude")
