"""Batch command-line entry point.

Subcommands: gen-data, extract, train, eval, analyze {sim,amp,grad},
grad-check, ablate. Configuration comes from a JSON file validated against
CONFIG_SCHEMA before any work starts; the PHASE_SEED environment variable
overrides the config seed, and flags override both. Artifacts land in a run
directory named by config hash and seed; a lock file keeps concurrent runs
out of each other's directories.

Exit codes: 0 success, 1 validation error, 2 numeric/runtime error. Errors
are printed as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import jsonschema
import numpy as np

from . import analysis, kernels
from .certify import certify
from .complexspace import AngleMode
from .datagen import (
    GeneratorConfig,
    build_lexicon,
    generate_corpus,
    read_corpus_jsonl,
    write_corpus_jsonl,
)
from .encoder import load_external_embeddings
from .errors import ConfigError, LockError, NumericError, PhasesepError
from .extract import (
    TripletConfig,
    extract_all,
    generate_triplets,
    read_triplets_jsonl,
    row_triplets,
    write_triplets_jsonl,
)
from .losses import LossWeights, Temperatures
from .masking import SemanticLabel
from .numerics import RngStream
from .trainer import (
    Model,
    TrainConfig,
    config_hash,
    embed_blocks,
    init_frozen_model,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)

SEED_ENV = "PHASE_SEED"

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_reviews": {"type": "integer", "minimum": 1},
                "n_aspects": {"type": "integer", "minimum": 1},
                "sentences_per_review": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "intensity_dist": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 5,
                    "maxItems": 5,
                },
                "filler_rate": {"type": "number", "minimum": 0},
                "neutral_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "aspect_persistence": {"type": "number", "minimum": 0, "maximum": 1},
                "polarity_persistence": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "extract": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_triplets": {"type": "integer", "minimum": 1},
                "mix": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "seq_cap": {"type": "integer", "minimum": 1},
                "top_k": {"type": "integer", "minimum": 1},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 2},
                "grad_accum_steps": {"type": "integer", "minimum": 1},
                "peak_lr": {"type": "number", "exclusiveMinimum": 0},
                "warmup_steps": {"type": ["integer", "null"], "minimum": 0},
                "w_ibn": {"type": "number", "minimum": 0},
                "w_angle": {"type": "number", "minimum": 0},
                "w_cos": {"type": "number", "minimum": 0},
                "w_amp": {"type": "number", "minimum": 0},
                "tau_ibn": {"type": "number", "exclusiveMinimum": 0},
                "tau_angle": {"type": "number", "exclusiveMinimum": 0},
                "tau_cos": {"type": "number", "exclusiveMinimum": 0},
                "projection": {"enum": ["zrcp", "hard"]},
                "angle_mode": {"enum": ["exact", "surrogate"]},
                "paper_literal_sign": {"type": "boolean"},
                "bias_outside": {"type": "boolean"},
                "mask": {"type": "boolean"},
                "weight_decay": {"type": "number", "minimum": 0},
                "d_embed": {"type": "integer", "minimum": 1},
                "d_out": {"type": "integer", "minimum": 2},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ref_frac": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "method": {"enum": ["centroid", "knn"]},
                "knn_k": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so flag errors become exit code 1 with a
    JSON diagnostic."""

    def error(self, message):
        raise ConfigError(message)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    return cfg


def resolve_seed(args, config: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return int(config.get("seed", 0))


def data_config(config: dict) -> GeneratorConfig:
    section = dict(config.get("data", {}))
    if "sentences_per_review" in section:
        section["sentences_per_review"] = tuple(section["sentences_per_review"])
    if "intensity_dist" in section:
        section["intensity_dist"] = tuple(section["intensity_dist"])
    return GeneratorConfig(**section)


def triplet_config(config: dict, args=None) -> tuple[TripletConfig, int]:
    section = dict(config.get("extract", {}))
    top_k = section.pop("top_k", 24)
    if args is not None and getattr(args, "n_triplets", None) is not None:
        section["n_triplets"] = args.n_triplets
    if "mix" in section:
        section["mix"] = tuple(section["mix"])
    return TripletConfig(**section), top_k


def train_config(config: dict, args, seed: int) -> TrainConfig:
    t = dict(config.get("train", {}))
    weights = LossWeights(
        w_ibn=t.pop("w_ibn", 1.0),
        w_angle=t.pop("w_angle", 1.0),
        w_cos=t.pop("w_cos", 1.0),
        w_amp=t.pop("w_amp", 0.0),
    )
    temps = Temperatures(
        tau_ibn=t.pop("tau_ibn", 20.0),
        tau_angle=t.pop("tau_angle", 20.0),
        tau_cos=t.pop("tau_cos", 20.0),
    )
    mask = t.pop("mask", True)
    angle_mode = t.pop("angle_mode", "exact")
    cfg = TrainConfig(
        weights=weights,
        temps=temps,
        mask_enabled=mask,
        angle_mode=AngleMode(angle_mode),
        seed=seed,
        **t,
    )
    # flag overrides, strongest precedence
    updates = {}
    wt = {}
    tp = {}
    for name in ("w_ibn", "w_angle", "w_cos", "w_amp"):
        v = getattr(args, name, None)
        if v is not None:
            wt[name] = v
    if wt:
        updates["weights"] = dataclasses.replace(cfg.weights, **wt)
    for name in ("tau_ibn", "tau_angle", "tau_cos"):
        v = getattr(args, name, None)
        if v is not None:
            tp[name] = v
    if tp:
        updates["temps"] = dataclasses.replace(cfg.temps, **tp)
    if getattr(args, "projection", None) is not None:
        updates["projection"] = args.projection
    if getattr(args, "mask", None) is not None:
        updates["mask_enabled"] = args.mask == "on"
    if getattr(args, "angle_mode", None) is not None:
        updates["angle_mode"] = AngleMode(args.angle_mode)
    if getattr(args, "paper_literal_sign", False):
        updates["paper_literal_sign"] = True
    for name in ("epochs", "batch_size", "grad_accum_steps", "peak_lr", "warmup_steps"):
        v = getattr(args, name, None)
        if v is not None:
            updates[name] = v
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg


@contextmanager
def run_directory(base_out: str, cfg_dict: dict, seed: int):
    h = config_hash(cfg_dict)
    run_dir = Path(base_out) / f"{h}-s{seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = run_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"run directory locked: {run_dir}")
    try:
        yield run_dir
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    gcfg = data_config(config)
    if args.n_reviews is not None:
        gcfg = dataclasses.replace(gcfg, n_reviews=args.n_reviews)
    rng = RngStream(seed)
    lex_rng, corpus_rng = rng.split(2)
    lex = build_lexicon(gcfg, lex_rng)
    reviews = generate_corpus(gcfg, lex, corpus_rng)
    write_corpus_jsonl(reviews, args.out)
    print(
        json.dumps(
            {
                "subcommand": "gen-data",
                "out": str(args.out),
                "reviews": len(reviews),
                "sentences": sum(len(r.sentences) for r in reviews),
                "vocab_size": lex.vocab_size,
                "seed": seed,
            }
        )
    )
    return 0


def _lexicon_for(config: dict, seed: int):
    """gen-data and the downstream stages must share the data config and
    seed so the lexicon (ids and surface lengths) matches the corpus."""
    gcfg = data_config(config)
    lex_rng, _ = RngStream(seed).split(2)
    return gcfg, build_lexicon(gcfg, lex_rng)


def cmd_extract(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    _, lex = _lexicon_for(config, seed)
    tcfg, top_k = triplet_config(config, args)
    reviews = read_corpus_jsonl(args.corpus)
    blocks = extract_all(reviews, lex, k=top_k)
    rng = RngStream(seed).split(3)[2]
    triplets, warnings = generate_triplets(blocks, tcfg, rng, lex=lex)
    write_triplets_jsonl(triplets, args.out)
    print(
        json.dumps(
            {
                "subcommand": "extract",
                "out": str(args.out),
                "blocks": len(blocks),
                "triplets": len(triplets),
                "warnings": len(warnings),
                "seed": seed,
            }
        )
    )
    return 0


def _full_cli_config(config: dict, tcfg: TrainConfig) -> dict:
    merged = dict(config)
    merged["train_resolved"] = tcfg.to_json_dict()
    return merged


def cmd_train(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    tcfg = train_config(config, args, seed)
    if args.frozen_embeddings:
        table = load_external_embeddings(args.frozen_embeddings)
        if table.labels is None:
            raise ConfigError("frozen embeddings need a labels sidecar to form triplets")
        tcfg = dataclasses.replace(tcfg, d_out=table.dim)
        model = init_frozen_model(tcfg, table)
        ext_cfg, _ = triplet_config(config, args)
        triplets = row_triplets(table.labels, ext_cfg.n_triplets, RngStream(seed).split(4)[3])
    else:
        if not args.triplets:
            raise ConfigError("train needs --triplets (or --frozen-embeddings)")
        _, lex = _lexicon_for(config, seed)
        triplets = read_triplets_jsonl(args.triplets)
        model = init_model(tcfg, lex.vocab_size, RngStream(seed).split(4)[3])
    with run_directory(args.out, _full_cli_config(config, tcfg), seed) as run_dir:
        model, history = train(model, triplets, tcfg)
        ckpt = save_checkpoint(model, tcfg, run_dir / "checkpoint", history=history)
    print(
        json.dumps(
            {
                "subcommand": "train",
                "checkpoint": str(ckpt),
                "updates": len(history),
                "final": history[-1] if history else None,
                "seed": seed,
            }
        )
    )
    return 0


def _eval_blocks(config: dict, seed: int, corpus_path: str):
    _, lex = _lexicon_for(config, seed)
    _, top_k = triplet_config(config)
    reviews = read_corpus_jsonl(corpus_path)
    return extract_all(reviews, lex, k=top_k)


def _split_ref_test(n: int, ref_frac: float, seed: int):
    order = RngStream(seed ^ 0x5EED).permutation(n)
    n_ref = max(1, int(round(ref_frac * n)))
    return order[:n_ref], order[n_ref:]


def _evaluate_checkpoint(model: Model, blocks, config: dict, seed: int):
    esec = config.get("eval", {})
    ref_frac = esec.get("ref_frac", 0.5)
    method = esec.get("method", "centroid")
    knn_k = esec.get("knn_k", 5)
    flat, _ = embed_blocks(model, blocks)
    labels = [b.label for b in blocks]
    ref_idx, test_idx = _split_ref_test(len(blocks), ref_frac, seed)
    return analysis.evaluate_embeddings(
        flat[ref_idx],
        [labels[i] for i in ref_idx],
        flat[test_idx],
        [labels[i] for i in test_idx],
        method=method,
        knn_k=knn_k,
    )


def cmd_eval(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    model, manifest = load_checkpoint(args.checkpoint)
    if manifest.get("frozen"):
        raise ConfigError("eval of frozen-embedding checkpoints needs block-free rows; use analyze amp instead")
    blocks = _eval_blocks(config, seed, args.corpus)
    metrics = _evaluate_checkpoint(model, blocks, config, seed)
    cfg_dict = {"eval_of": manifest["config_hash"], **config}
    with run_directory(args.out, cfg_dict, seed) as run_dir:
        (run_dir / "metrics.csv").write_text(analysis.metrics_csv(metrics))
    print(
        json.dumps(
            {
                "subcommand": "eval",
                "macro_f1": metrics.macro_f1,
                "macro_acc": metrics.macro_acc,
                "out": str(run_dir / "metrics.csv"),
                "seed": seed,
            }
        )
    )
    return 0


def _pick_sim_batch(blocks, aspect: str | None, n_per_side: int = 5):
    by_aspect: dict[str, list[int]] = {}
    for i, b in enumerate(blocks):
        by_aspect.setdefault(b.label.aspect, []).append(i)
    candidates = [aspect] if aspect else sorted(by_aspect)
    for a in candidates:
        idx = by_aspect.get(a, [])
        pos = [i for i in idx if blocks[i].label.polarity == "pos"][:n_per_side]
        neg = [i for i in idx if blocks[i].label.polarity == "neg"][:n_per_side]
        if len(pos) == n_per_side and len(neg) == n_per_side:
            return a, pos + neg
    raise ConfigError(
        f"no aspect with {n_per_side} positive and {n_per_side} negative blocks"
    )


def cmd_analyze(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    if args.what == "grad":
        tau = args.tau if args.tau is not None else 20.0
        grid = np.linspace(0.0, np.pi, args.points)
        table = analysis.gradient_landscape(grid, tau)
        with run_directory(args.out, {"analyze": "grad", "tau": tau, "points": args.points}, seed) as run_dir:
            (run_dir / "grad.csv").write_text(analysis.landscape_csv(table))
            (run_dir / "grad.svg").write_text(analysis.landscape_svg(table))
        print(json.dumps({"subcommand": "analyze grad", "out": str(run_dir), "tau": tau}))
        return 0

    if not args.checkpoint or not args.corpus:
        raise ConfigError(f"analyze {args.what} needs --checkpoint and --corpus")
    model, manifest = load_checkpoint(args.checkpoint)
    blocks = _eval_blocks(config, seed, args.corpus)
    cfg_dict = {"analyze": args.what, "of": manifest["config_hash"], **config}
    if args.what == "sim":
        aspect, idx = _pick_sim_batch(blocks, args.aspect)
        batch = [blocks[i] for i in idx]
        labels = [b.label for b in batch]
        flat, _ = embed_blocks(model, batch)
        comparison = None
        if args.compare:
            other, _ = load_checkpoint(args.compare)
            oflat, _ = embed_blocks(other, batch)
            comparison = analysis.similarity_report(oflat, labels, item_ids=idx)
        report = analysis.similarity_report(flat, labels, comparison=comparison, item_ids=idx)
        with run_directory(args.out, cfg_dict, seed) as run_dir:
            (run_dir / "sim.csv").write_text(analysis.similarity_csv(report))
            (run_dir / "sim.svg").write_text(analysis.similarity_svg(report))
        print(
            json.dumps(
                {
                    "subcommand": "analyze sim",
                    "aspect": aspect,
                    "group_means": report.group_means,
                    "deltas": report.deltas,
                    "out": str(run_dir),
                }
            )
        )
        return 0
    if args.what == "amp":
        _, cembs = embed_blocks(model, blocks)
        report = analysis.amplitude_report(
            cembs,
            [b.label for b in blocks],
            [b.text_len for b in blocks],
            intensities=[b.intensity for b in blocks],
            aspect_filter=args.aspect,
        )
        with run_directory(args.out, cfg_dict, seed) as run_dir:
            (run_dir / "amp.csv").write_text(analysis.amplitude_csv(report))
            (run_dir / "amp_scatter.svg").write_text(analysis.amplitude_scatter_svg(report))
            (run_dir / "amp_hist.svg").write_text(analysis.amplitude_hist_svg(report))
        print(
            json.dumps(
                {
                    "subcommand": "analyze amp",
                    "pearson_text_len": report.pearson_text_len,
                    "pearson_intensity": report.pearson_intensity,
                    "degenerate": report.degenerate,
                    "out": str(run_dir),
                }
            )
        )
        return 0
    raise ConfigError(f"unknown analyze target {args.what!r}")


def cmd_grad_check(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    report = certify(seed=seed, instances=args.instances)
    with run_directory(args.out, {"grad_check": True, "instances": args.instances}, seed) as run_dir:
        with open(run_dir / "grad_check.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(
        json.dumps(
            {
                "subcommand": "grad-check",
                "passed": report["passed"],
                "max_rel_err": report["max_rel_err"],
                "elapsed_seconds": report["elapsed_seconds"],
                "backend": kernels.active_backend(),
                "out": str(run_dir / "grad_check.json"),
            }
        )
    )
    if not report["passed"]:
        raise NumericError(f"gradient certification failed: max rel err {report['max_rel_err']:.3e}")
    return 0


ABLATION_LEGS = ("full", "hard_chunk", "no_mask", "no_angle", "amp")


def _leg_config(base: TrainConfig, leg: str) -> TrainConfig:
    if leg == "full":
        return base
    if leg == "hard_chunk":
        return dataclasses.replace(base, projection="hard")
    if leg == "no_mask":
        return dataclasses.replace(base, mask_enabled=False)
    if leg == "no_angle":
        return dataclasses.replace(base, weights=dataclasses.replace(base.weights, w_angle=0.0))
    if leg == "amp":
        return dataclasses.replace(base, weights=dataclasses.replace(base.weights, w_amp=1.0))
    raise ConfigError(f"unknown ablation leg {leg!r}")


def cmd_ablate(args) -> int:
    config = load_config(args.config)
    seed = resolve_seed(args, config)
    base = train_config(config, args, seed)
    _, lex = _lexicon_for(config, seed)
    triplets = read_triplets_jsonl(args.triplets)
    blocks = _eval_blocks(config, seed, args.corpus)
    summary = {}
    with run_directory(args.out, _full_cli_config(config, base), seed) as run_dir:
        for leg in ABLATION_LEGS:
            cfg = _leg_config(base, leg)
            model = init_model(cfg, lex.vocab_size, RngStream(seed).split(4)[3])
            model, history = train(model, triplets, cfg)
            save_checkpoint(model, cfg, run_dir / "legs" / leg, history=history)
            metrics = _evaluate_checkpoint(model, blocks, config, seed)
            flat, cembs = embed_blocks(model, blocks)
            agg = analysis.aggregate_similarity(flat, [b.label for b in blocks])
            amp_std = analysis.mean_aspect_amplitude_std(cembs, [b.label for b in blocks])
            summary[leg] = {
                "macro_f1": metrics.macro_f1,
                "macro_acc": metrics.macro_acc,
                "pos_pos": agg["pos_pos"],
                "neg_neg": agg["neg_neg"],
                "pos_neg": agg["pos_neg"],
                "margin": min(agg["pos_pos"], agg["neg_neg"]) - agg["pos_neg"],
                "mean_aspect_amp_std": amp_std,
                "final_loss": history[-1]["l_total"] if history else None,
            }
        lines = ["leg,macro_f1,macro_acc,pos_pos,neg_neg,pos_neg,margin,mean_aspect_amp_std"]
        for leg in ABLATION_LEGS:
            s = summary[leg]
            lines.append(
                f"{leg},{s['macro_f1']:.6f},{s['macro_acc']:.6f},{s['pos_pos']:.6f},"
                f"{s['neg_neg']:.6f},{s['pos_neg']:.6f},{s['margin']:.6f},"
                f"{s['mean_aspect_amp_std']:.6f}"
            )
        (run_dir / "ablation.csv").write_text("\n".join(lines) + "\n")
        with open(run_dir / "ablation.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps({"subcommand": "ablate", "legs": summary, "out": str(run_dir)}))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file (validated against the published schema)")
    common.add_argument("--seed", type=int, default=None, help=f"seed; overrides ${SEED_ENV} and the config")

    rundir = _Parser(add_help=False)
    rundir.add_argument("--out", default="runs", help="output directory (run dirs are named by config hash + seed)")

    train_flags = _Parser(add_help=False)
    train_flags.add_argument("--projection", choices=["zrcp", "hard"], default=None, help="projection head (hard = direct bisection ablation)")
    train_flags.add_argument("--mask", choices=["on", "off"], default=None, help="anti-collision mask toggle")
    train_flags.add_argument("--angle-mode", choices=["exact", "surrogate"], default=None, help="phase-delta estimator")
    train_flags.add_argument("--paper-literal-sign", action="store_true", help="use the reversed angle-loss exponent ordering")
    train_flags.add_argument("--w_ibn", type=float, default=None, help="in-batch negative loss weight (default 1.0)")
    train_flags.add_argument("--w_angle", type=float, default=None, help="angle loss weight (default 1.0)")
    train_flags.add_argument("--w_cos", type=float, default=None, help="cosine loss weight (default 1.0)")
    train_flags.add_argument("--w_amp", type=float, default=None, help="amplitude penalty weight (default 0.0)")
    train_flags.add_argument("--tau_ibn", type=float, default=None, help="IBN temperature (default 20)")
    train_flags.add_argument("--tau_angle", type=float, default=None, help="angle temperature (default 20)")
    train_flags.add_argument("--tau_cos", type=float, default=None, help="cosine temperature (default 20)")
    train_flags.add_argument("--epochs", type=int, default=None, help="training epochs (default 20)")
    train_flags.add_argument("--batch-size", type=int, default=None, dest="batch_size", help="triplets per micro-batch (default 16)")
    train_flags.add_argument("--grad-accum-steps", type=int, default=None, dest="grad_accum_steps", help="micro-batches per update (default 2)")
    train_flags.add_argument("--peak-lr", type=float, default=None, dest="peak_lr", help="peak learning rate (default 1e-3)")
    train_flags.add_argument("--warmup-steps", type=int, default=None, dest="warmup_steps", help="warmup updates (default 5%% of total)")

    parser = _Parser(
        prog="phasesep",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a synthetic corpus JSONL", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--n-reviews", type=int, default=None, help="override config n_reviews")
    p.add_argument("--out", required=True, help="corpus JSONL path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("extract", parents=[common], help="extract context blocks and triplets", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--corpus", required=True, help="corpus JSONL from gen-data (same config+seed)")
    p.add_argument("--n-triplets", type=int, default=None, help="override config n_triplets")
    p.add_argument("--out", required=True, help="triplet JSONL path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common, rundir, train_flags], help="train a model", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--triplets", default=None, help="triplet JSONL from extract")
    p.add_argument("--frozen-embeddings", default=None, help="EMBF table; trains the projection only")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, rundir], help="nearest-centroid polarity metrics", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--corpus", required=True, help="held-out corpus JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", parents=[common, rundir], help="geometry reports (CSV + SVG)", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("what", choices=["sim", "amp", "grad"], help="report kind")
    p.add_argument("--checkpoint", default=None, help="checkpoint directory (sim, amp)")
    p.add_argument("--corpus", default=None, help="corpus JSONL (sim, amp)")
    p.add_argument("--aspect", default=None, help="restrict to one aspect")
    p.add_argument("--compare", default=None, help="baseline checkpoint for deltas (sim)")
    p.add_argument("--tau", type=float, default=None, help="angle temperature for grad curves (default 20)")
    p.add_argument("--points", type=int, default=50, help="grid points for grad curves")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("grad-check", parents=[common, rundir], help="certify all analytic gradients against finite differences", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--instances", type=int, default=100, help="random instances per target")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("ablate", parents=[common, rundir, train_flags], help="run the 5-leg ablation grid", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--triplets", required=True, help="triplet JSONL")
    p.add_argument("--corpus", required=True, help="held-out corpus JSONL for evaluation")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        _print_error(exc)
        return 1
    except PhasesepError as exc:
        _print_error(exc)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports everything
        _print_error(exc)
        return 2


def _print_error(exc: Exception) -> None:
    sys.stderr.write(
        json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
    )


if __name__ == "__main__":
    sys.exit(main())
