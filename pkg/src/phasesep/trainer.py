"""Deterministic mini-batch training loop: encoder -> projection -> losses,
with gradient accumulation, warmup/decay schedule, AdamW, checkpointing, and
the ablation toggles (hard chunking, no mask, no angle loss, amplitude
penalty).

Loss normalization is the per-anchor mean within each micro-batch; the
update applies the mean over the accumulation window, so one update from k
balanced micro-batches matches one update from the concatenated batch for
the triplet-scoped objectives.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import embf, kernels
from .complexspace import AngleMode, ComplexEmbedding
from .encoder import (
    EmbeddingTable,
    ToyEncoderParams,
    encode_backward_batch,
    encode_batch,
    encoder_init,
)
from .errors import ConfigError, NumericError
from .extract import ContextBlock, Triplet
from .losses import (
    LossOutput,
    LossWeights,
    Temperatures,
    amplitude_penalty,
    angle_loss,
    cosine_loss,
    ibn_loss,
    total_loss,
)
from .masking import (
    ROLE_NEGATIVE,
    ROLE_POSITIVE,
    ROLE_QUERY,
    SemanticLabel,
    build_anticollision_mask,
    build_pair_index,
    identity_mask,
)
from .numerics import RNG_ALGORITHM, RngStream
from .zrcp import ZrcpParams, zrcp_backward_batch, zrcp_forward_batch, zrcp_init

PROJECTION_ZRCP = "zrcp"
PROJECTION_HARD = "hard"
PROJECTIONS = (PROJECTION_ZRCP, PROJECTION_HARD)

CHECKPOINT_MANIFEST = "manifest.json"
METRICS_FILE = "metrics.jsonl"


@dataclass(frozen=True)
class TrainConfig:
    # Desk-scale defaults; the paper-scale values (epochs 5, peak_lr 2e-5,
    # batch 32, accum 4, warmup 500) are one flag away each.
    epochs: int = 20
    batch_size: int = 16  # triplets per micro-batch
    grad_accum_steps: int = 2
    peak_lr: float = 1e-3
    warmup_steps: int | None = None  # None -> 5% of total update steps
    weights: LossWeights = field(default_factory=LossWeights)
    temps: Temperatures = field(default_factory=Temperatures)
    projection: str = PROJECTION_ZRCP
    angle_mode: AngleMode = AngleMode.EXACT_PHASE
    paper_literal_sign: bool = False
    bias_outside: bool = False
    mask_enabled: bool = True
    weight_decay: float = 0.0
    d_embed: int = 32
    d_out: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.grad_accum_steps < 1:
            raise ConfigError("grad_accum_steps must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.peak_lr <= 0:
            raise ConfigError("peak_lr must be > 0")
        if self.warmup_steps is not None and self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be >= 0")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"projection must be one of {PROJECTIONS}")
        if self.d_out % 2 != 0:
            raise ConfigError("d_out must be even")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")

    @property
    def effective_batch(self) -> int:
        return self.batch_size * self.grad_accum_steps

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["angle_mode"] = self.angle_mode.value
        return d


def config_hash(cfg_dict: dict) -> str:
    blob = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class Model:
    zrcp: ZrcpParams
    encoder: ToyEncoderParams | None = None
    frozen_table: np.ndarray | None = None  # float64 copy of external rows
    projection: str = PROJECTION_ZRCP
    bias_outside: bool = False

    @property
    def d_out(self) -> int:
        return 2 * self.zrcp.half_dim


def init_model(cfg: TrainConfig, vocab_size: int, rng: RngStream) -> Model:
    return Model(
        zrcp=zrcp_init(cfg.d_out),
        encoder=encoder_init(vocab_size, cfg.d_embed, cfg.d_out, rng),
        projection=cfg.projection,
        bias_outside=cfg.bias_outside,
    )


def init_frozen_model(cfg: TrainConfig, table: EmbeddingTable) -> Model:
    if table.dim != cfg.d_out:
        raise ConfigError(
            f"frozen table dim {table.dim} does not match configured d_out {cfg.d_out}"
        )
    return Model(
        zrcp=zrcp_init(table.dim),
        encoder=None,
        frozen_table=table.data.astype(np.float64),
        projection=cfg.projection,
        bias_outside=cfg.bias_outside,
    )


def named_params(model: Model) -> dict[str, np.ndarray]:
    params = {}
    if model.encoder is not None:
        params["encoder.token_table"] = model.encoder.token_table
        params["encoder.head_W"] = model.encoder.head_W
        params["encoder.head_b"] = model.encoder.head_b
    params["zrcp.W_re"] = model.zrcp.W_re
    params["zrcp.b_re"] = model.zrcp.b_re
    params["zrcp.W_im"] = model.zrcp.W_im
    params["zrcp.b_im"] = model.zrcp.b_im
    return params


@dataclass
class OptimizerState:
    """AdamW with decoupled weight decay. Projection-head parameters never
    receive decay so data gradients alone move the head off its identity
    initialization. Also owns the accumulation window buffers."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    # accumulation window
    grad_accum: dict[str, np.ndarray] = field(default_factory=dict)
    micro_count: int = 0
    metric_sums: dict[str, float] = field(default_factory=dict)


def init_optimizer(model: Model, cfg: TrainConfig) -> OptimizerState:
    params = named_params(model)
    return OptimizerState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        weight_decay=cfg.weight_decay,
        grad_accum={k: np.zeros_like(p) for k, p in params.items()},
    )


def resolve_warmup(cfg: TrainConfig, total_updates: int) -> int:
    if cfg.warmup_steps is not None:
        return cfg.warmup_steps
    return max(1, round(0.05 * total_updates))


def lr_schedule(step: int, cfg: TrainConfig, total_updates: int) -> float:
    """Linear 0 -> peak over the warmup, then linear decay to 0 at the end."""
    if step < 0:
        raise ValueError("step must be >= 0")
    warmup = resolve_warmup(cfg, total_updates)
    if warmup > 0 and step < warmup:
        return cfg.peak_lr * step / warmup
    if total_updates <= warmup:
        return cfg.peak_lr if step <= total_updates else 0.0
    frac = (total_updates - step) / (total_updates - warmup)
    return cfg.peak_lr * min(1.0, max(0.0, frac))


def unroll_triplets(
    batch: Sequence[Triplet],
) -> tuple[list[ContextBlock], list[SemanticLabel], list[tuple[int, str]]]:
    items: list[ContextBlock] = []
    labels: list[SemanticLabel] = []
    roles: list[tuple[int, str]] = []
    for tid, t in enumerate(batch):
        for block, role in (
            (t.query, ROLE_QUERY),
            (t.positive, ROLE_POSITIVE),
            *((n, ROLE_NEGATIVE) for n in t.negatives),
        ):
            items.append(block)
            labels.append(block.label)
            roles.append((tid, role))
    return items, labels, roles


def forward_items(model: Model, items: Sequence[ContextBlock]):
    """Encoder (or frozen rows) -> projection. Returns (H, means, RE, IM, FLAT)."""
    if model.frozen_table is not None:
        rows = [b.row for b in items]
        if any(r is None for r in rows):
            raise ConfigError("frozen-embedding model received blocks without rows")
        h = model.frozen_table[np.asarray(rows, dtype=np.int64)]
        means = None
    else:
        h, means = encode_batch(model.encoder, [b.tokens for b in items])
    if model.projection == PROJECTION_ZRCP:
        re, im = zrcp_forward_batch(model.zrcp, h, bias_outside=model.bias_outside)
    else:
        k = h.shape[1] // 2
        re, im = h[:, :k].copy(), h[:, k:].copy()
    flat = np.concatenate([re, im], axis=1)
    return h, means, re, im, flat


def embed_blocks(model: Model, blocks: Sequence[ContextBlock]):
    """Projection outputs for analysis: (flat embeddings, complex embeddings)."""
    _, _, re, im, flat = forward_items(model, blocks)
    cembs = [ComplexEmbedding(re=re[i].copy(), im=im[i].copy()) for i in range(len(blocks))]
    return flat, cembs


def _batch_components(
    model: Model,
    items: Sequence[ContextBlock],
    labels: list[SemanticLabel],
    roles: list[tuple[int, str]],
    cfg: TrainConfig,
):
    h, means, re, im, flat = forward_items(model, items)
    pairs = build_pair_index(labels, roles)
    n = len(items)
    wts = cfg.weights
    components: dict[str, LossOutput] = {}
    n_anchors = max(1, len(pairs))
    if wts.w_ibn > 0:
        mask = build_anticollision_mask(labels) if cfg.mask_enabled else identity_mask(n)
        components["ibn"] = ibn_loss(list(flat), pairs, mask, cfg.temps.tau_ibn).scaled(
            1.0 / n_anchors
        )
    cembs = None
    if wts.w_angle > 0 or wts.w_amp > 0:
        cembs = [ComplexEmbedding(re=re[i].copy(), im=im[i].copy()) for i in range(n)]
    if wts.w_angle > 0:
        components["angle"] = angle_loss(
            cembs,
            pairs,
            cfg.temps.tau_angle,
            mode=cfg.angle_mode,
            paper_literal_sign=cfg.paper_literal_sign,
        ).scaled(1.0 / n_anchors)
    if wts.w_cos > 0:
        components["cos"] = cosine_loss(list(flat), pairs, cfg.temps.tau_cos).scaled(
            1.0 / n_anchors
        )
    if wts.w_amp > 0:
        components["amp"] = amplitude_penalty(cembs, [l.aspect for l in labels])
    combined = total_loss(components, wts)
    return h, means, combined, components


@dataclass
class StepMetrics:
    components: dict[str, float]
    total: float
    n_anchors: int
    updated: bool = False
    lr: float = 0.0
    update_step: int = 0


def train_step(
    model: Model,
    batch: Sequence[Triplet],
    opt: OptimizerState,
    cfg: TrainConfig,
    total_updates: int,
) -> tuple[Model, OptimizerState, StepMetrics]:
    """Process one micro-batch; apply an AdamW update every
    `grad_accum_steps` micro-batches. Mutates model and opt in place and
    returns them for convenience."""
    items, labels, roles = unroll_triplets(batch)
    h, means, combined, components = _batch_components(model, items, labels, roles, cfg)
    if not np.isfinite(combined.value):
        raise NumericError(
            "non-finite loss; components: "
            + json.dumps({k: v.value for k, v in components.items()})
            + f"; reviews: {sorted({b.source_review for b in items})}"
        )
    n = len(items)
    d = model.d_out
    g_flat = np.zeros((n, d))
    for i, g in combined.grads.items():
        g_flat[i] = g
    k = d // 2
    if model.projection == PROJECTION_ZRCP:
        zg = zrcp_backward_batch(
            model.zrcp, h, g_flat[:, :k], g_flat[:, k:], bias_outside=model.bias_outside
        )
        opt.grad_accum["zrcp.W_re"] += zg.grad_W_re
        opt.grad_accum["zrcp.b_re"] += zg.grad_b_re
        opt.grad_accum["zrcp.W_im"] += zg.grad_W_im
        opt.grad_accum["zrcp.b_im"] += zg.grad_b_im
        grad_h = zg.grad_h
    else:
        grad_h = g_flat
    if model.encoder is not None:
        eg = encode_backward_batch(model.encoder, [b.tokens for b in items], means, grad_h)
        opt.grad_accum["encoder.token_table"] += eg.grad_token_table
        opt.grad_accum["encoder.head_W"] += eg.grad_head_W
        opt.grad_accum["encoder.head_b"] += eg.grad_head_b
    opt.micro_count += 1
    for name in ("ibn", "angle", "cos", "amp"):
        if name in components:
            opt.metric_sums[name] = opt.metric_sums.get(name, 0.0) + components[name].value
    opt.metric_sums["total"] = opt.metric_sums.get("total", 0.0) + combined.value

    metrics = StepMetrics(
        components={k_: v.value for k_, v in components.items()},
        total=combined.value,
        n_anchors=len([r for r in roles if r[1] == ROLE_QUERY]),
    )
    if opt.micro_count >= cfg.grad_accum_steps:
        lr = lr_schedule(opt.step, cfg, total_updates)
        _apply_update(model, opt, lr)
        metrics.updated = True
        metrics.lr = lr
        metrics.update_step = opt.step
    return model, opt, metrics


def _apply_update(model: Model, opt: OptimizerState, lr: float) -> None:
    params = named_params(model)
    scale = 1.0 / opt.micro_count
    opt.step += 1
    t = opt.step
    for name, p in params.items():
        g = opt.grad_accum[name] * scale
        if opt.weight_decay > 0 and not name.startswith("zrcp."):
            p *= 1.0 - lr * opt.weight_decay
        m = opt.m[name]
        v = opt.v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        mhat = m / (1.0 - opt.beta1**t)
        vhat = v / (1.0 - opt.beta2**t)
        p -= lr * mhat / (np.sqrt(vhat) + opt.eps)
        opt.grad_accum[name][...] = 0.0
    opt.micro_count = 0


def _flush_window_metrics(opt: OptimizerState, lr: float, micro_in_window: int) -> dict:
    rec = {"step": opt.step, "lr": lr}
    for name, key in (("ibn", "l_ibn"), ("angle", "l_angle"), ("cos", "l_cos"), ("amp", "l_amp")):
        rec[key] = opt.metric_sums.get(name, 0.0) / micro_in_window
    rec["l_total"] = opt.metric_sums.get("total", 0.0) / micro_in_window
    opt.metric_sums.clear()
    return rec


def train(
    model: Model,
    triplets: Sequence[Triplet],
    cfg: TrainConfig,
) -> tuple[Model, list[dict]]:
    """Full deterministic loop. Returns the trained model and the metric
    history (one record per optimizer update)."""
    if not triplets:
        raise ConfigError("empty triplet set")
    opt = init_optimizer(model, cfg)
    n = len(triplets)
    micro_per_epoch = int(np.ceil(n / cfg.batch_size))
    updates_per_epoch = int(np.ceil(micro_per_epoch / cfg.grad_accum_steps))
    total_updates = cfg.epochs * updates_per_epoch
    rng = RngStream(cfg.seed)
    epoch_rngs = rng.split(cfg.epochs)
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        order = epoch_rngs[epoch].permutation(n)
        window_micro = 0
        for start in range(0, n, cfg.batch_size):
            batch = [triplets[i] for i in order[start : start + cfg.batch_size]]
            last_in_epoch = start + cfg.batch_size >= n
            window_micro += 1
            if last_in_epoch and opt.micro_count + 1 < cfg.grad_accum_steps:
                # close the trailing short window at epoch end
                model, opt, m = train_step(model, batch, opt, cfg, total_updates)
                lr = lr_schedule(opt.step, cfg, total_updates)
                _apply_update(model, opt, lr)
                history.append(_flush_window_metrics(opt, lr, window_micro))
                window_micro = 0
                continue
            model, opt, m = train_step(model, batch, opt, cfg, total_updates)
            if m.updated:
                history.append(_flush_window_metrics(opt, m.lr, window_micro))
                window_micro = 0
    return model, history


def write_metrics_jsonl(history: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in history:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def save_checkpoint(
    model: Model,
    cfg: TrainConfig,
    out_dir: str | Path,
    history: list[dict] | None = None,
    extra: dict | None = None,
) -> Path:
    """Manifest plus one EMBF blob per named tensor. No timestamps: identical
    runs produce byte-identical checkpoints."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_json_dict()
    tensors = {}
    for name, p in named_params(model).items():
        fname = name.replace(".", "_") + ".embf"
        arr = p if p.ndim == 2 else p[None, :]
        embf.write_array(out / fname, arr)
        tensors[name] = {"file": fname, "shape": list(p.shape)}
    manifest = {
        "format": "phasesep-checkpoint",
        "version": 1,
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": cfg.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "kernel_backend": kernels.active_backend(),
        "step": history[-1]["step"] if history else 0,
        "frozen": model.frozen_table is not None,
        "vocab_size": model.encoder.vocab_size if model.encoder is not None else None,
        "tensors": tensors,
    }
    if extra:
        manifest.update(extra)
    with open(out / CHECKPOINT_MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if history is not None:
        write_metrics_jsonl(history, out / METRICS_FILE)
    return out


def load_checkpoint(ckpt_dir: str | Path) -> tuple[Model, dict]:
    ckpt = Path(ckpt_dir)
    with open(ckpt / CHECKPOINT_MANIFEST, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    tensors = {}
    for name, meta in manifest["tensors"].items():
        arr = embf.read_array(ckpt / meta["file"]).astype(np.float64)
        tensors[name] = arr.reshape(meta["shape"])
    cfg = manifest["config"]
    zrcp = ZrcpParams(
        W_re=tensors["zrcp.W_re"],
        b_re=tensors["zrcp.b_re"],
        W_im=tensors["zrcp.W_im"],
        b_im=tensors["zrcp.b_im"],
    )
    enc = None
    if "encoder.token_table" in tensors:
        enc = ToyEncoderParams(
            token_table=tensors["encoder.token_table"],
            head_W=tensors["encoder.head_W"],
            head_b=tensors["encoder.head_b"],
        )
    model = Model(
        zrcp=zrcp,
        encoder=enc,
        projection=cfg["projection"],
        bias_outside=cfg["bias_outside"],
    )
    return model, manifest
