"""Iterative-interaction training: episodes and the optimization loop.

An episode simulates k prediction/correction rounds on one example. The
episode loss is the sum of the per-step segmentation losses; gradients
flow through each step's forward pass only (the previous-prediction
channel and all prompts enter as constants).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, augment_pair
from .datasets import DatasetIndex, sample_example
from .encoding import compute_error_region, encode_model_input
from .grids import BinaryMask, Image2D, NoRegionError, PredictionLogits
from .gridio import load_image_png, load_mask_png
from .nn.losses import LossConfig, seg_loss
from .nn.optim import AdamState, adam_step
from .nn.unet import UNetWeights, unet_backward, unet_forward
from .nn.weights_io import save_weights
from .promptsim import PromptConfig, sample_corrections, sample_initial_prompts
from .rng import SeededRng
from .synthlabel import SynthConfig, maybe_replace_label

_SAMPLE_RETRIES = 5


@dataclass(frozen=True)
class EpisodeConfig:
    steps: int = 5
    batch_size: int = 8
    prompt: PromptConfig = field(default_factory=PromptConfig)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpisodeResult:
    loss: float
    grads: dict[str, np.ndarray]
    step_losses: list[float]
    step_logits: list[np.ndarray]
    interaction_counts: list[int]


def run_episode(
    weights: UNetWeights,
    image: Image2D,
    y: BinaryMask,
    rng: SeededRng,
    config: EpisodeConfig,
    loss_config: LossConfig = LossConfig(),
    collect_logits: bool = True,
) -> EpisodeResult:
    """Simulate k interaction steps and accumulate loss and gradients."""
    if y.is_empty():
        raise NoRegionError("episode label is empty")
    interactions = sample_initial_prompts(y, rng.derive("init"), config.prompt)
    prev: PredictionLogits | None = None
    grads = weights.zeros_like_grads()
    step_losses: list[float] = []
    step_logits: list[np.ndarray] = []
    counts: list[int] = []
    total = 0.0
    for step in range(config.steps):
        x = encode_model_input(image, interactions, prev)
        logits, cache = unet_forward(weights, x, keep_cache=True)
        loss, dlogits = seg_loss(logits, y.data, loss_config)
        step_grads = unet_backward(weights, cache, dlogits)
        for k in grads:
            grads[k] += step_grads[k]
        total += loss
        step_losses.append(loss)
        if collect_logits:
            step_logits.append(logits.copy())
        counts.append(interactions.count())
        prev = PredictionLogits(logits)
        if step + 1 < config.steps:
            false_neg, false_pos = compute_error_region(y, prev)
            delta = sample_corrections(
                false_neg, false_pos, rng.derive("corr", step), config.prompt
            )
            interactions = interactions.merged(delta)
    return EpisodeResult(total, grads, step_losses, step_logits, counts)


def refine_for_dice(
    weights: UNetWeights,
    image: Image2D,
    y: BinaryMask,
    rng: SeededRng,
    config: EpisodeConfig,
) -> float:
    """Dice of the final step of a gradient-free episode (training probe)."""
    interactions = sample_initial_prompts(y, rng.derive("init"), config.prompt)
    prev: PredictionLogits | None = None
    for step in range(config.steps):
        x = encode_model_input(image, interactions, prev)
        logits, _ = unet_forward(weights, x)
        prev = PredictionLogits(logits)
        if step + 1 < config.steps:
            false_neg, false_pos = compute_error_region(y, prev)
            delta = sample_corrections(
                false_neg, false_pos, rng.derive("corr", step), config.prompt
            )
            interactions = interactions.merged(delta)
    pred = prev.binarized()
    inter = float((pred.data * y.data).sum())
    denom = pred.area + y.area
    return 1.0 if denom == 0 else 2.0 * inter / denom


@dataclass(frozen=True)
class TrainConfig:
    width: int = 192
    lr: float = 1e-4
    epochs: int = 100
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    probe_every: int = 1
    checkpoint_every: int = 0  # 0 disables periodic checkpoints
    target_train_dice: float = 0.0  # stop early once reached (0 disables)
    min_epochs: int = 0  # never stop early before this many epochs
    grad_clip_norm: float = 0.0  # 0 disables clipping
    warmup_epochs: int = 0  # linear lr ramp over the first epochs
    cosine_decay: bool = False  # decay lr to ~0 across the epoch budget
    min_batches_per_epoch: int = 1  # floor for tiny train splits


@dataclass
class TrainResult:
    weights: UNetWeights
    metrics: list[dict]
    counters: dict[str, int]
    epochs_run: int
    seconds: float


def _sample_training_pair(
    index: DatasetIndex,
    rng: SeededRng,
    config: TrainConfig,
    counters: dict[str, int],
) -> tuple[Image2D, BinaryMask] | None:
    """Sample, synthesize, and augment until the label is nonempty."""
    synth_cfg = config.synth
    for attempt in range(_SAMPLE_RETRIES):
        sub = rng.derive("try", attempt)
        _, ex = sample_example(index, sub.derive("pick"), split="train")
        image = load_image_png(ex.image_path)
        y0 = load_mask_png(ex.label_path)
        y = maybe_replace_label(image, y0, sub.derive("synth"), synth_cfg)
        used_synth = y is not y0
        if y.is_empty():
            continue
        image, y = augment_pair(image, y, sub.derive("aug"), config.augment)
        if y.is_empty():
            continue
        counters["synth_labels" if used_synth else "real_labels"] += 1
        return image, y
    counters["skipped_samples"] += 1
    return None


def train_loop(
    index: DatasetIndex,
    config: TrainConfig,
    seed: int,
    out_dir: str | Path | None = None,
    log=None,
) -> TrainResult:
    """Optimize a fresh network on the index's train split."""
    if index.count_examples("train") == 0:
        raise NoRegionError("train split is empty")
    t0 = time.perf_counter()
    rng = SeededRng(seed)
    weights = UNetWeights.initialize(rng.derive("init"), width=config.width)
    adam = AdamState.for_params(weights.tensors, lr=config.lr)
    counters = {"synth_labels": 0, "real_labels": 0, "skipped_samples": 0, "episodes": 0}
    metrics: list[dict] = []
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    n_train = index.count_examples("train")
    batches_per_epoch = max(
        config.min_batches_per_epoch,
        math.ceil(n_train / config.episode.batch_size),
    )
    train_refs = [
        (rec, ex)
        for rec in index.records
        for ex in rec.examples_in("train")
    ]
    val_refs = [
        (rec, ex)
        for rec in index.records
        for ex in rec.examples_in("val")
    ]

    epochs_run = 0
    for epoch in range(config.epochs):
        lr_scale = 1.0
        if config.warmup_epochs > 0:
            lr_scale = min(1.0, (epoch + 1) / config.warmup_epochs)
        if config.cosine_decay:
            lr_scale *= 0.5 * (1.0 + math.cos(math.pi * epoch / max(config.epochs - 1, 1)))
        adam.lr = config.lr * lr_scale
        epoch_loss = 0.0
        episode_count = 0
        for b in range(batches_per_epoch):
            brng = rng.derive("epoch", epoch, "batch", b)
            grads = weights.zeros_like_grads()
            batch_n = 0
            for slot in range(config.episode.batch_size):
                srng = brng.derive("slot", slot)
                pair = _sample_training_pair(index, srng, config, counters)
                if pair is None:
                    continue
                image, y = pair
                result = run_episode(
                    weights, image, y, srng.derive("episode"), config.episode,
                    config.loss, collect_logits=False,
                )
                if not np.isfinite(result.loss):
                    raise RuntimeError(
                        f"non-finite loss {result.loss} at epoch {epoch} batch {b} "
                        f"slot {slot}; step losses: {result.step_losses}"
                    )
                for k in grads:
                    grads[k] += result.grads[k]
                epoch_loss += result.loss
                batch_n += 1
                counters["episodes"] += 1
            if batch_n == 0:
                continue
            for k in grads:
                grads[k] /= batch_n
            if config.grad_clip_norm > 0:
                total = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
                if total > config.grad_clip_norm:
                    scale = config.grad_clip_norm / total
                    for k in grads:
                        grads[k] *= scale
            adam_step(adam, weights.tensors, grads)
            episode_count += batch_n
        epochs_run = epoch + 1

        row = {
            "epoch": epoch,
            "loss": epoch_loss / max(episode_count, 1),
            "train_dice": float("nan"),
            "val_dice": float("nan"),
        }
        if config.probe_every and epoch % config.probe_every == 0:
            row["train_dice"] = _probe_dice(weights, train_refs, rng, config, "train_probe")
            if val_refs:
                row["val_dice"] = _probe_dice(weights, val_refs, rng, config, "val_probe")
        metrics.append(row)
        if log is not None:
            log(row)
        if out_path is not None and config.checkpoint_every and (
            (epoch + 1) % config.checkpoint_every == 0
        ):
            save_weights(out_path / f"checkpoint_ep{epoch:04d}.spwt", weights)
        if config.target_train_dice and not math.isnan(row["train_dice"]):
            if row["train_dice"] > config.target_train_dice and epoch + 1 >= config.min_epochs:
                break

    seconds = time.perf_counter() - t0
    if out_path is not None:
        save_weights(out_path / "model.spwt", weights)
        _write_metrics_csv(out_path / "metrics.csv", metrics)
        manifest = {
            "seed": seed,
            "epochs_run": epochs_run,
            "counters": counters,
            "seconds": seconds,
            "config": _config_dict(config),
        }
        (out_path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return TrainResult(weights, metrics, counters, epochs_run, seconds)


def _probe_dice(weights, refs, rng: SeededRng, config: TrainConfig, tag: str) -> float:
    scores = []
    for i, (_, ex) in enumerate(refs):
        image = load_image_png(ex.image_path)
        y = load_mask_png(ex.label_path)
        if y.is_empty():
            continue
        scores.append(
            refine_for_dice(weights, image, y, SeededRng(rng.seed).derive(tag, i), config.episode)
        )
    return float(np.mean(scores)) if scores else float("nan")


def _write_metrics_csv(path: Path, metrics: list[dict]) -> None:
    if not metrics:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(metrics[0]))
        writer.writeheader()
        writer.writerows(metrics)


def _config_dict(config: TrainConfig) -> dict:
    out = asdict(config)
    return out
