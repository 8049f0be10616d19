"""The pinned desk-scale experiment: dataset recipe, training recipe, and
an idempotent builder for the shared artifacts directory.

Everything verification-critical (the acceptance suite, the browser e2e)
trains exactly this model, so the recipe lives in one place.
"""

from __future__ import annotations

import json
import shutil
import time
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .datasets import DatasetIndex, ToyDatasetSpec, generate_toy_dataset, load_index
from .nn.unet import UNetWeights
from .nn.weights_io import load_weights, save_weights
from .rng import SeededRng
from .synthlabel import SynthConfig
from .training import EpisodeConfig, TrainConfig, train_loop

DATA_SEED = 11
TRAIN_SEED = 7
EVAL_SEED = 123
INFER_SIZE = 48

TOY_SPEC = dict(
    families=("disk", "ring"), count=20, size=48, contrast=(0.3, 0.5),
    distractors=1, distractor_area_frac=0.75,
)
TOY_TRAIN = dict(
    width=32, lr=1e-3, epochs=80, steps=5, batch_size=8,
    target_train_dice=0.9, min_epochs=35, grad_clip_norm=0.5,
    warmup_epochs=5, cosine_decay=True, min_batches_per_epoch=4,
)


def toy_train_config() -> TrainConfig:
    light_aug = AugmentConfig(
        **{**AugmentConfig.identity().__dict__, "hflip_prob": 0.5, "vflip_prob": 0.5}
    )
    return TrainConfig(
        width=TOY_TRAIN["width"],
        lr=TOY_TRAIN["lr"],
        epochs=TOY_TRAIN["epochs"],
        episode=EpisodeConfig(steps=TOY_TRAIN["steps"], batch_size=TOY_TRAIN["batch_size"]),
        synth=SynthConfig(synth_prob=0.0),
        augment=light_aug,
        probe_every=1,
        target_train_dice=TOY_TRAIN["target_train_dice"],
        min_epochs=TOY_TRAIN["min_epochs"],
        grad_clip_norm=TOY_TRAIN["grad_clip_norm"],
        warmup_epochs=TOY_TRAIN["warmup_epochs"],
        cosine_decay=TOY_TRAIN["cosine_decay"],
        min_batches_per_epoch=TOY_TRAIN["min_batches_per_epoch"],
    )


def _recipe_dict() -> dict:
    return json.loads(json.dumps({
        "spec": TOY_SPEC, "train": TOY_TRAIN, "seeds": [DATA_SEED, TRAIN_SEED],
    }))


def ensure_toy_artifacts(artifacts_dir: str | Path, log=None) -> dict:
    """Generate the toy dataset and train the toy model unless a cached copy
    built from this exact recipe already exists. Returns the manifest."""
    artifacts = Path(artifacts_dir)
    artifacts.mkdir(parents=True, exist_ok=True)
    manifest_path = artifacts / "toy_manifest.json"
    model_path = artifacts / "toy_model.spwt"
    data_dir = artifacts / "toy_data"
    recipe = _recipe_dict()

    if manifest_path.exists() and model_path.exists() and data_dir.exists():
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("recipe") == recipe:
            return manifest

    shutil.rmtree(data_dir, ignore_errors=True)
    index = generate_toy_dataset(ToyDatasetSpec(**TOY_SPEC), SeededRng(DATA_SEED), data_dir)
    config = toy_train_config()

    t0 = time.perf_counter()
    losses: list[float] = []
    crossing: dict = {}

    def track(row):
        losses.append(row["loss"])
        if not crossing and row["train_dice"] > 0.9:
            crossing.update(
                epoch=row["epoch"],
                seconds=time.perf_counter() - t0,
                train_dice=row["train_dice"],
            )
        if log is not None:
            log(row)

    result = train_loop(index, config, seed=TRAIN_SEED, log=track)
    save_weights(model_path, result.weights)
    manifest = {
        "recipe": recipe,
        "losses": losses,
        "crossing": crossing,
        "epochs_run": result.epochs_run,
        "seconds": result.seconds,
        "final_train_dice": next(
            (row["train_dice"] for row in reversed(result.metrics)
             if not np.isnan(row["train_dice"])), float("nan")),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest


def load_toy_artifacts(artifacts_dir: str | Path) -> tuple[DatasetIndex, UNetWeights, dict]:
    artifacts = Path(artifacts_dir)
    manifest = ensure_toy_artifacts(artifacts)
    return (
        load_index(artifacts / "toy_data"),
        load_weights(artifacts / "toy_model.spwt"),
        manifest,
    )
