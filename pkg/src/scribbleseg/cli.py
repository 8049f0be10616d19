"""Command-line entry point: a thin client over the package modules.

Every subcommand is reproducible from (args, seed); artifact directories
get a manifest.json recording both.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .augment import augment_pair
from .configfile import dump_train_config, load_train_config
from .datasets import ToyDatasetSpec, generate_toy_dataset, load_index, validate_index
from .evaluation import ProtocolConfig, latency_bench, run_protocol
from .gridio import (
    load_image_png,
    load_mask_png,
    save_image_png,
    save_labels_png,
    save_mask_png,
    write_spg1,
)
from .nn.unet import Predictor
from .nn.weights_io import load_weights, weights_crc
from .promptsim import (
    ScribbleParams,
    sim_centerline_scribble,
    sim_contour_scribble,
    sim_line_scribble,
)
from .rng import SeededRng
from .synthlabel import SynthConfig, felzenszwalb_partition, sample_synthetic_label
from .training import train_loop


def _replay_bundle(image, bundle_path: Path, out: Path) -> None:
    """Rebuild prompts from an exported zip and render them over the image."""
    import zipfile

    from .gridio import clicks_from_json
    from PIL import Image as PILImage

    out.mkdir(parents=True, exist_ok=True)
    overlay = np.stack([image.data, image.data, image.data])
    with zipfile.ZipFile(bundle_path) as bundle:
        names = set(bundle.namelist())
        for channel, name in ((1, "scribbles_pos.png"), (0, "scribbles_neg.png")):
            if name not in names:
                continue
            with bundle.open(name) as fh:
                from PIL import Image as _PIL

                arr = np.asarray(_PIL.open(fh).convert("L"), dtype=np.float32) / 255.0
            if arr.shape != image.shape:
                raise ValueError(f"{name} shape {arr.shape} != image shape {image.shape}")
            write_spg1(out / name.replace(".png", ".spg1"), arr)
            overlay[channel] = np.maximum(overlay[channel], arr)
        if "clicks.json" in names:
            clicks = clicks_from_json(bundle.read("clicks.json").decode("utf-8"))
            for c in clicks:
                channel = 1 if c.sign == "pos" else 0
                overlay[channel, c.row, c.col] = 1.0
            (out / "clicks.json").write_text(bundle.read("clicks.json").decode("utf-8"))
    rgb = (np.clip(overlay.transpose(1, 2, 0), 0, 1) * 255).astype(np.uint8)
    PILImage.fromarray(rgb, mode="RGB").save(out / "overlay.png")


def _write_manifest(out_dir: Path, args: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5
        ).stdout.strip() or None
    except Exception:
        rev = None
    manifest = {"command": sys.argv[1:], "args": args, "git_revision": rev}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Interactive segmentation engine."""


@main.group()
def data() -> None:
    """Dataset utilities."""


@data.command("gen")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--families", default="disk,ring", show_default=True)
@click.option("--count", default=20, show_default=True)
@click.option("--size", default=64, show_default=True)
@click.option("--noise", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
def data_gen(out: Path, families: str, count: int, size: int, noise: float, seed: int) -> None:
    """Generate a synthetic shapes dataset."""
    spec = ToyDatasetSpec(
        families=tuple(f.strip() for f in families.split(",") if f.strip()),
        count=count, size=size, noise=noise,
    )
    index = generate_toy_dataset(spec, SeededRng(seed), out)
    _write_manifest(out, {"families": families, "count": count, "size": size,
                          "noise": noise, "seed": seed})
    click.echo(f"wrote {index.count_examples()} examples under {out}")


@data.command("validate")
@click.option("--root", type=click.Path(path_type=Path, exists=True), required=True)
def data_validate(root: Path) -> None:
    """Load and check every example in a dataset directory."""
    index = load_index(root)
    n = validate_index(index)
    click.echo(f"ok: {n} examples across {len(index.datasets())} datasets")


@main.command()
@click.option("--image", "image_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--scale", "scale", type=float, default=None, help="Merge scale; random if omitted.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def synth(image_path: Path, scale: float | None, seed: int, out: Path) -> None:
    """Superpixel partition and one sampled synthetic label."""
    image = load_image_png(image_path)
    rng = SeededRng(seed)
    config = SynthConfig()
    out.mkdir(parents=True, exist_ok=True)
    if scale is None:
        scale = float(rng.gen.uniform(1.0, config.scale_max))
    partition = felzenszwalb_partition(
        image, scale,
        pre_blur_sigma=config.pre_blur_sigma,
        min_component_size=config.min_component_size,
    )
    label = sample_synthetic_label(image, SeededRng(seed).derive("label"), config)
    save_labels_png(out / "superpixels.png", partition)
    save_mask_png(out / "label.png", label)
    _write_manifest(out, {"image": str(image_path), "scale": scale, "seed": seed})
    click.echo(f"scale={scale:.2f} superpixels={partition.num_labels} -> {out}")


@main.command()
@click.option("--image", "image_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--label", "label_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--preview", is_flag=True, help="Write before/after PNG pairs.")
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def augment(image_path: Path, label_path: Path, preview: bool, config_path: Path | None,
            seed: int, out: Path) -> None:
    """Apply the augmentation pipeline to an image/label pair."""
    cfg = load_train_config(config_path).augment
    image = load_image_png(image_path)
    label = load_mask_png(label_path)
    aug_img, aug_lab = augment_pair(image, label, SeededRng(seed), cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_image_png(out / "image_aug.png", aug_img.data)
    save_mask_png(out / "label_aug.png", aug_lab)
    if preview:
        save_image_png(out / "image_before.png", image.data)
        save_mask_png(out / "label_before.png", label)
    _write_manifest(out, {"image": str(image_path), "label": str(label_path), "seed": seed})
    click.echo(f"augmented pair -> {out}")


@main.command()
@click.option("--image", "image_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--label", "label_path", type=click.Path(path_type=Path, exists=True))
@click.option("--kind", type=click.Choice(["line", "centerline", "contour"]), default="centerline",
              show_default=True)
@click.option("--negative", is_flag=True, help="Simulate on the label's complement.")
@click.option("--replay", "replay_path", type=click.Path(path_type=Path, exists=True),
              help="Re-import an exported annotation bundle instead of simulating.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def simulate(image_path: Path, label_path: Path | None, kind: str, negative: bool,
             replay_path: Path | None, seed: int, out: Path) -> None:
    """Render a simulated scribble for an image/label pair, or replay an
    annotation bundle exported from the browser UI."""
    image = load_image_png(image_path)
    if replay_path is not None:
        _replay_bundle(image, replay_path, out)
        _write_manifest(out, {"image": str(image_path), "replay": str(replay_path)})
        click.echo(f"replayed bundle -> {out}")
        return
    if label_path is None:
        raise click.UsageError("--label is required unless --replay is given")
    label = load_mask_png(label_path)
    region = label.complement() if negative else label
    params = ScribbleParams(max_scribble_pixels=max(label.shape))
    sim = {"line": sim_line_scribble, "centerline": sim_centerline_scribble,
           "contour": sim_contour_scribble}[kind]
    scribble = sim(region, SeededRng(seed), params, "neg" if negative else "pos")
    out.mkdir(parents=True, exist_ok=True)
    write_spg1(out / "scribble.spg1", scribble.data)
    overlay = np.stack([image.data, image.data, image.data])
    channel = 1 if not negative else 0
    overlay[channel] = np.maximum(overlay[channel], scribble.data)
    from PIL import Image as PILImage

    rgb = (np.clip(overlay.transpose(1, 2, 0), 0, 1) * 255).astype(np.uint8)
    PILImage.fromarray(rgb, mode="RGB").save(out / "overlay.png")
    _write_manifest(out, {"image": str(image_path), "label": str(label_path),
                          "kind": kind, "negative": negative, "seed": seed})
    click.echo(f"{kind} scribble ({scribble.support_size()} px) -> {out}")


@main.command()
@click.option("--data", "data_root", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True))
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
              help="Config overrides; flags win over the file.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def train(data_root: Path, config_path: Path | None, overrides: tuple[str, ...],
          seed: int, out: Path) -> None:
    """Train a model on a dataset directory."""
    parsed = {}
    for item in overrides:
        dotted, _, value = item.partition("=")
        if not value:
            raise click.UsageError(f"--set needs SECTION.KEY=VALUE, got {item!r}")
        parsed[dotted.strip()] = value.strip()
    config = load_train_config(config_path, parsed)
    index = load_index(data_root)
    result = train_loop(index, config, seed, out_dir=out,
                        log=lambda row: click.echo(
                            f"epoch {row['epoch']}: loss={row['loss']:.4f} "
                            f"train_dice={row['train_dice']:.3f} val_dice={row['val_dice']:.3f}"
                        ))
    (out / "config.ini").write_text(dump_train_config(config))
    _write_manifest(out, {"data": str(data_root), "seed": seed, "overrides": parsed})
    click.echo(f"trained {result.epochs_run} epochs in {result.seconds:.1f}s -> {out}/model.spwt")


@main.command("eval")
@click.option("--model", "model_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--data", "data_root", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--protocol", type=click.Choice([
    "center_clicks", "random_clicks", "warm_start",
    "line_scribbles", "centerline_scribbles", "contour_scribbles"]), required=True)
@click.option("--steps", default=5, show_default=True)
@click.option("--seeds", default=5, show_default=True)
@click.option("--split", default="test", show_default=True)
@click.option("--infer-size", default=128, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True, help="Parallel example workers.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def eval_cmd(model_path: Path, data_root: Path, protocol: str, steps: int, seeds: int,
             split: str, infer_size: int, seed: int, jobs: int, out: Path) -> None:
    """Run a simulated interaction protocol over a dataset split."""
    predictor = Predictor(load_weights(model_path), infer_size=infer_size)
    index = load_index(data_root)
    config = ProtocolConfig(name=protocol, steps=steps, seeds=seeds)
    report = run_protocol(predictor, index, config, SeededRng(seed), split=split, jobs=jobs)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    report.to_json(out / "report.json")
    _write_manifest(out, {"model": str(model_path), "data": str(data_root),
                          "protocol": protocol, "steps": steps, "seeds": seeds,
                          "split": split, "seed": seed})
    for step, value in report.mean_dice_by_step().items():
        click.echo(f"step {step}: mean dice {value:.4f}")


@main.command()
@click.option("--model", "model_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--trials", default=1000, show_default=True)
@click.option("--size", default=128, show_default=True)
@click.option("--infer-size", default=128, show_default=True)
@click.option("--multi-thread", is_flag=True, help="Allow BLAS to use all cores.")
def bench(model_path: Path, trials: int, size: int, infer_size: int, multi_thread: bool) -> None:
    """Measure single-prediction latency."""
    predictor = Predictor(load_weights(model_path), infer_size=infer_size)
    mean, std = latency_bench(
        predictor, trials=trials, side=size, single_thread=not multi_thread
    )
    click.echo(f"{mean:.4f} +/- {std:.4f} s/prediction over {trials} trials")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--model-dir", type=click.Path(path_type=Path), default=Path("models"),
              show_default=True)
@click.option("--infer-size", default=128, show_default=True)
@click.option("--max-sessions", default=64, show_default=True)
@click.option("--threads", default=0, show_default=True,
              help="Cap BLAS threads (0 keeps the library default).")
def serve(host: str, port: int, model_dir: Path, infer_size: int, max_sessions: int,
          threads: int) -> None:
    """Start the annotation service."""
    from .service import run_server

    if threads > 0:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=threads)
    click.echo(f"serving on http://{host}:{port} (models: {model_dir})")
    run_server(host=host, port=port, model_dir=model_dir,
               infer_size=infer_size, max_sessions=max_sessions)


@main.command()
@click.option("--model", "model_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--json", "as_json", is_flag=True)
def export(model_path: Path, as_json: bool) -> None:
    """Inspect a weight file."""
    weights = load_weights(model_path)
    info = {
        "path": str(model_path),
        "width": weights.width,
        "in_channels": weights.in_channels,
        "parameters": weights.parameter_count(),
        "payload_crc32": weights_crc(model_path),
        "tensors": {k: list(v.shape) for k, v in sorted(weights.tensors.items())},
    }
    if as_json:
        click.echo(json.dumps(info, indent=2))
    else:
        click.echo(f"{model_path}: width={info['width']} params={info['parameters']} "
                   f"crc32={info['payload_crc32']:#010x}")
        for name, shape in info["tensors"].items():
            click.echo(f"  {name}: {shape}")


def run() -> None:
    try:
        main(standalone_mode=False)
    except click.exceptions.Exit as err:
        sys.exit(err.exit_code)
    except click.UsageError as err:
        err.show()
        sys.exit(2)
    except click.ClickException as err:
        err.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(130)
    except Exception as err:  # runtime errors exit 1 with a structured message
        click.echo(f"error: {err}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()
