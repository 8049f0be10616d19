"""Text config files (INI key=value sections) for every tunable knob.

Sections map onto the config dataclasses:

  [train]    width, lr, epochs, synth_prob, probe_every, ...
  [episode]  steps, batch_size
  [prompt]   enabled, scribble_kinds, click_strategies, n_min, n_max, ...
  [scribble] blur_sigma, contour_threshold_range, max_scribble_pixels, ...
  [break]    noise_mean, noise_std, blur_sigma
  [click]    border_threshold_range, min_separation, ...
  [synth]    synth_prob, scale_max, min_component_size, pre_blur_sigma
  [augment]  affine_prob, affine_degrees, ... (the augmentation table)
  [loss]     dice_weight, focal_weight, focal_gamma, dice_smooth

Unknown sections or keys are rejected. Tuples are comma-separated.
"""

from __future__ import annotations

import configparser
import dataclasses
import types
import typing
from pathlib import Path

from .augment import AugmentConfig
from .nn.losses import LossConfig
from .promptsim import BreakMaskParams, ClickParams, PromptConfig, ScribbleParams
from .synthlabel import SynthConfig
from .training import EpisodeConfig, TrainConfig

_SECTION_ORDER = (
    "train", "episode", "prompt", "scribble", "break", "click", "synth", "augment", "loss",
)


def _parse_value(raw: str, annotation) -> object:
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union or isinstance(annotation, types.UnionType):  # Optional[...]
        non_none = [a for a in args if a is not type(None)]
        if raw.strip().lower() in ("none", ""):
            return None
        return _parse_value(raw, non_none[0])
    if annotation is bool:
        value = raw.strip().lower()
        if value in ("1", "true", "yes", "on"):
            return True
        if value in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse {raw!r} as bool")
    if annotation is int:
        return int(raw)
    if annotation is float:
        return float(raw)
    if annotation is str:
        return raw.strip()
    if origin is tuple:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_parse_value(p, args[0]) for p in parts)
        if len(parts) != len(args):
            raise ValueError(f"expected {len(args)} comma-separated values, got {raw!r}")
        return tuple(_parse_value(p, a) for p, a in zip(parts, args))
    raise ValueError(f"unsupported config value type {annotation!r}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def _fields_of(cls) -> dict[str, object]:
    hints = typing.get_type_hints(cls)
    return {
        f.name: hints[f.name]
        for f in dataclasses.fields(cls)
        if not dataclasses.is_dataclass(hints.get(f.name))
    }


def _build(cls, section: dict[str, str], extra: dict | None = None):
    hints = _fields_of(cls)
    kwargs = dict(extra or {})
    for key, raw in section.items():
        if key not in hints:
            raise ValueError(f"unknown key {key!r} for [{_section_name(cls)}]")
        kwargs[key] = _parse_value(raw, hints[key])
    return cls(**kwargs)


def _section_name(cls) -> str:
    return {
        TrainConfig: "train", EpisodeConfig: "episode", PromptConfig: "prompt",
        ScribbleParams: "scribble", BreakMaskParams: "break", ClickParams: "click",
        SynthConfig: "synth", AugmentConfig: "augment", LossConfig: "loss",
    }[cls]


def load_train_config(
    path: str | Path | None = None,
    overrides: dict[str, str] | None = None,
) -> TrainConfig:
    """Parse a config file plus dotted overrides like {"train.lr": "0.001"}."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if path is not None:
        text = Path(path).read_text()
        parser.read_string(text)
    sections: dict[str, dict[str, str]] = {
        name: dict(parser[name]) for name in parser.sections()
    }
    for name in sections:
        if name not in _SECTION_ORDER:
            raise ValueError(f"unknown config section [{name}]")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in _SECTION_ORDER or not key:
            raise ValueError(f"override {dotted!r} must look like section.key")
        sections.setdefault(section, {})[key] = value

    break_params = _build(BreakMaskParams, sections.get("break", {}))
    scribble = _build(
        ScribbleParams, sections.get("scribble", {}), {"break_params": break_params}
    )
    click = _build(ClickParams, sections.get("click", {}))
    prompt = _build(
        PromptConfig, sections.get("prompt", {}), {"scribble": scribble, "click": click}
    )
    episode = _build(EpisodeConfig, sections.get("episode", {}), {"prompt": prompt})
    augment = _build(AugmentConfig, sections.get("augment", {}))
    loss = _build(LossConfig, sections.get("loss", {}))
    synth = _build(SynthConfig, sections.get("synth", {}))
    train_extra = {"episode": episode, "augment": augment, "loss": loss, "synth": synth}
    return _build(TrainConfig, sections.get("train", {}), train_extra)


def dump_train_config(config: TrainConfig) -> str:
    """Render a config back to the INI text format."""
    parser = configparser.ConfigParser()
    parser.optionxform = str

    def put(name: str, obj, skip=()):
        hints = _fields_of(type(obj))
        parser[name] = {
            key: _format_value(getattr(obj, key)) for key in hints if key not in skip
        }

    put("train", config)
    put("episode", config.episode)
    put("synth", config.synth)
    put("prompt", config.episode.prompt)
    put("scribble", config.episode.prompt.scribble)
    put("break", config.episode.prompt.scribble.break_params)
    put("click", config.episode.prompt.click)
    put("augment", config.augment)
    put("loss", config.loss)
    import io

    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
