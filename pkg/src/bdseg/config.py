"""Flat ``key = value`` run configuration with a validated key registry."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .nets.model import Architecture
from .nets.train import TrainConfig
from .synth import ShapeParams


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _opt_float(s: str):
    return None if s.lower() == "auto" else _float(s)


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _floats(s: str) -> tuple:
    vals = tuple(_float(p) for p in s.split(",") if p.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _choice(*options):
    def parse(s: str) -> str:
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


@dataclass(frozen=True)
class Key:
    name: str
    parse: object
    default: object
    help: str


REGISTRY = {k.name: k for k in (
    # training
    Key("lambda", _float, 1.0, "decay rate of the distance encoding exp(-lambda*D)"),
    Key("gamma", _float, 1.0, "weight of the classification loss at the end of training"),
    Key("lr", _float, 1e-4, "Adam learning rate"),
    Key("steps", int, 3000, "training steps N (updates run for tau = 0..N)"),
    Key("batch", int, 8, "mini-batch size"),
    Key("seed", int, 0, "seed for weight init and batch order"),
    Key("size", int, 64, "image side length in pixels"),
    Key("init", _choice("paper", "xavier", "he", "hybrid"), "he", "filter initialisation"),
    Key("head_prior", _bool, True, "start the regression head bias at logit(mean target)"),
    Key("pixel_width", int, 4, "channels of the pixel net's conv layers"),
    Key("pixel_filter", int, 3, "filter size of the pixel net's conv layers (odd)"),
    Key("mode", _choice("end-to-end", "boundary"), "end-to-end", "train both nets or the boundary net only"),
    Key("eval_every", int, 0, "validation Dice every k steps (0: never)"),
    # synthetic shapes
    Key("data_seed", int, 0, "seed of the synthetic shape generator"),
    Key("center_jitter", _opt_float, None, "max centre offset in pixels (auto: 0.08*size)"),
    Key("semi_axis_min", _opt_float, None, "smallest semi-axis in pixels (auto: max(4, 0.16*size))"),
    Key("semi_axis_max", _opt_float, None, "largest semi-axis in pixels (auto: 0.30*size)"),
    Key("rotation_max", _float, math.pi, "rotation range in radians"),
    Key("perturbation", _float, 0.15, "radial harmonic amplitude, fraction of radius (< 0.3)"),
    Key("interior_gradient", _float, 40.0, "intensity ramp across the object"),
    Key("speckle", _float, 0.3, "multiplicative speckle strength"),
    Key("background_texture", _float, 30.0, "background texture strength"),
    # experiments
    Key("n_train", int, 40, "generated training images when no manifest is given"),
    Key("n_test", int, 10, "generated test images when no manifest is given"),
    Key("test_start", int, 1000, "first generator index of the test images"),
    Key("augment", _bool, True, "apply shape-registration augmentation to the training set"),
    Key("lambdas", _floats, (0.01, 0.1, 1.0, 10.0), "comma-separated lambda sweep for ablate-lambda"),
    Key("timing_size", int, 321, "side length of the compare-paths timing images"),
    Key("neighbors", int, 0, "k-nearest-neighbour candidate edges for the spanning tree (0: complete graph)"),
    # paths
    Key("train_manifest", str, "", "manifest of training pairs (empty: generate)"),
    Key("test_manifest", str, "", "manifest of test pairs (empty: generate)"),
    Key("model", str, "", "model file (BNET)"),
)}


class RunConfig:
    """Values for every registry key; unknown keys are rejected."""

    def __init__(self, values: dict | None = None):
        self._values = {name: k.default for name, k in REGISTRY.items()}
        for name, value in (values or {}).items():
            self.set(name, value)

    def set(self, name: str, value):
        if name not in REGISTRY:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(value, str):
            try:
                value = REGISTRY[name].parse(value.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {value!r} ({exc})") from None
        self._values[name] = value

    def __getitem__(self, name):
        return self._values[name]

    def get(self, name, default=None):
        return self._values.get(name, default)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls()
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            if key in seen:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            seen.add(key)
            try:
                cfg.set(key, value)
            except ConfigError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc.detail}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.parse(text, str(path))

    def dumps(self) -> str:
        out = []
        for name, value in self._values.items():
            if value is None:
                value = "auto"
            elif isinstance(value, tuple):
                value = ",".join(f"{v:g}" for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            out.append(f"{name} = {value}")
        return "\n".join(out) + "\n"

    def train_config(self, **overrides) -> TrainConfig:
        cfg = TrainConfig(steps=self["steps"], gamma=self["gamma"], lam=self["lambda"], lr=self["lr"],
                          batch=self["batch"], seed=self["seed"], image_size=self["size"],
                          init=self["init"], mode=self["mode"], eval_every=self["eval_every"],
                          head_prior=self["head_prior"],
                          arch=Architecture(pixel=self["pixel_width"], pixel_filter=self["pixel_filter"]))
        for k, v in overrides.items():
            setattr(cfg, k, v)
        return cfg

    def shape_params(self, size: int | None = None) -> ShapeParams:
        return ShapeParams(size=size or self["size"], center_jitter=self["center_jitter"],
                           semi_axis_min=self["semi_axis_min"], semi_axis_max=self["semi_axis_max"],
                           rotation_max=self["rotation_max"], perturbation=self["perturbation"],
                           interior_gradient=self["interior_gradient"], speckle=self["speckle"],
                           background_texture=self["background_texture"], seed=self["data_seed"])


def keys_help() -> str:
    width = max(len(n) for n in REGISTRY)
    lines = ["config keys (key = value, one per line, # comments):"]
    for name, k in REGISTRY.items():
        default = k.default
        if default is None:
            default = "auto"
        elif isinstance(default, tuple):
            default = ",".join(f"{v:g}" for v in default)
        elif default == "":
            default = '""'
        lines.append(f"  {name:<{width}}  {k.help} [default: {default}]")
    return "\n".join(lines)
