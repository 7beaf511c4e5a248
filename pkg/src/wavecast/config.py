"""Flat ``section.key=value`` run configuration with strict key checking.

Example::

    seed=7
    wave.hs=0.18
    wave.tp=2.0
    body.rw=0.5
    train.max_epochs=20
    train.patience=none

Every key has a default (see :func:`default_entries`); an unknown key is an
error that names it.  Randomness comes from the single ``seed`` key, fanned
out per subsystem by fixed labels.
"""

from __future__ import annotations

import types
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .errors import ConfigurationError
from .model import ModelConfig
from .seeding import derive_seed
from .sim.body import FloatBody
from .sim.flume import FlumeLayout, TransmissionModel
from .sim.mooring import MooringLineSpec
from .sim.waves import WaveCondition
from .training import TrainConfig

SEED_LABELS = {"wave": "wave-components", "model": "model-init", "train": "train-loop"}


@dataclass(frozen=True)
class BodyOptions:
    width: float = 0.5
    height: float = 0.2
    rw: float = 0.5
    x0: float = 0.0

    def build(self) -> FloatBody:
        return FloatBody.from_rw(self.rw, width=self.width, height=self.height, x0=self.x0)


@dataclass(frozen=True)
class SimOptions:
    duration: float = 500.0
    dt: float = 0.05


# (section, dataclass type, fields left out of the file because seeding owns them)
_SECTIONS = {
    "wave": (WaveCondition, {"seed"}),
    "body": (BodyOptions, set()),
    "mooring": (MooringLineSpec, set()),
    "transmission": (TransmissionModel, set()),
    "layout": (FlumeLayout, set()),
    "sim": (SimOptions, set()),
    "model": (ModelConfig, {"seed", "dropout_rate"}),
    "train": (TrainConfig, {"seed"}),
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    wave: WaveCondition = field(default_factory=WaveCondition)
    body: BodyOptions = field(default_factory=BodyOptions)
    mooring: MooringLineSpec = field(default_factory=MooringLineSpec)
    transmission: TransmissionModel = field(default_factory=TransmissionModel)
    layout: FlumeLayout = field(default_factory=FlumeLayout)
    sim: SimOptions = field(default_factory=SimOptions)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed))

    # seeded views used by the commands
    def wave_condition(self) -> WaveCondition:
        return replace(self.wave, seed=derive_seed(self.seed, SEED_LABELS["wave"]))

    def model_config(self) -> ModelConfig:
        return replace(self.model, seed=derive_seed(self.seed, SEED_LABELS["model"]), dropout_rate=self.train.dropout)

    def train_config(self) -> TrainConfig:
        return replace(self.train, seed=derive_seed(self.seed, SEED_LABELS["train"]))

    def mooring_specs(self) -> tuple[MooringLineSpec, MooringLineSpec]:
        return (self.mooring, self.mooring)

    def entries(self) -> dict[str, str]:
        out = {"seed": str(self.seed)}
        for section, (cls, hidden) in _SECTIONS.items():
            obj = getattr(self, section)
            for f in fields(cls):
                if f.name not in hidden:
                    out[f"{section}.{f.name.lower()}"] = _format(getattr(obj, f.name))
        return out

    def resolved_text(self) -> str:
        lines = [f"# wavecast {__version__} resolved configuration"]
        lines += [f"{k}={v}" for k, v in sorted(self.entries().items())]
        return "\n".join(lines) + "\n"


def default_entries() -> dict[str, str]:
    return RunConfig().entries()


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _field_type(cls, name: str):
    hints = typing.get_type_hints(cls)
    return hints[name]


def _parse_value(text: str, tp, key: str):
    text = text.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if text.lower() == "none" and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _parse_value(text, inner[0], key)
    if tp is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"{key}: expected true/false, got {text!r}")
    if tp is tuple or origin is tuple:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        try:
            return tuple(int(p) if key.endswith("target_indices") else float(p) for p in parts)
        except ValueError:
            raise ConfigurationError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from None
    try:
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot read {text!r} as {tp.__name__}") from None
    if tp is str:
        return text
    raise ConfigurationError(f"{key}: unsupported field type {tp}")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    overrides: dict[str, dict] = {s: {} for s in _SECTIONS}
    seed = 0
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ConfigurationError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key in seen:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if key == "seed":
            seed = _parse_value(value, int, key)
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        cls, hidden = _SECTIONS[section]
        match = {f.name.lower(): f.name for f in fields(cls) if f.name not in hidden}
        if name not in match:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        overrides[section][match[name]] = _parse_value(value, _field_type(cls, match[name]), key)
    built = {}
    for section, (cls, _) in _SECTIONS.items():
        try:
            built[section] = cls(**overrides[section])
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"{source}: invalid [{section}] settings: {exc}") from exc
    return RunConfig(seed=seed, **built)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"config file {p} does not exist")
    return parse_config(p.read_text(), str(p))
