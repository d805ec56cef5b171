"""Flat ``section.key = value`` experiment configuration, presets and builders.

Every key has a type and a default; a preset is just a set of overrides.
Expanding a preset and dumping it yields a file that, read back, gives the
same configuration (and hence the same run).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from perihorizon.datagen import ForwardProblem1D, PlateProblem
from perihorizon.kernels import KernelSpec
from perihorizon.network import Architecture
from perihorizon.nonlocal_op import ResidualConfig
from perihorizon.training import PinnModel, Schedule, TrainConfig


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


SCHEMA: dict[str, tuple[type, object]] = {
    "problem.dim": (int, 1),
    "problem.preset": (str, "custom"),
    "kernel.type": (str, "tent"),
    "kernel.lambda": (float, 1.0),
    "kernel.mu": (float, 1.0),
    "kernel.delta_true": (float, 1.0),
    "domain.lo": (float, -4.0),
    "domain.hi": (float, 4.0),
    "domain.final_time": (float, 1.0),
    "plate.a": (float, 1.0),
    "plate.b": (float, 1.0),
    "plate.c": (float, 1.0),
    "plate.amplitude": (float, -0.05),
    "data.nx": (int, 50),
    "data.nt": (int, 20),
    "data.refine": (int, 8),
    "data.grid_2d": (int, 10),
    "data.ghost_samples": (int, 16),
    "network.layers": (int, 8),
    "network.width": (int, 20),
    "network.normalize_inputs": (bool, False),
    "training.delta_init": (float, 1.1),
    "training.epochs": (int, 1000),
    "training.optimizer": (str, "adam"),
    "training.loss_variant": (str, "mean_squared"),
    "training.schedule": (str, "constant"),
    "training.lr": (float, 1e-2),
    "training.lr_end": (float, 1e-4),
    "training.cycle": (int, 100),
    "training.degree": (float, 3.0),
    "training.decay_steps": (int, 1000),
    "training.warmup": (int, 0),
    "training.seed": (int, 0),
    "quad.sign_convention": (str, "standard"),
    "quad.nodes_1d": (int, 16),
    "quad.nodes_radial": (int, 8),
    "quad.nodes_angular": (int, 16),
    "diagnostics.gap_tol": (float, 0.05),
    "diagnostics.transient_fraction": (float, 0.1),
    "output.dir": (str, "runs"),
}

PRESETS: dict[str, dict[str, object]] = {
    "data2": {
        "problem.dim": 1,
        "kernel.type": "vshape",
        "kernel.lambda": 0.6,
        "kernel.delta_true": 10.0,
        "domain.lo": -40.0,
        "domain.hi": 40.0,
        "training.delta_init": 10.1,
        "training.schedule": "constant",
        "training.lr": 1e-2,
    },
    "data3": {
        "problem.dim": 1,
        "kernel.type": "distributed",
        "kernel.lambda": 10.0,
        "kernel.delta_true": 1.0,
        "domain.lo": -10.0,
        "domain.hi": 10.0,
        "training.delta_init": 1.5,
        "training.schedule": "constant",
        "training.lr": 1e-2,
        "training.lr_end": 1e-4,
        "training.cycle": 100,
        "training.degree": 3.0,
    },
    "data8": {
        "problem.dim": 1,
        "kernel.type": "tent",
        "kernel.delta_true": 1.0,
        "domain.lo": -4.0,
        "domain.hi": 4.0,
        "training.delta_init": 1.1,
        "training.schedule": "cosine",
        "training.lr": 1e-4,
        "training.decay_steps": 1000,
    },
    "ex2d": {
        "problem.dim": 2,
        "kernel.type": "plate",
        "kernel.delta_true": 0.1,
        "domain.lo": 0.0,
        "domain.hi": 1.0,
        "training.delta_init": 0.095,
        "training.schedule": "cosine",
        "training.lr": 1e-3,
        "training.decay_steps": 1000,
        "diagnostics.gap_tol": 0.002,
    },
}


def _coerce(key: str, raw):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    kind = SCHEMA[key][0]
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return lowered in ("true", "1", "yes")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from exc
    return text


def defaults() -> dict:
    return {k: v for k, (_, v) in SCHEMA.items()}


def expand_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = defaults()
    cfg.update(PRESETS[name])
    cfg["problem.preset"] = name
    return cfg


def parse_text(text: str, base: dict | None = None) -> dict:
    """Apply ``key = value`` lines on top of ``base`` (defaults when None).

    A ``problem.preset`` line, if present, is expanded first so that the
    remaining lines override it regardless of their order.
    """
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries.append((key, value))
    cfg = dict(base) if base is not None else defaults()
    for key, value in entries:
        if key == "problem.preset" and value != "custom":
            cfg = expand_preset(value)
    for key, value in entries:
        cfg[key] = _coerce(key, value)
    return cfg


def dump(cfg: dict) -> str:
    return "".join(f"{k} = {_format(cfg[k])}\n" for k in SCHEMA)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load(path=None, preset: str | None = None, overrides: dict | None = None) -> dict:
    """Resolve a configuration: preset, then file contents, then explicit overrides."""
    cfg = expand_preset(preset) if preset else defaults()
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = parse_text(text, cfg)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = _coerce(key, value)
    validate(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dump(cfg).encode()).hexdigest()[:12]


def validate(cfg: dict) -> None:
    missing = [k for k in SCHEMA if k not in cfg]
    if missing:
        raise ConfigError(f"missing keys {missing}")
    if cfg["problem.dim"] not in (1, 2):
        raise ConfigError("problem.dim must be 1 or 2")
    if cfg["training.delta_init"] <= 0:
        raise ConfigError("training.delta_init must be positive")
    if cfg["domain.hi"] <= cfg["domain.lo"]:
        raise ConfigError("domain.hi must exceed domain.lo")
    for key in ("data.nx", "data.nt", "data.refine", "data.grid_2d", "network.layers", "network.width"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")
    try:
        if cfg["problem.dim"] == 1:
            problem(cfg)
        train_config(cfg)
        model(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- builders ----------------------------------------------------------------


def kernel(cfg: dict) -> KernelSpec | None:
    kind = cfg["kernel.type"]
    lam, delta = cfg["kernel.lambda"], cfg["kernel.delta_true"]
    if cfg["problem.dim"] == 2:
        return None
    if kind == "gauss":
        return KernelSpec.gauss(lam, cfg["kernel.mu"])
    if kind == "vshape":
        return KernelSpec.vshape(lam, delta)
    if kind == "distributed":
        return KernelSpec.distributed(lam, delta)
    if kind == "tent":
        return KernelSpec.tent(delta)
    raise ConfigError(f"unknown kernel.type {kind!r} for a 1D problem")


def problem(cfg: dict):
    if cfg["problem.dim"] == 2:
        return PlateProblem(
            delta_true=cfg["kernel.delta_true"],
            a=cfg["plate.a"],
            b=cfg["plate.b"],
            c=cfg["plate.c"],
            amplitude=cfg["plate.amplitude"],
        )
    return ForwardProblem1D(
        kernel=kernel(cfg),
        domain=(cfg["domain.lo"], cfg["domain.hi"]),
        final_time=cfg["domain.final_time"],
        sign_convention=cfg["quad.sign_convention"],
    )


def model(cfg: dict) -> PinnModel:
    dim = cfg["problem.dim"]
    if dim == 1:
        box_lo, box_hi = (cfg["domain.lo"], 0.0), (cfg["domain.hi"], cfg["domain.final_time"])
        spatial = (cfg["domain.lo"], cfg["domain.hi"])
    else:
        box_lo, box_hi = (0.0, 0.0), (cfg["plate.a"], cfg["plate.b"])
        spatial = None
    norm = cfg["network.normalize_inputs"]
    arch = Architecture(
        hidden_layers=cfg["network.layers"],
        hidden_width=cfg["network.width"],
        input_lo=box_lo if norm else None,
        input_hi=box_hi if norm else None,
    )
    residual = ResidualConfig(
        sign_convention=cfg["quad.sign_convention"],
        quad_nodes_1d=cfg["quad.nodes_1d"],
        quad_nodes_radial=cfg["quad.nodes_radial"],
        quad_nodes_angular=cfg["quad.nodes_angular"],
        wave_speed=cfg["plate.c"],
        spatial_domain=spatial,
        plate=(cfg["plate.a"], cfg["plate.b"]),
        source_amplitude=cfg["plate.amplitude"],
    )
    return PinnModel(arch, residual, kernel(cfg), dim)


def schedule(cfg: dict) -> Schedule:
    return Schedule(
        kind=cfg["training.schedule"],
        lr=cfg["training.lr"],
        lr_end=cfg["training.lr_end"],
        cycle=cfg["training.cycle"],
        degree=cfg["training.degree"],
        decay_steps=cfg["training.decay_steps"],
        warmup=cfg["training.warmup"],
    )


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["training.epochs"],
        optimizer=cfg["training.optimizer"],
        loss_variant=cfg["training.loss_variant"],
        schedule=schedule(cfg),
        seed=cfg["training.seed"],
        delta_init=cfg["training.delta_init"],
    )


def collocation_counts(cfg: dict) -> tuple:
    if cfg["problem.dim"] == 2:
        return (cfg["data.grid_2d"], cfg["data.ghost_samples"])
    return (cfg["data.nx"], cfg["data.nt"], cfg["data.refine"])


@dataclass(frozen=True)
class Experiment:
    """A validated configuration together with the objects built from it."""

    values: dict

    @classmethod
    def from_sources(cls, path=None, preset=None, overrides=None) -> Experiment:
        return cls(load(path, preset, overrides))

    @property
    def hash(self) -> str:
        return config_hash(self.values)

    def problem(self):
        return problem(self.values)

    def model(self) -> PinnModel:
        return model(self.values)

    def train_config(self) -> TrainConfig:
        return train_config(self.values)

    def counts(self) -> tuple:
        return collocation_counts(self.values)
