"""Flat ``key = value`` run configuration.

Lines starting with ``#`` and blank lines are ignored. Every key has a
default except ``data.source``; unknown keys are an error. List values are
comma separated.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import ConfigError
from .train import TrainConfig


def _floats(text: str) -> List[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _names(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


# key -> (parser, default)
SCHEMA = {
    "data.source": (str, None),
    "data.path": (str, ""),
    "data.columns": (_names, []),
    "data.stride": (int, 0),
    "synth.n_train": (int, 250),
    "synth.n_val": (int, 750),
    "synth.n_test": (int, 10000),
    "synth.alpha1": (float, 1.5),
    "synth.beta": (float, 0.6),
    "model.alpha": (_opt_float, None),
    "model.alpha_learnable": (_bool, True),
    "model.likelihood": (str, "projected_normal"),
    "model.latent_dim": (int, 4),
    "train.epochs": (int, 5000),
    "train.lr_radius": (float, 1e-4),
    "train.lr_angular": (float, 1e-5),
    "train.batch_size": (int, 32),
    "train.mc_samples": (int, 1),
    "train.grad_clip": (float, 10.0),
    "train.adam_beta1": (float, 0.9),
    "train.adam_beta2": (float, 0.999),
    "train.adam_eps": (float, 1e-8),
    "eval.thresholds": (_floats, []),
    "eval.quantiles": (_floats, [0.9, 0.99]),
    "eval.independence_levels": (_floats, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
    "eval.upper_fraction": (float, 0.1),
    "eval.ot_max_points": (int, 5000),
    "eval.n_k": (int, 0),
    "eval.permutations": (int, 100),
    "eval.repetitions": (int, 10),
    "seed": (int, 0),
    "out_dir": (str, "out"),
}

SOURCES = ("synth", "csv")


@dataclass
class RunConfig:
    values: Dict[str, object] = field(default_factory=dict)
    text: str = ""

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def digest(self) -> str:
        """Hash of the resolved settings that affect results (not formatting or out_dir)."""
        blob = "\n".join(f"{k}={self.values[k]!r}" for k in sorted(self.values) if k != "out_dir")
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def train_config(self) -> TrainConfig:
        kw = {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("train.")}
        return TrainConfig(seed=self.seed, **kw)


def parse_config(text: str, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    raw: Dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
        raw[key] = value
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = value
    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parser(raw[key])
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {raw[key]!r}") from None
        else:
            values[key] = default
    if values["data.source"] is None:
        raise ConfigError("data.source is required (synth or csv)")
    if values["data.source"] not in SOURCES:
        raise ConfigError(f"data.source must be one of {SOURCES}")
    if values["data.source"] == "csv" and not values["data.path"]:
        raise ConfigError("data.source = csv needs data.path")
    if values["model.likelihood"] not in ("projected_normal", "dirichlet"):
        raise ConfigError("model.likelihood must be projected_normal or dirichlet")
    if values["model.alpha"] is not None and values["model.alpha"] <= 0:
        raise ConfigError("model.alpha must be positive")
    if values["data.stride"] < 0:
        raise ConfigError("data.stride must be >= 0")
    return RunConfig(values, text)


def load_config(path, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
