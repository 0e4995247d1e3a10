"""Synthetic heavy-tailed data and the river-discharge CSV loader."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import special_fn
from .distributions import DirichletParams, sample_dirichlet
from .errors import ConfigError, DataError
from .polar import compose
from .rng import substreams


@dataclass
class SyntheticConfig:
    n_train: int = 250
    n_val: int = 750
    n_test: int = 10000
    alpha1: float = 1.5
    beta: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ConfigError("synthetic split sizes must be >= 1")
        if not (self.alpha1 > 0 and self.beta > 0):
            raise ConfigError("alpha1 and beta must be positive")


def synth_radius(n: int, cfg: SyntheticConfig, rng) -> np.ndarray:
    """2U·Z with U ~ Uniform(0, 1) and Z ~ InvGamma(alpha1, beta)."""
    u = rng.random(n)
    z = cfg.beta / special_fn.sample_gamma(cfg.alpha1, 1.0, rng, size=n)
    return 2.0 * u * z


def angle_concentration(r) -> np.ndarray:
    """Dirichlet parameters (a1, a1, a2, a2, a2) at radius r; rows for vector r."""
    r = np.asarray(r, dtype=float)
    t = np.minimum(1.0, 1.0 / (2.0 * r))
    a1 = 3.0 * (2.0 - t)
    a2 = 3.0 * (1.0 + t)
    return np.stack([a1, a1, a2, a2, a2], axis=-1)


def synth_angle(r, rng) -> np.ndarray:
    """One 5-dimensional simplex draw per radius (a single row for scalar r)."""
    return sample_dirichlet(DirichletParams(angle_concentration(r)), rng)


def synth_sample(n: int, cfg: SyntheticConfig, rng) -> np.ndarray:
    rng_r, rng_a = substreams(rng, 2)
    r = synth_radius(n, cfg, rng_r)
    return compose(r, synth_angle(r, rng_a))


def synth_dataset(cfg: SyntheticConfig, rng) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(train, val, test) matrices drawn from disjoint child streams of ``rng``."""
    s_train, s_val, s_test = substreams(rng, 3)
    return (synth_sample(cfg.n_train, cfg, s_train),
            synth_sample(cfg.n_val, cfg, s_val),
            synth_sample(cfg.n_test, cfg, s_test))


@dataclass
class DanubeConfig:
    csv_path: str
    station_ids: List[int] = field(default_factory=lambda: [23, 24, 25, 26, 27])
    train_stride_days: int = 25
    column_names: Optional[List[str]] = None  # overrides the "station_<id>" naming

    def __post_init__(self):
        if self.train_stride_days < 1:
            raise ConfigError("train_stride_days must be >= 1")

    def columns(self) -> List[str]:
        if self.column_names is not None:
            return list(self.column_names)
        return [f"station_{i}" for i in self.station_ids]


def read_matrix_csv(path, columns: Optional[List[str]] = None) -> Tuple[List[str], np.ndarray]:
    """Read a header-plus-floats CSV, optionally selecting columns by name.

    Raises DataError naming the row (1-based file line) and column for
    missing or non-numeric cells.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if columns is None:
            columns = header
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        pos = [header.index(c) for c in columns]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for c, j in zip(columns, pos):
                cell = row[j].strip() if j < len(row) else ""
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: line {line_no}, column {c}: "
                                    f"non-numeric value {cell!r}") from None
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        i, j = bad[0]
        raise DataError(f"{path}: line {i + 2}, column {columns[j]}: non-finite value")
    return list(columns), data


def write_matrix_csv(path, data, columns: Optional[List[str]] = None):
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if columns is None:
        columns = [f"x{j + 1}" for j in range(data.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def danube_load(cfg: DanubeConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Every ``stride``-th day (from day 0) is training data, the rest test."""
    cols, data = read_matrix_csv(cfg.csv_path, cfg.columns())
    neg = np.argwhere(data < 0)
    if neg.size:
        i, j = neg[0]
        raise DataError(f"{cfg.csv_path}: line {i + 2}, column {cols[j]}: negative discharge")
    train_idx = np.arange(0, data.shape[0], cfg.train_stride_days)
    mask = np.zeros(data.shape[0], dtype=bool)
    mask[train_idx] = True
    train, test = data[mask], data[~mask]
    if test.shape[0] == 0:
        raise ConfigError("train stride leaves no test rows")
    if train.shape[0] == 0:
        raise DataError(f"{cfg.csv_path}: no data rows")
    return train, test
