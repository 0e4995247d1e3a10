"""Adam with global-norm clipping and the two-phase training loops."""

import csv
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Optional

import numpy as np

from . import angular_vae, radius_vae
from .errors import ConfigError, TrainingError
from .polar import PolarDataset, polar_decompose
from .rng import stream


@dataclass
class TrainConfig:
    epochs: int = 5000
    lr_radius: float = 1e-4
    lr_angular: float = 1e-5
    batch_size: int = 32
    mc_samples: int = 1
    seed: int = 0
    grad_clip: float = 10.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        for f in fields(self):
            if f.name == "seed":
                continue
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"train config: {f.name} must be positive, got {v!r}")
        if not self.adam_beta1 < 1 or not self.adam_beta2 < 1:
            raise ConfigError("train config: Adam betas must be < 1")


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def clip_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> Dict[str, np.ndarray]:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if not np.isfinite(norm):
        bad = next(k for k, g in grads.items() if not np.all(np.isfinite(g)))
        raise TrainingError(f"non-finite gradient for {bad}")
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState,
              config: TrainConfig, lr: Optional[float] = None) -> AdamState:
    """In-place Adam update of ``params`` (bias-corrected, clipped first)."""
    lr = config.lr_radius if lr is None else lr
    grads = clip_global_norm(grads, config.grad_clip)
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)
    return state


@dataclass
class History:
    loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    alpha: List[float] = field(default_factory=list)


def _batches(n: int, batch_size: int, rng):
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def _check_batch(n: int, config: TrainConfig):
    if n == 0:
        raise ConfigError("cannot train on an empty data set")
    if config.batch_size > n:
        raise ConfigError(f"batch_size {config.batch_size} exceeds data set size {n}")


def fit(step: Callable, params: Dict[str, np.ndarray], n: int, config: TrainConfig, lr: float,
        label: str, project: Optional[Callable[[], None]] = None,
        on_epoch: Optional[Callable[[int, float], None]] = None) -> History:
    """Generic epoch loop: reshuffle, ``step(idx, rng) -> (loss, grads)``, Adam update.

    Shuffling and Monte Carlo noise share one stream derived from
    ``(config.seed, label)``, so a run is reproducible from the seed alone.
    """
    _check_batch(n, config)
    rng = stream(config.seed, label)
    state = AdamState()
    hist = History()
    for epoch in range(config.epochs):
        losses = []
        for idx in _batches(n, config.batch_size, rng):
            loss, grads = step(idx, rng)
            adam_step(params, grads, state, config, lr)
            if project is not None:
                project()
            losses.append(loss)
        hist.loss.append(float(np.mean(losses)))
        if on_epoch is not None:
            on_epoch(epoch, hist.loss[-1])
    return hist


def train_radius(model: radius_vae.RadiusVaeModel, radii, config: TrainConfig,
                 val_radii=None, eval_every: int = 0,
                 callback: Optional[Callable[[int, float], None]] = None):
    """Minibatch Adam on the radius loss; returns ``(model, History)``.

    ``val_radii`` is only ever scored (every ``eval_every`` epochs, L = 64).
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
        raise ConfigError("radii must be finite and positive")
    val_rng = stream(config.seed, "train/radius/val")
    alphas, val_losses = [], []

    def step(idx, rng):
        return radius_vae.elbo_radius(model, radii[idx], L=config.mc_samples, rng=rng)

    def on_epoch(epoch, loss):
        alphas.append(float(model.alpha))
        if val_radii is not None and eval_every and (epoch + 1) % eval_every == 0:
            val_losses.append(radius_vae.evaluate_elbo(model, val_radii, val_rng))
        if callback is not None:
            callback(epoch, loss)

    hist = fit(step, model.parameters(), radii.size, config, config.lr_radius,
               "train/radius", model.project, on_epoch)
    hist.alpha = alphas
    hist.val_loss = val_losses
    return model, hist


def train_angular(model: angular_vae.AngularVaeModel, polar: PolarDataset, config: TrainConfig,
                  callback: Optional[Callable[[int, float], None]] = None):
    """Minibatch Adam on the angular loss; returns ``(model, History)``."""
    def step(idx, rng):
        return angular_vae.elbo_angular(model, polar.angles[idx], polar.radii[idx],
                                        L=config.mc_samples, rng=rng)

    hist = fit(step, model.parameters(), len(polar), config, config.lr_angular,
               "train/angular", None, callback)
    return model, hist


def train_full(radius_model, angular_model, data, config: TrainConfig):
    """Decompose, train the radius model, then the angular model.

    Returns ``(radius_model, angular_model, radius_history, angular_history)``.
    """
    polar = polar_decompose(data)
    radius_model, h_r = train_radius(radius_model, polar.radii, config)
    angular_model, h_a = train_angular(angular_model, polar, config)
    return radius_model, angular_model, h_r, h_a


def write_loss_csv(path, radius_hist: Optional[History], angular_hist: Optional[History]):
    """One row per epoch; a missing phase leaves its column empty."""
    r = radius_hist.loss if radius_hist else []
    a = angular_hist.loss if angular_hist else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss_radius", "loss_angular"])
        for e in range(max(len(r), len(a))):
            w.writerow([e + 1,
                        repr(r[e]) if e < len(r) else "",
                        repr(a[e]) if e < len(a) else ""])
