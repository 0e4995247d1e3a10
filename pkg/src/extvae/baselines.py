"""Comparators: a Gaussian VAE on raw data and a ReLU pushforward of Pareto noise.

Plus two probes: angular clustering of the largest observations, and a GP fit
to threshold exceedances.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import DenseNet, Graph
from .distributions import GpParams, gp_mle_fit
from .errors import DiagnosticError, TrainingError
from .polar import polar_decompose
from .train import TrainConfig, fit

LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# Gaussian VAE


@dataclass
class StdVaeModel:
    m: int
    enc_net: DenseNet
    dec_net: DenseNet
    latent_dim: int = 2

    @classmethod
    def initialize(cls, m: int, rng, latent_dim: int = 2, hidden=(8, 8)) -> "StdVaeModel":
        enc = ad.build_net([m, *hidden, 2 * latent_dim], rng)
        dec = ad.build_net([latent_dim, *hidden, 2 * m], rng)
        return cls(m, enc, dec, latent_dim)

    def parameters(self) -> Dict[str, np.ndarray]:
        out = {}
        out.update(self.enc_net.params("enc"))
        out.update(self.dec_net.params("dec"))
        return out


def _as_rows(x, m):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, m)


def stdvae_loss(graph: Graph, model: StdVaeModel, x, leaves: dict, noise=None, rng=None,
                L: int = 1):
    """Per-point and mean loss KL(q‖N(0, I)) − mean_l log N(x; μ(z_l), σ(z_l)²)."""
    x = _as_rows(x, model.m)
    b, m = x.shape
    n = model.latent_dim
    enc = model.enc_net.trace(graph, x, "enc", leaves)
    mu = enc[:, :n]
    log_sd = enc[:, n:]
    kl = ad.sum_(-0.5 * (1.0 + 2.0 * log_sd - ad.square(mu) - ad.square(ad.exp(log_sd))), axis=1)
    eps = rng.standard_normal((b, L, n)) if noise is None else np.asarray(noise, dtype=float)
    n_mc = eps.shape[1]
    z = ad.reshape(ad.reshape(mu, (b, 1, n)) + ad.reshape(ad.exp(log_sd), (b, 1, n)) * eps,
                   (b * n_mc, n))
    out = model.dec_net.trace(graph, z, "dec", leaves)
    mean = out[:, :m]
    log_std = out[:, m:]
    xx = np.repeat(x, n_mc, axis=0)
    resid = (xx - mean) / ad.exp(log_std)
    loglik = ad.sum_(-0.5 * LOG_2PI - log_std - 0.5 * ad.square(resid), axis=1)
    per_point = kl - ad.mean(ad.reshape(loglik, (b, n_mc)), axis=1)
    return per_point, ad.mean(per_point)


def stdvae_elbo(model: StdVaeModel, x, L: int = 1, rng=None, noise=None, with_grad: bool = True,
                check_finite: bool = True):
    graph = Graph()
    leaves = {k: graph.leaf(v, k) for k, v in model.parameters().items()} if with_grad else {}
    per_point, loss = stdvae_loss(graph, model, x, leaves, noise=noise, rng=rng, L=L)
    if check_finite:
        bad = np.flatnonzero(~np.isfinite(per_point.value))
        if bad.size:
            raise TrainingError(f"non-finite Gaussian VAE loss at datum {int(bad[0])}")
    if not with_grad:
        return float(loss.value), None
    return float(loss.value), graph.backward(loss)


def stdvae_evaluate(model: StdVaeModel, x, rng, L: int = 64, chunk: int = 2048) -> float:
    """Mean negative ELBO over a data set; may be +inf or nan for far-out points."""
    x = _as_rows(x, model.m)
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for lo in range(0, x.shape[0], chunk):
            part = x[lo:lo + chunk]
            loss, _ = stdvae_elbo(model, part, L=L, rng=rng, with_grad=False, check_finite=False)
            total += loss * part.shape[0]
    return total / x.shape[0]


def stdvae_train(model: StdVaeModel, x, config: TrainConfig, lr: Optional[float] = None,
                 callback=None):
    """Same optimizer contract as the radius VAE (default learning rate lr_radius)."""
    x = _as_rows(x, model.m)

    def step(idx, rng):
        return stdvae_elbo(model, x[idx], L=config.mc_samples, rng=rng)

    hist = fit(step, model.parameters(), x.shape[0], config,
               config.lr_radius if lr is None else lr, "train/stdvae", None, callback)
    return model, hist


def stdvae_sample(model: StdVaeModel, n: int, rng) -> np.ndarray:
    z = rng.standard_normal((n, model.latent_dim))
    out = ad.forward(model.dec_net, z)
    mean = out[:, :model.m]
    std = np.exp(np.minimum(out[:, model.m:], 700.0))
    return mean + std * rng.standard_normal(mean.shape)


# ---------------------------------------------------------------------------
# ReLU pushforward of heavy-tailed noise


@dataclass
class PushforwardGenerator:
    net: DenseNet
    prior_tail_index: float = 1.5

    @classmethod
    def random(cls, n_in: int, m: int, rng, hidden=(16, 16), prior_tail_index: float = 1.5):
        net = ad.build_net([n_in, *hidden, m], rng)
        for layer in net.layers:
            layer.bias[:] = rng.uniform(-0.5, 0.5, layer.bias.shape)
        return cls(net, prior_tail_index)


def pushforward_sample(gen: PushforwardGenerator, n_draws: int, rng) -> np.ndarray:
    """x = max(net(z), 0) with z having i.i.d. Pareto(prior_tail_index) coordinates on [1, ∞)."""
    u = 1.0 - rng.random((n_draws, gen.net.input_dim))
    z = u ** (-1.0 / gen.prior_tail_index)
    return np.maximum(ad.forward(gen.net, z), 0.0)


# ---------------------------------------------------------------------------
# probes


@dataclass
class ConcentrationProbe:
    dispersion: float
    cluster_fraction: float
    centers: np.ndarray
    n_exceedances: int


def _l1_to(points, centers):
    return np.abs(points[:, None, :] - centers[None, :, :]).sum(axis=2)


def angular_concentration_probe(samples, radius_quantile: float = 0.999,
                                cluster_count_max: int = 3, ball: float = 0.05,
                                max_candidates: int = 5000, min_exceedances: int = 20
                                ) -> ConcentrationProbe:
    """How much of the extreme angles sit near at most ``cluster_count_max`` points.

    Rows with zero norm are dropped. Among rows whose L1 norm exceeds the
    ``radius_quantile`` of norms, centers are chosen greedily: each step
    takes the exceedance angle whose L1 ``ball`` covers the most angles not
    yet covered (ties go to the lowest index). At most ``max_candidates``
    evenly strided angles are tried as centers. Returns the covered
    fraction and the mean L1 distance to the nearest center.
    """
    x = np.asarray(samples, dtype=float)
    norms = x.sum(axis=1)
    x = x[norms > 0]
    norms = norms[norms > 0]
    if x.shape[0] == 0:
        raise DiagnosticError("all rows have zero norm")
    cut = np.quantile(norms, radius_quantile)
    keep = norms > cut
    if keep.sum() < min_exceedances:
        raise DiagnosticError(f"only {int(keep.sum())} rows above the {radius_quantile} "
                              "norm quantile")
    theta = polar_decompose(x[keep]).angles
    n = theta.shape[0]
    step = max(1, -(-n // max_candidates))
    cand = theta[::step]
    near = np.empty((cand.shape[0], n), dtype=bool)
    for i in range(0, cand.shape[0], 256):
        near[i:i + 256] = _l1_to(cand[i:i + 256], theta) <= ball
    covered = np.zeros(n, dtype=bool)
    chosen = []
    for _ in range(cluster_count_max):
        gain = (near & ~covered).sum(axis=1)
        best = int(np.argmax(gain))
        if gain[best] == 0:
            break
        chosen.append(best)
        covered |= near[best]
    centers = cand[chosen] if chosen else theta[:1]
    d = _l1_to(theta, centers).min(axis=1)
    return ConcentrationProbe(float(d.mean()), float(np.mean(d <= ball)), centers, int(n))


def tail_probe(samples, threshold_quantile: float = 0.9) -> GpParams:
    """GP maximum-likelihood fit to the excesses over an empirical quantile."""
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    u = np.quantile(x, threshold_quantile)
    return gp_mle_fit(x[x > u] - u)
