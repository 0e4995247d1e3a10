"""Radius-conditioned angular VAE on the unit simplex.

Encoder input is ``[θ, u]`` and decoder input ``[z, u]``, where ``u = 1/(1+r)``
maps the radius into (0, 1] and ``u = 0`` is the r → ∞ limit used for the
angular measure. The likelihood is either a Gaussian in R^m whose draws are
projected onto the simplex, or a Dirichlet.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import DenseNet, Graph
from .distributions import DiagNormalParams, DirichletParams, sample_dirichlet
from .errors import ConfigError, DomainError, ResampleSignal, TrainingError

LIKELIHOODS = ("projected_normal", "dirichlet")
CONC_FLOOR = 1e-4
LOG_2PI = float(np.log(2.0 * np.pi))
MAX_RESAMPLE = 100


def radius_feature(r):
    r = np.asarray(r, dtype=float)
    return 1.0 / (1.0 + r)


@dataclass
class AngularVaeModel:
    m: int
    enc_net: DenseNet
    dec_net: DenseNet
    likelihood: str = "projected_normal"
    latent_dim: int = 4

    @classmethod
    def initialize(cls, m: int, rng, likelihood: str = "projected_normal",
                   latent_dim: int = 4, enc_hidden=(8, 8, 4), dec_hidden=(5, 10, 5)):
        """Glorot kernels, zero biases, except the decoder's output bias ~ U[0.5, 3]."""
        if likelihood not in LIKELIHOODS:
            raise ConfigError(f"unknown angular likelihood {likelihood!r}")
        if m < 2:
            raise ConfigError("angular model needs m >= 2")
        enc = ad.build_net([m + 1, *enc_hidden, 2 * latent_dim], rng)
        out_dim = 2 * m if likelihood == "projected_normal" else m
        dec = ad.build_net([latent_dim + 1, *dec_hidden, out_dim], rng)
        dec.layers[-1].bias[:] = rng.uniform(0.5, 3.0, out_dim)
        return cls(m, enc, dec, likelihood, latent_dim)

    def parameters(self) -> Dict[str, np.ndarray]:
        out = {}
        out.update(self.enc_net.params("enc"))
        out.update(self.dec_net.params("dec"))
        return out

    def project(self):
        pass

    def sample_given(self, radii, rng) -> np.ndarray:
        return sample_angles(self, radii, rng)


# ---------------------------------------------------------------------------
# numpy evaluation


def encode(model: AngularVaeModel, theta, r) -> DiagNormalParams:
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    u = np.broadcast_to(radius_feature(r), (theta.shape[0],)).reshape(-1, 1)
    out = ad.forward(model.enc_net, np.hstack([theta, u]))
    n = model.latent_dim
    return DiagNormalParams(out[:, :n], np.exp(out[:, n:]))


def decode_u(model: AngularVaeModel, z, u):
    """Likelihood parameters at latent rows ``z`` and radius features ``u``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    u = np.broadcast_to(np.asarray(u, dtype=float), (z.shape[0],)).reshape(-1, 1)
    out = ad.forward(model.dec_net, np.hstack([z, u]))
    m = model.m
    if model.likelihood == "projected_normal":
        return DiagNormalParams(out[:, :m], np.exp(out[:, m:]))
    return DirichletParams(np.maximum(np.maximum(out, 0.0), CONC_FLOOR))


def decode(model: AngularVaeModel, z, r):
    return decode_u(model, z, radius_feature(r))


def project_l1(s) -> np.ndarray:
    """Clip negatives to zero and rescale each row to unit L1 norm.

    Raises :class:`ResampleSignal` if some row has no positive entry.
    """
    s = np.asarray(s, dtype=float)
    pos = np.maximum(s, 0.0)
    tot = pos.sum(axis=-1, keepdims=True)
    if np.any(tot <= 0):
        raise ResampleSignal("no positive coordinate to project")
    return pos / tot


def _sample_from_u(model: AngularVaeModel, u, rng) -> np.ndarray:
    """One draw per entry of ``u``; a rejected projection redraws both z and s."""
    u = np.asarray(u, dtype=float)
    k = u.shape[0]
    z = rng.standard_normal((k, model.latent_dim))
    params = decode_u(model, z, u)
    if model.likelihood == "dirichlet":
        return sample_dirichlet(params, rng)
    out = np.empty((k, model.m))
    todo = np.arange(k)
    mean, std = params.mean, params.std
    for _ in range(MAX_RESAMPLE):
        s = mean + std * rng.standard_normal((todo.size, model.m))
        pos = np.maximum(s, 0.0)
        tot = pos.sum(axis=1)
        good = tot > 0
        out[todo[good]] = pos[good] / tot[good, None]
        todo = todo[~good]
        if not todo.size:
            return out
        p = decode_u(model, rng.standard_normal((todo.size, model.latent_dim)), u[todo])
        mean, std = p.mean, p.std
    raise DomainError(f"{todo.size} angle draws had no positive coordinate after "
                      f"{MAX_RESAMPLE} attempts")


def sample_angles(model: AngularVaeModel, radii, rng) -> np.ndarray:
    """One angle per radius in ``radii``."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if radii.size == 0:
        return np.zeros((0, model.m))
    return _sample_from_u(model, radius_feature(radii), rng)


def sample_angle(model: AngularVaeModel, r: float, n_draws: int, rng) -> np.ndarray:
    """``n_draws`` angles at a single radius."""
    return sample_angles(model, np.full(n_draws, float(r)), rng)


def sample_angular_measure(model: AngularVaeModel, n_draws: int, rng) -> np.ndarray:
    """Angles from the r → ∞ limit of the conditional (radius feature 0)."""
    if n_draws == 0:
        return np.zeros((0, model.m))
    return _sample_from_u(model, np.zeros(n_draws), rng)


# ---------------------------------------------------------------------------
# loss


def angular_loss(graph: Graph, model: AngularVaeModel, theta, r, leaves: dict,
                 noise=None, rng=None, L: int = 1):
    """Per-point and mean loss KL(q‖N(0, I)) − mean_l log p(θ | z_l, r).

    ``noise`` (shape (B, L, n)) fixes the standard normal draws; otherwise they
    come from ``rng``.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    b, m = theta.shape
    n = model.latent_dim
    u = radius_feature(r).reshape(-1, 1) * np.ones((b, 1))
    enc = model.enc_net.trace(graph, np.hstack([theta, u]), "enc", leaves)
    mu = enc[:, :n]
    log_sd = enc[:, n:]
    sd = ad.exp(log_sd)
    kl = ad.sum_(-0.5 * (1.0 + 2.0 * log_sd - ad.square(mu) - ad.square(sd)), axis=1)

    eps = rng.standard_normal((b, L, n)) if noise is None else np.asarray(noise, dtype=float)
    n_mc = eps.shape[1]
    mu3 = ad.reshape(mu, (b, 1, n))
    sd3 = ad.reshape(sd, (b, 1, n))
    z = ad.reshape(mu3 + sd3 * eps, (b * n_mc, n))
    uu = np.repeat(u, n_mc, axis=0)
    out = model.dec_net.trace(graph, ad.concat([z, uu], axis=1), "dec", leaves)
    tt = np.repeat(theta, n_mc, axis=0)

    if model.likelihood == "projected_normal":
        mean = out[:, :m]
        log_std = out[:, m:]
        resid = (tt - mean) / ad.exp(log_std)
        loglik = ad.sum_(-0.5 * LOG_2PI - log_std - 0.5 * ad.square(resid), axis=1)
    else:
        conc = ad.floor(ad.relu(out), CONC_FLOOR)
        log_t = np.log(np.maximum(tt, 1e-12))
        loglik = (ad.lgamma(ad.sum_(conc, axis=1)) - ad.sum_(ad.lgamma(conc), axis=1)
                  + ad.sum_((conc - 1.0) * log_t, axis=1))
    loglik = ad.mean(ad.reshape(loglik, (b, n_mc)), axis=1)
    per_point = kl - loglik
    return per_point, ad.mean(per_point)


def elbo_angular(model: AngularVaeModel, theta, r, L: int = 1, rng=None, noise=None,
                 with_grad: bool = True):
    """Mean negative ELBO of a batch and (optionally) its gradients by name."""
    graph = Graph()
    leaves = {k: graph.leaf(v, k) for k, v in model.parameters().items()} if with_grad else {}
    per_point, loss = angular_loss(graph, model, theta, r, leaves, noise=noise, rng=rng, L=L)
    bad = np.flatnonzero(~np.isfinite(per_point.value))
    if bad.size:
        raise TrainingError(f"non-finite angular loss at datum {int(bad[0])}")
    if not with_grad:
        return float(loss.value), None
    return float(loss.value), graph.backward(loss)


def evaluate_elbo(model: AngularVaeModel, theta, r, rng, L: int = 64, chunk: int = 1024) -> float:
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    r = np.asarray(r, dtype=float)
    total = 0.0
    for lo in range(0, r.size, chunk):
        loss, _ = elbo_angular(model, theta[lo:lo + chunk], r[lo:lo + chunk], L=L, rng=rng,
                               with_grad=False)
        total += loss * r[lo:lo + chunk].size
    return total / r.size


def loss_fn_fixed_noise(model: AngularVaeModel, theta, r, noise):
    def f(graph, leaves):
        return angular_loss(graph, model, theta, r, leaves, noise=noise)[1]
    return f
