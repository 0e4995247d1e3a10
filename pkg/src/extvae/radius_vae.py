"""Heavy-tailed radius VAE.

Prior InvGamma(α, 1) on the latent, Gamma likelihood whose parameters are
``shape = |g(z)|/z`` and ``rate = |f(z)|/z²`` (both floored), and an
InvGamma(α_φ(r), β_φ(r)) encoder. One decoder network with two outputs
supplies ``(f(z), g(z))``. The latent draw is differentiated through by
implicit reparameterization of its unit-rate Gamma reciprocal.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import autodiff as ad
from . import special_fn
from .autodiff import DenseNet, Graph, Layer
from .distributions import GammaParams, InvGammaParams
from .errors import TrainingError

EPS_FLOOR = 1e-6
ALPHA_BOUNDS = (0.05, 50.0)
Y_FLOOR = 1e-300


@dataclass
class RadiusVaeModel:
    alpha: np.ndarray
    enc_net: DenseNet
    dec_net: DenseNet  # z -> (f, g)
    alpha_learnable: bool = False
    eps_floor: float = EPS_FLOOR
    kl_form: str = "exact"
    floor_stats: Dict[str, int] = field(default_factory=lambda: {"floored": 0, "evaluations": 0})

    def __post_init__(self):
        self.alpha = np.array(float(self.alpha))

    @classmethod
    def initialize(cls, alpha: Optional[float], rng, learnable: bool = False,
                   hidden=(5, 5), eps_floor: float = EPS_FLOOR,
                   decoder_output: str = "relu") -> "RadiusVaeModel":
        """Zero kernels and U[1, 2] biases, with two exceptions in the decoder's
        output layer: the g output has bias 0 and kernel U[0.1, 2].

        Both networks end in a relu. With ``alpha=None`` the starting tail
        index is drawn from U[0.5, 3].
        """
        if alpha is None:
            alpha = rng.uniform(0.5, 3.0)
        enc = _zero_net([1, *hidden, 2], output="relu")
        for layer in enc.layers:
            layer.bias[:] = rng.uniform(1.0, 2.0, layer.bias.shape)
        dec = _zero_net([1, *hidden, 2], output=decoder_output)
        for layer in dec.layers[:-1]:
            layer.bias[:] = rng.uniform(1.0, 2.0, layer.bias.shape)
        last = dec.layers[-1]
        last.bias[0] = rng.uniform(1.0, 2.0)
        last.weight[:, 1] = rng.uniform(0.1, 2.0, last.weight.shape[0])
        return cls(alpha, enc, dec, learnable, eps_floor)

    def parameters(self, include_alpha: Optional[bool] = None) -> Dict[str, np.ndarray]:
        """Live parameter arrays; alpha is included iff it is learnable."""
        out = {}
        out.update(self.enc_net.params("enc"))
        out.update(self.dec_net.params("dec"))
        if self.alpha_learnable if include_alpha is None else include_alpha:
            out["alpha"] = self.alpha
        return out

    def project(self):
        np.clip(self.alpha, *ALPHA_BOUNDS, out=self.alpha)

    def sample(self, n: int, rng) -> np.ndarray:
        return sample_radius(self, n, rng)


def _zero_net(sizes, output="identity"):
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = output if i == len(sizes) - 2 else "relu"
        layers.append(Layer(np.zeros((a, b)), np.zeros(b), act))
    return DenseNet(layers)


def tail_index(model: RadiusVaeModel) -> float:
    return float(model.alpha)


# ---------------------------------------------------------------------------
# numpy evaluation


def decoder_params(model: RadiusVaeModel, z) -> GammaParams:
    z = np.asarray(z, dtype=float)
    zz = z.reshape(-1, 1)
    out = ad.forward(model.dec_net, zz)
    f, g = out[:, 0], out[:, 1]
    shape = np.maximum(np.abs(g) / zz[:, 0], model.eps_floor).reshape(z.shape)
    rate = np.maximum(np.abs(f) / zz[:, 0] / zz[:, 0], model.eps_floor).reshape(z.shape)
    if z.ndim == 0:
        return GammaParams(float(shape), float(rate))
    return GammaParams(shape, rate)


def encode(model: RadiusVaeModel, r) -> InvGammaParams:
    r = np.asarray(r, dtype=float)
    out = ad.forward(model.enc_net, r.reshape(-1, 1))
    out = np.maximum(out, model.eps_floor)
    a, b = out[:, 0].reshape(r.shape), out[:, 1].reshape(r.shape)
    if r.ndim == 0:
        return InvGammaParams(float(a), float(b))
    return InvGammaParams(a, b)


def sample_radius(model: RadiusVaeModel, n: int, rng) -> np.ndarray:
    """z ~ InvGamma(α, 1), then r ~ Gamma(decoder_params(z)); n i.i.d. draws."""
    if n == 0:
        return np.zeros(0)
    z = 1.0 / special_fn.sample_gamma(float(model.alpha), 1.0, rng, size=n)
    p = decoder_params(model, z)
    r = special_fn.sample_gamma(p.shape, p.rate, rng)
    return np.maximum(r, np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# loss


def radius_loss(graph: Graph, model: RadiusVaeModel, r, leaves: dict, draws=None,
                uniforms=None, rng=None, L: int = 1, diagnostics: Optional[dict] = None):
    """Build the per-point loss KL − mean_l log p(r | z_l) on ``graph``.

    The latent's unit-rate Gamma reciprocal comes from ``uniforms`` (inverse
    CDF, used when the noise has to be held fixed), else from ``draws``, else
    fresh Marsaglia–Tsang draws from ``rng``. Returns (per-point loss node,
    mean loss node).
    """
    r = np.asarray(r, dtype=float)
    b = r.shape[0]
    enc = model.enc_net.trace(graph, r.reshape(-1, 1), "enc", leaves)
    enc = ad.floor(enc, model.eps_floor)
    a_phi = enc[:, 0]
    b_phi = enc[:, 1]
    alpha = leaves["alpha"] if "alpha" in leaves else graph.constant(model.alpha)

    psi = ad.digamma(a_phi) if model.kl_form == "exact" else ad.digamma(alpha)
    kl = ((a_phi - alpha) * psi - ad.lgamma(a_phi) + ad.lgamma(alpha)
          + alpha * ad.log(b_phi) + a_phi * (1.0 - b_phi) / b_phi)

    a_col = ad.reshape(a_phi, (b, 1))
    if uniforms is not None:
        u = np.asarray(uniforms, dtype=float).reshape(b, -1)
        y_val = special_fn.gamma_ppf(np.broadcast_to(a_col.value, u.shape), u)
    elif draws is not None:
        y_val = np.asarray(draws, dtype=float).reshape(b, -1)
    else:
        y_val = special_fn.sample_gamma(np.broadcast_to(a_col.value, (b, L)), 1.0, rng)
    n_mc = y_val.shape[1]
    # a tiny encoder shape can underflow the Gamma draw; keep z = β/y finite
    y_val = np.maximum(y_val, Y_FLOOR)
    y = ad.implicit_gamma(a_col, y_val, diagnostics)
    z = ad.reshape(ad.reshape(b_phi, (b, 1)) / y, (b * n_mc, 1))

    out = model.dec_net.trace(graph, z, "dec", leaves)
    f = out[:, 0:1]
    g = out[:, 1:2]
    shape = ad.floor(ad.absolute(g) / z, model.eps_floor)
    rate = ad.floor(ad.absolute(f) / z / z, model.eps_floor)  # not /z²: that overflows first
    _count_floors(model, shape, rate)

    rr = np.repeat(r, n_mc).reshape(-1, 1)
    loglik = shape * ad.log(rate) - ad.lgamma(shape) + (shape - 1.0) * np.log(rr) - rate * rr
    loglik = ad.mean(ad.reshape(loglik, (b, n_mc)), axis=1)
    per_point = kl - loglik
    return per_point, ad.mean(per_point)


def _count_floors(model, shape, rate):
    n_floor = int((shape.value <= model.eps_floor).sum() + (rate.value <= model.eps_floor).sum())
    model.floor_stats["floored"] += n_floor
    model.floor_stats["evaluations"] += 2 * shape.value.size


def _check_finite(per_point):
    bad = np.flatnonzero(~np.isfinite(per_point.value))
    if bad.size:
        raise TrainingError(f"non-finite radius loss at datum {int(bad[0])}")


def elbo_radius(model: RadiusVaeModel, r_batch, L: int = 1, rng=None, uniforms=None,
                with_grad: bool = True, diagnostics: Optional[dict] = None):
    """Mean negative ELBO over the batch and its gradients.

    Returns ``(loss, grads)``; ``grads`` maps parameter names (as in
    ``model.parameters()``) to arrays, or is None when ``with_grad`` is False.
    """
    graph = Graph()
    params = model.parameters()
    leaves = {k: graph.leaf(v, k) for k, v in params.items()} if with_grad else {}
    per_point, loss = radius_loss(graph, model, r_batch, leaves, uniforms=uniforms,
                                  rng=rng, L=L, diagnostics=diagnostics)
    _check_finite(per_point)
    if not with_grad:
        return float(loss.value), None
    return float(loss.value), graph.backward(loss)


def evaluate_elbo(model: RadiusVaeModel, radii, rng, L: int = 64, chunk: int = 2048) -> float:
    """Mean negative ELBO over a data set with L Monte Carlo draws per point."""
    radii = np.asarray(radii, dtype=float)
    total = 0.0
    for lo in range(0, radii.size, chunk):
        part = radii[lo:lo + chunk]
        loss, _ = elbo_radius(model, part, L=L, rng=rng, with_grad=False)
        total += loss * part.size
    return total / radii.size


def loss_fn_fixed_noise(model: RadiusVaeModel, r, uniforms):
    """``f(graph, leaves)`` for gradient checks with the latent noise held fixed."""
    def f(graph, leaves):
        return radius_loss(graph, model, r, leaves, uniforms=uniforms)[1]
    return f
