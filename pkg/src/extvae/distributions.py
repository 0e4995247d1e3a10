"""Parametric distributions used by the two VAEs and the tail diagnostics.

Conventions: Gamma and inverse-Gamma are parameterized by (shape, rate), the
inverse-Gamma "rate" being the rate of its reciprocal, so that
InvGamma(α, β) has density β^α/Γ(α) z^(-α-1) exp(-β/z). Generalized Pareto
is (scale σ, shape ξ) with survival (1 + ξx/σ)_+^(-1/ξ).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from . import special_fn
from .errors import DiagnosticError, DomainError

log = logging.getLogger(__name__)


def _check_positive(**kw):
    for name, v in kw.items():
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise DomainError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class GammaParams:
    shape: object
    rate: object

    def __post_init__(self):
        _check_positive(shape=self.shape, rate=self.rate)


@dataclass(frozen=True)
class InvGammaParams:
    shape: object
    rate: object

    def __post_init__(self):
        _check_positive(shape=self.shape, rate=self.rate)


@dataclass(frozen=True)
class DiagNormalParams:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if np.shape(self.mean) != np.shape(self.std):
            raise DomainError("mean and std must have the same shape")
        _check_positive(std=self.std)


@dataclass(frozen=True)
class DirichletParams:
    concentration: np.ndarray

    def __post_init__(self):
        if np.shape(self.concentration)[-1] < 2:
            raise DomainError("Dirichlet needs at least 2 components")
        _check_positive(concentration=self.concentration)


@dataclass(frozen=True)
class GpParams:
    scale: float
    shape: float

    def __post_init__(self):
        _check_positive(scale=self.scale)

    @property
    def tail_index(self) -> float:
        return 1.0 / self.shape if self.shape > 0 else np.inf


def _ret(out, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Gamma / inverse-Gamma


def gamma_logpdf(r, p: GammaParams):
    """shape·ln(rate) − lnΓ(shape) + (shape−1)·ln r − rate·r; −inf for r <= 0."""
    r = np.asarray(r, dtype=float)
    a = np.asarray(p.shape, dtype=float)
    b = np.asarray(p.rate, dtype=float)
    bad = r <= 0
    if np.any(bad):
        log.warning("gamma_logpdf: %d nonpositive argument(s) mapped to -inf", int(bad.sum()))
    rs = np.where(bad, 1.0, r)
    out = a * np.log(b) - special_fn.log_gamma(a) + (a - 1.0) * np.log(rs) - b * rs
    out = np.where(bad, -np.inf, out)
    return _ret(out, r, p.shape, p.rate)


def invgamma_logpdf(z, p: InvGammaParams):
    """α·ln β − lnΓ(α) − (α+1)·ln z − β/z; −inf for z <= 0."""
    z = np.asarray(z, dtype=float)
    a = np.asarray(p.shape, dtype=float)
    b = np.asarray(p.rate, dtype=float)
    bad = z <= 0
    if np.any(bad):
        log.warning("invgamma_logpdf: %d nonpositive argument(s) mapped to -inf", int(bad.sum()))
    zs = np.where(bad, 1.0, z)
    out = a * np.log(b) - special_fn.log_gamma(a) - (a + 1.0) * np.log(zs) - b / zs
    out = np.where(bad, -np.inf, out)
    return _ret(out, z, p.shape, p.rate)


def sample_invgamma(p: InvGammaParams, rng, size=None):
    """1/Y with Y ~ Gamma(α, rate=β)."""
    return 1.0 / special_fn.sample_gamma(p.shape, p.rate, rng, size)


def implicit_grad_gamma(z, p: GammaParams, diagnostics: Optional[dict] = None):
    """(dz/dshape, dz/drate) for a draw z ~ Gamma(shape, rate).

    Both follow from holding F(z) = P(shape, rate·z) fixed:
    dz/dθ = −(∂F/∂θ)/(∂F/∂z). The rate derivative reduces to −z/rate.
    Where the density is below 1e-300 the shape derivative is set to 0 and
    counted in ``diagnostics['degenerate']``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("implicit_grad_gamma needs z > 0")
    a = np.broadcast_to(np.asarray(p.shape, dtype=float), z.shape)
    b = np.broadcast_to(np.asarray(p.rate, dtype=float), z.shape)
    y = b * z
    dens = special_fn.gamma_density_std(a, y)
    ok = dens >= 1e-300
    dz_da = np.zeros(z.shape)
    dz_da[ok] = -special_fn.inc_gamma_d_da(a[ok], y[ok]) / dens[ok] / b[ok]
    if diagnostics is not None:
        diagnostics["degenerate"] = diagnostics.get("degenerate", 0) + int((~ok).sum())
    dz_db = -z / b
    return _ret(dz_da, z, p.shape, p.rate), _ret(dz_db, z, p.shape, p.rate)


def kl_invgamma_vs_prior(q: InvGammaParams, prior_shape):
    """KL( InvGamma(α_q, β_q) || InvGamma(α, 1) ).

    (α_q − α)ψ(α_q) − lnΓ(α_q) + lnΓ(α) + α ln β_q + α_q (1 − β_q)/β_q,
    i.e. the Gamma–Gamma KL under z ↦ 1/z, digamma taken at the variational shape.
    """
    aq = np.asarray(q.shape, dtype=float)
    bq = np.asarray(q.rate, dtype=float)
    a = np.asarray(prior_shape, dtype=float)
    _check_positive(prior_shape=a)
    out = (
        (aq - a) * special_fn.digamma(aq)
        - special_fn.log_gamma(aq)
        + special_fn.log_gamma(a)
        + a * np.log(bq)
        + aq * (1.0 - bq) / bq
    )
    return _ret(out, q.shape, q.rate, prior_shape)


# ---------------------------------------------------------------------------
# Gaussian / Dirichlet


def kl_diagnormal_vs_std(q: DiagNormalParams):
    """KL( N(μ, diag σ²) || N(0, I) ), summed over the last axis."""
    mu = np.asarray(q.mean, dtype=float)
    sd = np.asarray(q.std, dtype=float)
    out = -0.5 * np.sum(1.0 + np.log(sd**2) - mu**2 - sd**2, axis=-1)
    return _ret(out, q.mean) if np.ndim(mu) <= 1 else out


def diagnormal_logpdf(x, q: DiagNormalParams):
    x = np.asarray(x, dtype=float)
    mu = np.asarray(q.mean, dtype=float)
    sd = np.asarray(q.std, dtype=float)
    out = -0.5 * np.sum(np.log(2 * np.pi * sd**2) + ((x - mu) / sd) ** 2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


SIMPLEX_TOL = 1e-9
SIMPLEX_CLAMP = 1e-12


def check_simplex(theta, tol=SIMPLEX_TOL):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < -tol) or np.any(np.abs(theta.sum(axis=-1) - 1.0) > tol):
        raise DomainError("angle is not on the simplex")
    return theta


def dirichlet_logpdf(theta, p: DirichletParams):
    """lnΓ(Σa) − Σ lnΓ(a_i) + Σ (a_i − 1) ln θ_i, coordinates clamped at 1e-12."""
    theta = check_simplex(theta)
    a = np.asarray(p.concentration, dtype=float)
    t = np.maximum(theta, SIMPLEX_CLAMP)
    out = (
        special_fn.log_gamma(a.sum(axis=-1))
        - np.sum(special_fn.log_gamma(a), axis=-1)
        + np.sum((a - 1.0) * np.log(t), axis=-1)
    )
    return float(out) if np.ndim(out) == 0 else out


def sample_dirichlet(p: DirichletParams, rng, size=None):
    """Normalized Gamma(a_i, 1) draws; an all-zero row is redrawn."""
    a = np.asarray(p.concentration, dtype=float)
    shape = a.shape if size is None else tuple(np.atleast_1d(size)) + a.shape[-1:]
    a_b = np.broadcast_to(a, shape)
    g = special_fn.sample_gamma(a_b, 1.0, rng)
    g = np.asarray(g, dtype=float).reshape(shape)
    while True:
        tot = g.sum(axis=-1, keepdims=True)
        dead = (tot[..., 0] <= 0)
        if not np.any(dead):
            break
        redo = special_fn.sample_gamma(a_b[dead], 1.0, rng)
        g[dead] = np.asarray(redo).reshape(g[dead].shape)
    return g / g.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# generalized Pareto


def gp_survival(x, p: GpParams):
    """(1 + ξx/σ)_+^(−1/ξ), with the exponential limit at ξ = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("gp_survival needs x >= 0")
    s, xi = float(p.scale), float(p.shape)
    if abs(xi) < 1e-12:
        out = np.exp(-x / s)
    else:
        t = xi * x / s
        inside = t > -1.0
        out = np.where(inside, np.exp(-np.log1p(np.where(inside, t, 0.0)) / xi), 0.0)
    return _ret(out, x)


def sample_exponential(scale, rng, size=None):
    return scale * rng.exponential(1.0, size)


def sample_gp(p: GpParams, rng, size=None):
    """GP(σ, ξ) via A·Z with A ~ Exp(1) and Z ~ InvGamma(1/ξ, σ/ξ).

    By Breiman's product construction the product of Exp(scale c) and
    InvGamma(α, β) is GP with σ = βc/α and ξ = 1/α.
    """
    if p.shape <= 0:
        raise DomainError("sample_gp supports ξ > 0 only; use sample_exponential for ξ = 0")
    alpha = 1.0 / p.shape
    z = sample_invgamma(InvGammaParams(alpha, p.scale * alpha), rng, size)
    a = rng.exponential(1.0, size)
    return a * z


def gp_neg_loglik(params, y):
    """Negative GP log-likelihood of excesses ``y`` at (σ, ξ); +inf off-support."""
    sigma, xi = params
    if sigma <= 0:
        return np.inf
    if abs(xi) < 1e-9:
        return y.size * np.log(sigma) + y.sum() / sigma
    t = 1.0 + xi * y / sigma
    if np.any(t <= 0):
        return np.inf
    return y.size * np.log(sigma) + (1.0 + 1.0 / xi) * np.log(t).sum()


XI_BOUNDS = (-0.5, 5.0)


def gp_mle_fit(exceedances, max_iter: int = 10_000) -> GpParams:
    """Maximum-likelihood GP fit to threshold excesses.

    Nelder–Mead on (log σ, ξ) from the method-of-moments start, with ξ kept
    inside (−0.5, 5).
    """
    y = np.asarray(exceedances, dtype=float)
    if y.size < 30:
        raise DiagnosticError(f"gp_mle_fit needs >= 30 exceedances, got {y.size}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DomainError("exceedances must be finite and > 0")
    m, v = y.mean(), y.var()
    xi0 = float(np.clip(0.5 * (1.0 - m * m / v), XI_BOUNDS[0] + 0.05, XI_BOUNDS[1] - 0.05))
    s0 = max(m * (1.0 - xi0), 1e-3 * m)

    def objective(theta):
        ls, xi = theta
        if not XI_BOUNDS[0] < xi < XI_BOUNDS[1]:
            return np.inf
        return gp_neg_loglik((np.exp(ls), xi), y)

    best = None
    for start in ((np.log(s0), xi0), (np.log(m), 0.1)):
        if not np.isfinite(objective(start)):
            continue
        res = optimize.minimize(
            objective, np.array(start), method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-10},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not best.success:
        raise DiagnosticError("GP maximum likelihood did not converge")
    return GpParams(float(np.exp(best.x[0])), float(best.x[1]))
