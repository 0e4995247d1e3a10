"""Scalar special functions and the Gamma sampling kernel.

Everything here accepts scalars or numpy arrays. ``log_gamma``, ``digamma``,
``trigamma`` and the value of ``P(a, x)`` are thin, domain-checked wrappers over
``scipy.special``; the shape derivative of ``P`` and the Gamma sampler are
implemented here.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special as sps

from .errors import DomainError


def _positive(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and > 0")
    return arr


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 and np.ndim(out) == 0 else out


def log_gamma(x):
    """ln Γ(x) for x > 0."""
    arr = _positive(x)
    return _scalar_or_array(sps.gammaln(arr), x)


def digamma(x):
    """ψ(x) = d/dx ln Γ(x) for x > 0."""
    arr = _positive(x)
    return _scalar_or_array(sps.psi(arr), x)


def trigamma(x):
    """ψ'(x); used as the backward of the digamma node."""
    arr = _positive(x)
    return _scalar_or_array(sps.polygamma(1, arr), x)


@dataclass(frozen=True)
class IncompleteGammaEval:
    """Regularized lower incomplete gamma P(a, x) and its partial derivatives."""

    value: object
    d_da: object
    d_dx: object


def gamma_density_std(a, x):
    """x^(a-1) e^(-x) / Γ(a), the unit-rate Gamma pdf, with the x = 0 limit."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    a, x = np.broadcast_arrays(a, x)
    out = np.empty(a.shape)
    pos = x > 0
    with np.errstate(over="ignore"):  # a < 1 at subnormal x: the density really is inf
        out[pos] = np.exp((a[pos] - 1.0) * np.log(x[pos]) - x[pos] - sps.gammaln(a[pos]))
    zero = ~pos
    out[zero] = np.where(a[zero] == 1.0, 1.0, np.where(a[zero] < 1.0, np.inf, 0.0))
    return out


def shape_step(a):
    """Central-difference step for ∂P/∂a: 1e-4·max(1, a), kept below a/2."""
    a = np.asarray(a, dtype=float)
    return np.minimum(1e-4 * np.maximum(1.0, a), 0.5 * a)


def inc_gamma_d_da(a, x):
    """∂P(a, x)/∂a by central finite difference.

    With the default step the truncation error is O(h²·∂³P/∂a³) and the
    roundoff O(1e-16/h); both stay below 1e-6 over the shapes used here.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    h = shape_step(a)
    return (sps.gammainc(a + h, x) - sps.gammainc(a - h, x)) / (2.0 * h)


def reg_inc_gamma(a, x) -> IncompleteGammaEval:
    """Evaluate P(a, x) together with ∂P/∂a and ∂P/∂x."""
    a_arr = _positive(a, "a")
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)) or np.any(x_arr < 0):
        raise DomainError("x must be finite and >= 0")
    value = sps.gammainc(a_arr, x_arr)
    d_da = inc_gamma_d_da(a_arr, x_arr)
    d_dx = gamma_density_std(a_arr, x_arr)
    scalar = np.ndim(a) == 0 and np.ndim(x) == 0
    if scalar:
        return IncompleteGammaEval(float(value), float(d_da), float(d_dx))
    return IncompleteGammaEval(value, d_da, d_dx)


def gamma_ppf(a, u):
    """Inverse of P(a, ·): the unit-rate Gamma quantile at probability u."""
    a_arr = _positive(a, "a")
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0) | (u_arr >= 1)):
        raise DomainError("u must lie in (0, 1)")
    return _scalar_or_array(sps.gammaincinv(a_arr, u_arr), u)


def _marsaglia_tsang(d, rng):
    """Standard Gamma(d + 1/3) draws for d >= 2/3, elementwise."""
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(d.shape)
    todo = np.arange(d.size)
    dflat = d.ravel()
    cflat = c.ravel()
    res = out.ravel()
    while todo.size:
        dd = dflat[todo]
        cc = cflat[todo]
        x = rng.standard_normal(todo.size)
        v = 1.0 + cc * x
        ok = v > 0
        v = np.where(ok, v, 1.0) ** 3
        u = rng.random(todo.size)
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(u) < 0.5 * x2 + dd * (1.0 - v + np.log(v)))
        )
        res[todo[accept]] = dd[accept] * v[accept]
        todo = todo[~accept]
    return out


def sample_gamma(shape, rate, rng, size=None):
    """Gamma(shape, rate) draws via Marsaglia–Tsang.

    Shapes below one are boosted: G(a) = G(a + 1)·U^(1/a). Deterministic for a
    given generator state.
    """
    shape_arr = _positive(shape, "shape")
    rate_arr = _positive(rate, "rate")
    out_shape = np.broadcast_shapes(shape_arr.shape, rate_arr.shape) if size is None else size
    a = np.broadcast_to(shape_arr, out_shape).astype(float)
    b = np.broadcast_to(rate_arr, out_shape)
    small = a < 1.0
    boosted = np.where(small, a + 1.0, a)
    g = _marsaglia_tsang(boosted - 1.0 / 3.0, rng)
    if np.any(small):
        u = rng.random(int(small.sum()))
        log_g = np.log(g[small]) + np.log(u) / a[small]
        g[small] = np.exp(log_g)
    out = g / b
    if size is None and np.ndim(shape) == 0 and np.ndim(rate) == 0:
        return float(out)
    return out
