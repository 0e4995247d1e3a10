"""Tail and dependence diagnostics for comparing generated and observed samples."""

import csv
import os
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import BudgetError, DiagnosticError, DomainError, ShapeError
from .polar import PolarDataset

for _backend in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402  (backend switches above must precede the import)

PVALUE_LEVEL = 0.45
OT_MAX_POINTS = 20000
MIN_KL_EXCEEDANCES = 20


def _positive_1d(x, name):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise DomainError(f"{name} is empty")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"{name} must be finite and positive")
    return x


# ---------------------------------------------------------------------------
# radius diagnostics


def log_qq(sample_a, sample_b, upper_fraction: float = 1.0, n_points: Optional[int] = None):
    """Log of matched type-7 quantiles over the top ``upper_fraction`` of probabilities.

    Returns an (n_points, 2) array of (log q_a, log q_b). The grid defaults to
    one point per observation of the smaller sample inside the upper fraction.
    """
    a = _positive_1d(sample_a, "sample_a")
    b = _positive_1d(sample_b, "sample_b")
    if not 0 < upper_fraction <= 1:
        raise DomainError("upper_fraction must lie in (0, 1]")
    if n_points is None:
        n_points = max(2, int(np.ceil(upper_fraction * min(a.size, b.size))))
    probs = np.linspace(1.0 - upper_fraction, 1.0, n_points)
    qa = np.quantile(a, probs, method="linear")
    qb = np.quantile(b, probs, method="linear")
    return np.column_stack([np.log(qa), np.log(qb)])


def empirical_survival(sample):
    """x ↦ (1 + #{sample > x}) / (n + 1): positive even beyond the sample maximum."""
    s = np.sort(np.asarray(sample, dtype=float))
    n = s.size

    def surv(x):
        above = n - np.searchsorted(s, x, side="right")
        return (1.0 + above) / (n + 1.0)

    return surv


def kl_above_threshold(r_true, r_gen, u: float, variant: str = "cross") -> float:
    """Divergence between the tails of two radius samples beyond ``u``.

    ``cross`` scores each sample's exceedances under the *other* sample's
    survival function (about 0 when the tails agree, growing as they part).
    ``literal`` is the printed formula: each sample under its own survival
    function, with the two averages normalized by the other sample's
    exceedance count.
    """
    rt = _positive_1d(r_true, "r_true")
    rg = _positive_1d(r_gen, "r_gen")
    n_t = int((rt > u).sum())
    n_g = int((rg > u).sum())
    if min(n_t, n_g) < MIN_KL_EXCEEDANCES:
        raise DiagnosticError(f"need >= {MIN_KL_EXCEEDANCES} exceedances of {u} in both "
                              f"samples, got {n_t} and {n_g}")
    s_t = empirical_survival(rt)
    s_g = empirical_survival(rg)

    def log_ratio(surv, x):
        return np.log(surv(np.maximum(x, u)) / surv(u))

    if variant == "cross":
        return float(-2.0 - log_ratio(s_g, rt).sum() / n_t - log_ratio(s_t, rg).sum() / n_g)
    if variant == "literal":
        return float(-2.0 - log_ratio(s_g, rg).sum() / n_t - log_ratio(s_t, rt).sum() / n_g)
    raise DomainError(f"unknown variant {variant!r}")


def hill_plot(r):
    """(k, α̂_k) for k = 2..n−1, where 1/α̂_k is the Hill mean log-excess over the k+1-th largest."""
    x = _positive_1d(r, "r")
    n = x.size
    if n < 10:
        raise DomainError("hill_plot needs at least 10 observations")
    logs = np.log(np.sort(x)[::-1])
    k = np.arange(2, n)
    hill = np.cumsum(logs)[k - 1] / k - logs[k]
    with np.errstate(divide="ignore"):
        return np.column_stack([k, 1.0 / hill])


def hill_estimate(r, k: int) -> float:
    """Tail-index estimate from the top ``k`` order statistics."""
    x = np.sort(_positive_1d(r, "r"))[::-1]
    if not 1 <= k < x.size:
        raise DomainError("k must lie in [1, n)")
    return float(1.0 / np.mean(np.log(x[:k] / x[k])))


# ---------------------------------------------------------------------------
# optimal transport


def _as_cloud(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError("point cloud must be 1-D or 2-D")
    return x


def wasserstein(x, y) -> float:
    """Square root of the exact optimal transport cost under Euclidean ground cost.

    Both clouds carry uniform weights. Solved by network simplex.
    """
    x = _as_cloud(x)
    y = _as_cloud(y)
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"dimension mismatch {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise DiagnosticError("empty point cloud")
    if max(x.shape[0], y.shape[0]) > OT_MAX_POINTS:
        raise BudgetError(f"exact transport limited to {OT_MAX_POINTS} points per side; "
                          "subsample the inputs")
    cost = cdist(x, y)
    a = np.full(x.shape[0], 1.0 / x.shape[0])
    b = np.full(y.shape[0], 1.0 / y.shape[0])
    value, log = ot.emd2(a, b, cost, numItermax=10**9, log=True)
    if log.get("warning"):
        raise DiagnosticError(f"transport solver: {log['warning']}")
    return float(np.sqrt(max(float(value), 0.0)))


def wasserstein_above(x, y, r: float) -> float:
    """wasserstein over the rows with L1 norm above ``r``, divided by r²."""
    x = _as_cloud(x)
    y = _as_cloud(y)
    xr = x[np.abs(x).sum(axis=1) > r]
    yr = y[np.abs(y).sum(axis=1) > r]
    if xr.shape[0] == 0 or yr.shape[0] == 0:
        raise DiagnosticError(f"no rows with norm above {r} ({xr.shape[0]} vs {yr.shape[0]})")
    return wasserstein(xr, yr) / r ** 2


# ---------------------------------------------------------------------------
# radius-angle independence


def _pairwise(x):
    x = _as_cloud(x)
    if x.shape[1] == 1:
        return np.abs(x - x.T)
    return cdist(x, x)


def dcov(x, y) -> float:
    """Squared sample distance covariance (V-statistic), in O(N²)."""
    a = _pairwise(x)
    b = _pairwise(y)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"length mismatch {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 4:
        raise ShapeError("dcov needs at least 4 observations")
    # the three sums of the definition, each reduced to O(N²)
    ra, rb = a.mean(axis=1), b.mean(axis=1)
    t = np.mean(a * b) + a.mean() * b.mean() - 2.0 * np.mean(ra * rb)
    return max(float(t), 0.0)


@dataclass
class IndependenceTestResult:
    thresholds: List[float]
    mean_pvalues: List[float]
    selected_threshold: Optional[float]
    level: float = PVALUE_LEVEL


def independence_pvalues(polar: PolarDataset, thresholds: Sequence[float], rng,
                         n_k: Optional[int] = None, L: int = 100, m_reps: int = 10,
                         level: float = PVALUE_LEVEL, max_subsample: int = 500
                         ) -> IndependenceTestResult:
    """Permutation-style p-values for independence of R/r_k and Θ given R > r_k.

    Each repetition draws ``n_k`` exceedances as pairs and compares their
    distance covariance with ``L`` values computed on independently drawn
    radius and angle subsamples; the p-value is the fraction of those at
    least as large. Thresholds with fewer than ``n_k`` exceedances (or fewer
    than 10 when ``n_k`` is defaulted) are skipped with a warning.
    """
    radii = np.asarray(polar.radii, dtype=float)
    angles = np.asarray(polar.angles, dtype=float)
    kept, pvals = [], []
    for r_k in sorted(float(t) for t in thresholds):
        idx = np.flatnonzero(radii > r_k)
        size = min(max_subsample, idx.size) if n_k is None else n_k
        if idx.size < max(size, 10):
            warnings.warn(f"threshold {r_k}: only {idx.size} exceedances, skipped")
            continue
        rr = radii[idx] / r_k
        th = angles[idx]
        reps = []
        for _ in range(m_reps):
            pick = rng.choice(idx.size, size, replace=False)
            t_obs = dcov(rr[pick], th[pick])
            t_null = np.empty(L)
            for l in range(L):
                i1 = rng.choice(idx.size, size, replace=False)
                i2 = rng.choice(idx.size, size, replace=False)
                t_null[l] = dcov(rr[i1], th[i2])
            reps.append(float(np.mean(t_null >= t_obs)))
        kept.append(r_k)
        pvals.append(float(np.mean(reps)))
    selected = next((t for t, p in zip(kept, pvals) if p >= level), None)
    return IndependenceTestResult(kept, pvals, selected, level)


# ---------------------------------------------------------------------------
# joint exceedance regions


def marginal_quantiles(x, p: float) -> np.ndarray:
    return np.quantile(np.asarray(x, dtype=float), p, axis=0, method="linear")


def region_proportion(x, thresholds, j_max: Optional[int] = None) -> np.ndarray:
    """Fraction of rows exceeding ``thresholds`` in all of coordinates 1..j, for j = 1..j_max."""
    x = _as_cloud(x)
    u = np.asarray(thresholds, dtype=float).ravel()
    if u.size != x.shape[1]:
        raise ShapeError(f"{u.size} thresholds for {x.shape[1]} coordinates")
    j_max = x.shape[1] if j_max is None else j_max
    if x.shape[0] == 0:
        return np.zeros(j_max)
    joint = np.logical_and.accumulate(x > u, axis=1)
    return joint[:, :j_max].mean(axis=0)


# ---------------------------------------------------------------------------
# CSV emission


def write_table(path, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(columns))
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return "" if v is None else v
