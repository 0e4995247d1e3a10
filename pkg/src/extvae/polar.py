"""L1 polar decomposition, its inverse, and the radius-then-angle sampler."""

from dataclasses import dataclass

import numpy as np

from .distributions import check_simplex
from .errors import DataError, DomainError, ShapeError
from .rng import substreams

ZERO_NORM = 1e-12


def as_sample_matrix(x, nonnegative: bool = True) -> np.ndarray:
    """Validate an N×m observation array (m >= 2, finite, optionally >= 0)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ShapeError(f"expected an N×m array with m >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("sample matrix contains non-finite entries")
    if nonnegative and np.any(x < 0):
        row = int(np.argwhere(x < 0)[0, 0])
        raise DataError(f"negative entry in row {row}")
    return x


@dataclass
class PolarDataset:
    radii: np.ndarray  # (N,)
    angles: np.ndarray  # (N, m), rows on the simplex

    def __len__(self):
        return self.radii.shape[0]

    def subset(self, idx) -> "PolarDataset":
        return PolarDataset(self.radii[idx], self.angles[idx])


def polar_decompose(x) -> PolarDataset:
    """Radii are row L1 norms, angles the rows divided by them."""
    x = as_sample_matrix(x)
    r = x.sum(axis=1)
    small = np.flatnonzero(r < ZERO_NORM)
    if small.size:
        raise DataError(f"row {int(small[0])} has L1 norm below {ZERO_NORM}")
    return PolarDataset(r, x / r[:, None])


def compose(r, theta) -> np.ndarray:
    """r·θ, row-wise when given a vector of radii and a matrix of angles."""
    theta = np.asarray(theta, dtype=float)
    try:
        check_simplex(theta)
    except DomainError:
        raise DomainError("compose: angle is off the simplex") from None
    r = np.asarray(r, dtype=float)
    return r[..., None] * theta if r.ndim else r * theta


def sample_joint(radius_model, angular_model, n: int, rng) -> np.ndarray:
    """Draw n radii from the radius model, then one angle per radius.

    Radii and angles use separate child streams of ``rng``, so the radii are
    exactly ``radius_model.sample(n, child0)`` whatever the angular model does.
    """
    rng_r, rng_a = substreams(rng, 2)
    radii = np.asarray(radius_model.sample(n, rng_r), dtype=float)
    if n == 0:
        m = getattr(angular_model, "m", 0)
        return np.zeros((0, m))
    angles = angular_model.sample_given(radii, rng_a)
    return compose(radii, angles)
