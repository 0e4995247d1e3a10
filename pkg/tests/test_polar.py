import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from extvae import polar
from extvae.errors import DataError, DomainError, ShapeError
from extvae.rng import substreams

rows = hnp.arrays(float, st.tuples(st.integers(1, 20), st.integers(2, 6)),
                  elements=st.floats(0, 1e6, allow_subnormal=False))


@given(rows)
def test_roundtrip(x):
    x = x + 1e-3
    p = polar.polar_decompose(x)
    assert np.allclose(p.angles.sum(axis=1), 1.0)
    assert np.allclose(polar.compose(p.radii, p.angles), x, rtol=1e-12)


def test_rejects_bad_input():
    with pytest.raises(ShapeError):
        polar.polar_decompose(np.ones(3))
    with pytest.raises(ShapeError):
        polar.polar_decompose(np.ones((3, 1)))
    with pytest.raises(DataError, match="row 1"):
        polar.polar_decompose(np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DataError, match="row 0"):
        polar.polar_decompose(np.array([[-1.0, 2.0]]))
    with pytest.raises(DataError):
        polar.polar_decompose(np.array([[np.nan, 2.0]]))


def test_compose_scalar_and_off_simplex():
    assert np.allclose(polar.compose(2.0, np.array([0.25, 0.75])), [0.5, 1.5])
    with pytest.raises(DomainError):
        polar.compose(1.0, np.array([0.5, 0.6]))


def test_dataset_subset():
    p = polar.polar_decompose(np.array([[1.0, 1.0], [2.0, 0.0], [0.0, 3.0]]))
    s = p.subset([0, 2])
    assert len(s) == 2 and np.allclose(s.radii, [2, 3])


class _FixedRadius:
    def sample(self, n, rng):
        return rng.pareto(1.5, n) + 1


class _EqualAngles:
    m = 3

    def sample_given(self, r, rng):
        return np.full((np.size(r), 3), 1 / 3)


def test_sample_joint_uses_radius_substream():
    x = polar.sample_joint(_FixedRadius(), _EqualAngles(), 50, np.random.default_rng(1))
    expected = _FixedRadius().sample(50, substreams(np.random.default_rng(1), 2)[0])
    assert np.allclose(x.sum(axis=1), expected)
    assert polar.sample_joint(_FixedRadius(), _EqualAngles(), 0, np.random.default_rng(1)).shape == (0, 3)


def test_decompose_and_compose_examples():
    p = polar.polar_decompose(np.array([[1.0, 3.0]]))
    assert p.radii[0] == 4.0 and np.array_equal(p.angles[0], [0.25, 0.75])
    p = polar.polar_decompose(np.array([[2.0, 0.0, 0.0]]))
    assert p.radii[0] == 2.0 and np.array_equal(p.angles[0], [1.0, 0.0, 0.0])
    assert np.array_equal(polar.compose(4.0, np.array([0.25, 0.75])), [1.0, 3.0])
    theta = np.array([0.1, 0.2, 0.7])
    assert np.array_equal(polar.compose(1.0, theta), theta)
    assert polar.compose(7.5, theta).sum() == pytest.approx(7.5, rel=1e-15)


class _FlatDirichlet:
    m = 2

    def sample_given(self, r, rng):
        return rng.dirichlet(np.ones(2), np.size(r))


def test_sample_joint_with_flat_dirichlet_stub_has_uniform_angles():
    from scipy import stats
    x = polar.sample_joint(_FixedRadius(), _FlatDirichlet(), 5000, np.random.default_rng(2))
    p = polar.polar_decompose(x)
    assert np.all(x >= 0)
    assert stats.kstest(p.angles[:, 0], "uniform").pvalue > 0.01
