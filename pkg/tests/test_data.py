import numpy as np
import pytest
from scipy import stats

from extvae import data
from extvae.distributions import gp_mle_fit
from extvae.polar import compose, polar_decompose
from extvae.errors import ConfigError, DataError
from extvae.rng import stream


def test_synthetic_split_shapes_and_simplex():
    cfg = data.SyntheticConfig(n_train=20, n_val=30, n_test=40)
    tr, va, te = data.synth_dataset(cfg, stream(0, "data"))
    assert tr.shape == (20, 5) and va.shape == (30, 5) and te.shape == (40, 5)
    assert np.all(tr >= 0)


def test_synthetic_deterministic_per_seed():
    cfg = data.SyntheticConfig(n_train=5, n_val=5, n_test=5)
    a = data.synth_dataset(cfg, stream(3, "data"))
    b = data.synth_dataset(cfg, stream(3, "data"))
    c = data.synth_dataset(cfg, stream(4, "data"))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_radius_tail_index_and_median():
    # R = 2U·Z, Z ~ InvGamma(1.5, 0.6): P(R > x) ~ C x^-1.5, so Hill at the top 1% sits near 1.5
    r = data.synth_radius(400_000, data.SyntheticConfig(), np.random.default_rng(0))
    top = np.sort(r)[-4000:]
    hill = 1 / np.mean(np.log(top[1:] / top[0]))
    assert abs(hill - 1.5) < 0.1


def test_radius_distribution_matches_product_oracle():
    """KS against the exact cdf P(2UZ <= x) = E[min(1, x/(2Z))], by quadrature over Z.

    The mean E[R] = E[U]·2·β/(α−1) = 1.2 is finite but the variance is not,
    so a plain standard-error band on the sample mean would be meaningless.
    """
    from scipy import integrate
    a, b = 1.5, 0.6

    def cdf(x):
        f = lambda z: min(1.0, x / (2 * z)) * stats.invgamma.pdf(z, a, scale=b)
        return (integrate.quad(f, 0, x / 2, limit=200)[0]
                + integrate.quad(f, x / 2, np.inf, limit=200)[0])

    r = data.synth_radius(3000, data.SyntheticConfig(), np.random.default_rng(1))
    grid = np.quantile(r, np.linspace(0.01, 0.99, 25))
    emp = np.array([(r <= g).mean() for g in grid])
    theo = np.array([cdf(g) for g in grid])
    assert np.max(np.abs(emp - theo)) < 1.63 / np.sqrt(r.size)  # 1% KS critical value
    trimmed = integrate.quad(lambda x: 1 - cdf(x), 0, 20, limit=200)[0]  # E[min(R, 20)]
    assert abs(np.minimum(r, 20).mean() - trimmed) < 0.06
    assert 2 * 0.5 * b / (a - 1) == pytest.approx(1.2)


def test_angle_concentration_shape():
    c = data.angle_concentration(np.array([0.25, 10.0]))
    assert np.allclose(c[0], [3, 3, 6, 6, 6])
    assert np.allclose(c[1], [5.85, 5.85, 3.15, 3.15, 3.15])


def test_synth_angle_mean_shifts_with_radius():
    rng = np.random.default_rng(2)
    small = data.synth_angle(np.full(20000, 0.1), rng).mean(axis=0)
    big = data.synth_angle(np.full(20000, 1e6), rng).mean(axis=0)
    assert np.allclose(small, [3 / 24] * 2 + [6 / 24] * 3, atol=0.01)
    assert np.allclose(big, [6 / 21] * 2 + [3 / 21] * 3, atol=0.01)


def test_csv_roundtrip(tmp_path):
    x = np.random.default_rng(0).random((7, 3))
    p = tmp_path / "m.csv"
    data.write_matrix_csv(p, x, ["a", "b", "c"])
    cols, y = data.read_matrix_csv(p, ["c", "a"])
    assert cols == ["c", "a"] and np.array_equal(y, x[:, [2, 0]])


def test_csv_errors_name_line_and_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(DataError, match="line 3, column b"):
        data.read_matrix_csv(p)
    with pytest.raises(DataError, match="missing column"):
        data.read_matrix_csv(p, ["z"])
    with pytest.raises(DataError):
        data.read_matrix_csv(tmp_path / "nope.csv")


def _station_csv(tmp_path, n):
    rng = np.random.default_rng(0)
    p = tmp_path / "danube.csv"
    data.write_matrix_csv(p, rng.random((n, 5)) * 100, [f"station_{i}" for i in range(23, 28)])
    return p


def test_danube_split(tmp_path):
    tr, te = data.danube_load(data.DanubeConfig(str(_station_csv(tmp_path, 100))))
    assert tr.shape == (4, 5) and te.shape == (96, 5)


def test_danube_stride_one_leaves_no_test(tmp_path):
    with pytest.raises(ConfigError):
        data.danube_load(data.DanubeConfig(str(_station_csv(tmp_path, 10)), train_stride_days=1))


def test_danube_negative_discharge(tmp_path):
    p = tmp_path / "neg.csv"
    p.write_text("station_23,station_24,station_25,station_26,station_27\n1,2,3,4,5\n1,-2,3,4,5\n")
    with pytest.raises(DataError, match="line 3, column station_24"):
        data.danube_load(data.DanubeConfig(str(p)))


def test_config_validation():
    with pytest.raises(ConfigError):
        data.SyntheticConfig(n_train=0)
    with pytest.raises(ConfigError):
        data.DanubeConfig("x.csv", train_stride_days=0)


def test_gp_fit_on_train_split_above_q80():
    """With ~50 exceedances the fitted shape is only loosely near 1/1.5."""
    shapes = []
    for seed in range(5):
        train, _, _ = data.synth_dataset(data.SyntheticConfig(seed=seed), stream(seed, "synth"))
        r = train.sum(axis=1)
        u = np.quantile(r, 0.8)
        shapes.append(gp_mle_fit(r[r > u] - u).shape)
    assert all(0.2 < xi < 1.0 for xi in shapes)
    assert 0.3 < np.mean(shapes) < 0.9


def test_default_split_sizes_and_radius_recovery():
    cfg = data.SyntheticConfig()
    tr, va, te = data.synth_dataset(cfg, stream(0, "synth"))
    assert (tr.shape[0], va.shape[0], te.shape[0]) == (250, 750, 10000)
    rng = np.random.default_rng(5)
    r = data.synth_radius(500, cfg, rng)
    x = compose(r, data.synth_angle(r, rng))
    assert np.allclose(polar_decompose(x).radii, r, rtol=1e-14, atol=0)


def test_danube_fifty_year_file_counts(tmp_path):
    path = _station_csv(tmp_path, 18262)
    train, test = data.danube_load(data.DanubeConfig(str(path)))
    assert train.shape == (731, 5) and test.shape == (17531, 5)
    _, full = data.read_matrix_csv(path)
    is_train = np.zeros(full.shape[0], dtype=bool)
    is_train[::25] = True
    assert np.array_equal(train, full[is_train]) and np.array_equal(test, full[~is_train])
