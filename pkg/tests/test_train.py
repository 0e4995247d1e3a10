import numpy as np
import pytest

from extvae import train
from extvae.errors import ConfigError, TrainingError


def test_config_validation():
    with pytest.raises(ConfigError):
        train.TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        train.TrainConfig(lr_radius=float("nan"))
    with pytest.raises(ConfigError):
        train.TrainConfig(adam_beta1=1.0)


def test_clip_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    out = train.clip_global_norm(g, 1.0)
    assert np.allclose([out["a"][0], out["b"][0]], [0.6, 0.8])
    assert train.clip_global_norm(g, 10.0) is g
    with pytest.raises(TrainingError, match="b"):
        train.clip_global_norm({"a": np.ones(1), "b": np.array([np.inf])}, 1.0)


def test_adam_first_step_is_lr_times_sign():
    p = {"w": np.array([1.0, -2.0])}
    state = train.adam_step(p, {"w": np.array([0.5, -3.0])}, train.AdamState(), train.TrainConfig(), lr=0.1)
    assert state.t == 1
    assert np.allclose(p["w"], [0.9, -1.9], atol=1e-6)


def test_adam_against_reference_loop():
    cfg = train.TrainConfig(grad_clip=1e9)
    p = {"w": np.array([0.3])}
    state = train.AdamState()
    w, m, v = 0.3, 0.0, 0.0
    for t in range(1, 20):
        g = 2 * (w - 1.0)
        train.adam_step(p, {"w": np.array([2 * (p["w"][0] - 1.0)])}, state, cfg, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert p["w"][0] == pytest.approx(w, abs=1e-12)


def test_fit_minimizes_quadratic_and_is_reproducible():
    target = np.random.default_rng(0).normal(size=40)

    def run():
        p = {"w": np.zeros(1)}

        def step(idx, rng):
            d = p["w"][0] - target[idx]
            return float(np.mean(d * d)), {"w": np.array([2 * d.mean()])}
        hist = train.fit(step, p, target.size, train.TrainConfig(epochs=300, batch_size=8), 0.05, "t")
        return p["w"][0], hist
    w1, h1 = run()
    w2, h2 = run()
    assert w1 == w2 and h1.loss == h2.loss
    assert abs(w1 - target.mean()) < 0.05


def test_fit_reshuffles_each_epoch():
    seen = []
    train.fit(lambda idx, rng: (seen.append(tuple(idx)) or 0.0, {}), {}, 8,
              train.TrainConfig(epochs=2, batch_size=8), 0.1, "shuffle")
    assert sorted(seen[0]) == sorted(seen[1]) == list(range(8)) and seen[0] != seen[1]


def test_fit_rejects_oversized_batch_and_empty():
    with pytest.raises(ConfigError):
        train.fit(None, {}, 4, train.TrainConfig(batch_size=8), 0.1, "x")
    with pytest.raises(ConfigError):
        train.fit(None, {}, 0, train.TrainConfig(), 0.1, "x")


def test_write_loss_csv(tmp_path):
    p = tmp_path / "l.csv"
    train.write_loss_csv(p, train.History(loss=[1.0, 0.5]), train.History(loss=[2.0]))
    assert p.read_text().splitlines() == ["epoch,loss_radius,loss_angular", "1,1.0,2.0", "2,0.5,"]


def test_zero_gradient_leaves_params_unchanged():
    p = {"w": np.array([1.5, -0.2])}
    before = p["w"].copy()
    train.adam_step(p, {"w": np.zeros(2)}, train.AdamState(), train.TrainConfig(), lr=0.1)
    assert np.array_equal(p["w"], before)


def test_constant_gradient_step_tends_to_lr():
    p = {"w": np.zeros(1)}
    state = train.AdamState()
    cfg = train.TrainConfig()
    steps = []
    for _ in range(3000):
        before = p["w"][0]
        train.adam_step(p, {"w": np.array([0.7])}, state, cfg, lr=0.01)
        steps.append(before - p["w"][0])
    assert steps[-1] == pytest.approx(0.01, rel=1e-6)


def test_adam_minimizes_square_from_five():
    p = {"x": np.array([5.0])}
    state = train.AdamState()
    cfg = train.TrainConfig()
    for step in range(1, 5001):
        train.adam_step(p, {"x": 2 * p["x"]}, state, cfg, lr=1e-2)
        if abs(p["x"][0]) < 1e-3:
            break
    assert abs(p["x"][0]) < 1e-3 and step <= 5000


def test_train_radius_smoke_on_synthetic_radii():
    from extvae import data, radius_vae
    radii = data.synth_radius(1000, data.SyntheticConfig(), np.random.default_rng(0))

    def run():
        model = radius_vae.RadiusVaeModel.initialize(None, np.random.default_rng(1), learnable=True)
        return train.train_radius(model, radii, train.TrainConfig(epochs=2000, seed=3))[1]
    hist = run()
    assert np.mean(hist.loss[-50:]) < hist.loss[0]
    assert run().loss[:20] == hist.loss[:20]


def test_train_full_returns_both_phases():
    from extvae import angular_vae, data, radius_vae
    x = data.synth_sample(64, data.SyntheticConfig(), np.random.default_rng(0))
    rm = radius_vae.RadiusVaeModel.initialize(1.5, np.random.default_rng(1))
    am = angular_vae.AngularVaeModel.initialize(5, np.random.default_rng(2), "dirichlet")
    cfg = train.TrainConfig(epochs=3)
    rm2, am2, hr, ha = train.train_full(rm, am, x, cfg)
    assert rm2 is rm and am2 is am and len(hr.loss) == len(ha.loss) == 3
