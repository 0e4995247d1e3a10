import numpy as np
import pytest

from extvae import cli, data


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("data.source = synth\nsynth.n_train = 64\nsynth.n_val = 10\nsynth.n_test = 400\n"
                 "train.epochs = 2\nmodel.likelihood = dirichlet\neval.permutations = 5\n"
                 "eval.repetitions = 2\neval.n_k = 20\neval.independence_levels = 0.5\n")
    return p


def test_synth_writes_splits(tmp_path, small_cfg):
    out = tmp_path / "o"
    assert cli.main(["synth", "--config", str(small_cfg), "--out", str(out)]) == 0
    _, tr = data.read_matrix_csv(out / "train.csv")
    _, te = data.read_matrix_csv(out / "test.csv")
    assert tr.shape == (64, 5) and te.shape == (400, 5)


def test_train_sample_evaluate_pipeline(tmp_path, small_cfg, capsys):
    out = tmp_path / "o"
    base = ["--config", str(small_cfg), "--out", str(out)]
    assert cli.main(["train", *base]) == 0
    assert "tail_index" in capsys.readouterr().out
    lines = (out / "losses.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss_radius,loss_angular" and len(lines) == 3
    ck = ["--checkpoint", str(out / "radius_vae.ckpt"), "--checkpoint", str(out / "angular_vae.ckpt")]
    assert cli.main(["sample", *base, *ck, "--n", "300"]) == 0
    for mode in ("radius", "angular_measure"):
        assert cli.main(["sample", *base, *ck, "--n", "50", "--mode", mode]) == 0
    _, s = data.read_matrix_csv(out / "samples_joint.csv")
    assert s.shape == (300, 5) and np.all(s >= 0)
    _, am = data.read_matrix_csv(out / "samples_angular_measure.csv")
    assert np.allclose(am.sum(axis=1), 1.0)
    assert cli.main(["synth", *base]) == 0
    assert cli.main(["evaluate", *base, "--data", str(out / "samples_joint.csv"),
                     "--reference", str(out / "test.csv")]) == 0
    for name in ("log_qq", "kl_above_threshold", "wasserstein_above", "independence",
                 "hill_generated", "hill_reference", "region_proportions", "summary"):
        assert (out / f"{name}.csv").exists(), name
    props = (out / "region_proportions.csv").read_text().splitlines()
    assert props[0] == "quantile,j,generated,reference" and len(props) == 1 + 2 * 5


def test_same_seed_same_checkpoint(tmp_path, small_cfg):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["train", "--config", str(small_cfg), "--out", str(out)]) == 0
        texts.append((out / "radius_vae.ckpt").read_text())
    assert texts[0] == texts[1]


def test_probe_pushforward(tmp_path, capsys):
    assert cli.main(["probe", "--out", str(tmp_path), "--n", "100000"]) == 0
    assert "pushforward_cluster_fraction" in capsys.readouterr().out


@pytest.mark.parametrize("argv,code", [
    (["sample"], 2),                                       # no checkpoint
    (["evaluate", "--data", "x.csv"], 2),                  # no reference
    (["sample", "--checkpoint", "nope.ckpt"], 3),          # unreadable checkpoint
    (["train", "--data", "missing.csv"], 3),               # missing data file
    (["synth", "--config", "missing.cfg"], 2),
    (["probe", "--mode", "nope"], 2),
])
def test_exit_codes(tmp_path, argv, code):
    assert cli.main([*argv, "--out", str(tmp_path)]) == code


def test_sample_mode_needs_matching_checkpoint(tmp_path, small_cfg):
    out = tmp_path / "o"
    cli.main(["train", "--config", str(small_cfg), "--out", str(out)])
    code = cli.main(["sample", "--out", str(out), "--checkpoint", str(out / "angular_vae.ckpt"),
                     "--mode", "joint"])
    assert code == 2


def test_argparse_rejects_unknown_command():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_fixed_alpha_is_reported(tmp_path, small_cfg, capsys):
    out = tmp_path / "o"
    cfg = tmp_path / "fixed.cfg"
    cfg.write_text(small_cfg.read_text() + "model.alpha = 1.5\nmodel.alpha_learnable = false\n")
    assert cli.main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert "tail_index 1.5\n" in capsys.readouterr().out


def test_evaluate_reference_against_itself(tmp_path, small_cfg, capsys):
    out = tmp_path / "o"
    base = ["--config", str(small_cfg), "--out", str(out)]
    assert cli.main(["synth", *base]) == 0
    ref = str(out / "test.csv")
    assert cli.main(["evaluate", *base, "--data", ref, "--reference", ref]) == 0
    assert "wasserstein 0.0" in capsys.readouterr().out
