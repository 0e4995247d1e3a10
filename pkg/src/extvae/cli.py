"""Command-line front end: synth | train | sample | evaluate | probe.

Exit codes: 0 success, 2 configuration/usage error, 3 data or load error,
4 training or numerical error.
"""

import argparse
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import angular_vae, baselines, checkpoint, data, metrics, radius_vae, train
from .config import RunConfig, load_config, parse_config
from .errors import DataError, DiagnosticError, ExtVaeError, UsageError
from .polar import PolarDataset, polar_decompose, sample_joint
from .rng import stream

SAMPLE_MODES = ("joint", "angular_measure", "radius")
PROBE_MODES = ("relu_pushforward", "stdvae_tail")


def _config(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.config:
        if args.data and args.command == "train":
            overrides.update({"data.source": "csv", "data.path": args.data})
        return load_config(args.config, overrides)
    base = "data.source = synth\n"
    if args.data and args.command == "train":
        base = f"data.source = csv\ndata.path = {args.data}\n"
    return parse_config(base, overrides)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _synth_config(cfg: RunConfig) -> data.SyntheticConfig:
    return data.SyntheticConfig(cfg["synth.n_train"], cfg["synth.n_val"], cfg["synth.n_test"],
                                cfg["synth.alpha1"], cfg["synth.beta"], cfg.seed)


def resolve_data(cfg: RunConfig):
    """(train, test) matrices for the configured source; test may be None."""
    if cfg["data.source"] == "synth":
        tr, _, te = data.synth_dataset(_synth_config(cfg), stream(cfg.seed, "synth"))
        return tr, te
    columns = cfg["data.columns"] or None
    if cfg["data.stride"]:
        dcfg = data.DanubeConfig(cfg["data.path"], train_stride_days=cfg["data.stride"],
                                 column_names=columns)
        if columns is None:
            dcfg.column_names = data.read_matrix_csv(cfg["data.path"])[0]
        return data.danube_load(dcfg)
    _, x = data.read_matrix_csv(cfg["data.path"], columns)
    return x, None


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    splits = data.synth_dataset(_synth_config(cfg), stream(cfg.seed, "synth"))
    for name, x in zip(("train", "val", "test"), splits):
        data.write_matrix_csv(out / f"{name}.csv", x)
        print(f"wrote {out / (name + '.csv')} ({x.shape[0]} rows)")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    x, _ = resolve_data(cfg)
    polar = polar_decompose(x)
    tcfg = cfg.train_config()
    alpha = cfg["model.alpha"]
    learnable = cfg["model.alpha_learnable"] or alpha is None
    rmodel = radius_vae.RadiusVaeModel.initialize(alpha, stream(cfg.seed, "init/radius"),
                                                  learnable=learnable)
    amodel = angular_vae.AngularVaeModel.initialize(
        polar.angles.shape[1], stream(cfg.seed, "init/angular"), cfg["model.likelihood"],
        cfg["model.latent_dim"])
    rmodel, h_r = train.train_radius(rmodel, polar.radii, tcfg)
    amodel, h_a = train.train_angular(amodel, polar, tcfg)
    meta = {"seed": cfg.seed, "config_digest": cfg.digest()}
    checkpoint.save(out / "radius_vae.ckpt", rmodel, meta)
    checkpoint.save(out / "angular_vae.ckpt", amodel, meta)
    train.write_loss_csv(out / "losses.csv", h_r, h_a)
    print(f"tail_index {radius_vae.tail_index(rmodel):.6g}")
    return 0


def _load_models(paths: List[str]):
    models = {}
    for p in paths:
        ck = checkpoint.load_checkpoint(p)
        models[ck.kind] = checkpoint.from_checkpoint(ck)
    return models


def cmd_sample(cfg: RunConfig, paths: List[str], n: int, mode: str) -> int:
    if mode not in SAMPLE_MODES:
        raise UsageError(f"--mode must be one of {SAMPLE_MODES}")
    models = _load_models(paths)
    rng = stream(cfg.seed, f"sample/{mode}")
    need = {"joint": ("radius_vae", "angular_vae"), "radius": ("radius_vae",),
            "angular_measure": ("angular_vae",)}[mode]
    if mode == "joint" and "stdvae" in models and "radius_vae" not in models:
        x = baselines.stdvae_sample(models["stdvae"], n, rng)
    else:
        missing = [k for k in need if k not in models]
        if missing:
            raise UsageError(f"mode {mode} needs a {' and '.join(missing)} checkpoint")
        if mode == "joint":
            x = sample_joint(models["radius_vae"], models["angular_vae"], n, rng)
        elif mode == "radius":
            x = radius_vae.sample_radius(models["radius_vae"], n, rng)[:, None]
        else:
            x = angular_vae.sample_angular_measure(models["angular_vae"], n, rng)
    out = _out_dir(cfg) / f"samples_{mode}.csv"
    data.write_matrix_csv(out, x, ["r"] if mode == "radius" else None)
    print(f"wrote {out} ({x.shape[0]} rows)")
    return 0


def _subsample(x, k, rng):
    if x.shape[0] <= k:
        return x
    return x[np.sort(rng.choice(x.shape[0], k, replace=False))]


def _try(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except DiagnosticError as exc:
        warnings.warn(str(exc))
        return None


def cmd_evaluate(cfg: RunConfig, gen_path: str, ref_path: str) -> int:
    _, gen = data.read_matrix_csv(gen_path)
    _, ref = data.read_matrix_csv(ref_path)
    if gen.shape[1] != ref.shape[1]:
        raise DataError(f"dimension mismatch: generated {gen.shape[1]}, reference {ref.shape[1]}")
    out = _out_dir(cfg)
    rng = stream(cfg.seed, "evaluate")
    r_gen = np.abs(gen).sum(axis=1)
    r_ref = np.abs(ref).sum(axis=1)
    summary = []

    qq = metrics.log_qq(r_gen[r_gen > 0], r_ref[r_ref > 0], cfg["eval.upper_fraction"])
    metrics.write_table(out / "log_qq.csv", ["log_q_generated", "log_q_reference"], qq)

    thresholds = cfg["eval.thresholds"] or list(np.quantile(r_ref, [0.8, 0.9, 0.95, 0.975, 0.99]))
    kl_rows, w_rows = [], []
    cap = cfg["eval.ot_max_points"]
    for u in thresholds:
        kl_rows.append((u, _try(metrics.kl_above_threshold, r_ref, r_gen, u, "literal"),
                        _try(metrics.kl_above_threshold, r_ref, r_gen, u, "cross")))
        g_u = _subsample(gen[r_gen > u], cap, rng)
        f_u = _subsample(ref[r_ref > u], cap, rng)
        w_rows.append((u, _try(metrics.wasserstein_above, g_u, f_u, u)))
    metrics.write_table(out / "kl_above_threshold.csv", ["threshold", "literal", "cross"], kl_rows)
    metrics.write_table(out / "wasserstein_above.csv", ["threshold", "w_r"], w_rows)
    summary.append(("wasserstein", metrics.wasserstein(_subsample(gen, cap, rng),
                                                       _subsample(ref, cap, rng))))

    levels = cfg["eval.independence_levels"]
    ind_thresholds = list(np.quantile(r_ref, levels))
    n_k = cfg["eval.n_k"] or None
    res = {}
    for name, x, r in (("generated", gen, r_gen), ("reference", ref, r_ref)):
        keep = r > 0
        polar = PolarDataset(r[keep], x[keep] / r[keep, None])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res[name] = metrics.independence_pvalues(
                polar, ind_thresholds, stream(cfg.seed, f"evaluate/independence/{name}"),
                n_k=n_k, L=cfg["eval.permutations"], m_reps=cfg["eval.repetitions"])
        summary.append((f"selected_threshold_{name}", res[name].selected_threshold))
    rows = []
    for t in ind_thresholds:
        row = [t]
        for name in ("generated", "reference"):
            d = dict(zip(res[name].thresholds, res[name].mean_pvalues))
            row.append(d.get(float(t)))
        rows.append(row)
    metrics.write_table(out / "independence.csv",
                        ["threshold", "pvalue_generated", "pvalue_reference"], rows)

    for name, r in (("generated", r_gen), ("reference", r_ref)):
        r = r[r > 0]
        if r.size >= 10:
            metrics.write_table(out / f"hill_{name}.csv", ["k", "tail_index"],
                                [(int(k), h) for k, h in metrics.hill_plot(r)])

    prop_rows = []
    for p in cfg["eval.quantiles"]:
        u = metrics.marginal_quantiles(ref, p)
        pg = metrics.region_proportion(gen, u)
        pr = metrics.region_proportion(ref, u)
        prop_rows += [(p, j + 1, pg[j], pr[j]) for j in range(ref.shape[1])]
    metrics.write_table(out / "region_proportions.csv",
                        ["quantile", "j", "generated", "reference"], prop_rows)
    metrics.write_table(out / "summary.csv", ["metric", "value"], summary)
    for k, v in summary:
        print(f"{k} {v}")
    return 0


def cmd_probe(cfg: RunConfig, mode: str, n: Optional[int], paths: List[str],
              data_path: Optional[str]) -> int:
    if mode not in PROBE_MODES:
        raise UsageError(f"--mode must be one of {PROBE_MODES}")
    out = _out_dir(cfg)
    rows = []
    if mode == "relu_pushforward":
        gen = baselines.PushforwardGenerator.random(3, 5, stream(cfg.seed, "probe/net"))
        x = baselines.pushforward_sample(gen, n or 10**6, stream(cfg.seed, "probe/draws"))
        p = baselines.angular_concentration_probe(x, 0.999, 3)
        rows += [("pushforward_cluster_fraction", p.cluster_fraction),
                 ("pushforward_dispersion", p.dispersion),
                 ("pushforward_exceedances", p.n_exceedances)]
        if data_path:
            _, xd = data.read_matrix_csv(data_path)
            p = baselines.angular_concentration_probe(xd, 0.999 if xd.shape[0] >= 10**5 else 0.9, 3)
            rows += [("data_cluster_fraction", p.cluster_fraction),
                     ("data_dispersion", p.dispersion),
                     ("data_exceedances", p.n_exceedances)]
    else:
        models = _load_models(paths)
        rng = stream(cfg.seed, "probe/stdvae")
        if "stdvae" in models:
            model = models["stdvae"]
        else:
            x, _ = resolve_data(cfg)
            r = np.abs(x).sum(axis=1)
            model = baselines.StdVaeModel.initialize(1, stream(cfg.seed, "init/stdvae"))
            model, _ = baselines.stdvae_train(model, r, cfg.train_config())
            checkpoint.save(out / "stdvae.ckpt", model, {"seed": cfg.seed})
        s = baselines.stdvae_sample(model, n or 10000, rng)
        radii = s[:, 0] if s.shape[1] == 1 else np.abs(s).sum(axis=1)
        gp = baselines.tail_probe(radii, 0.9)
        rows += [("gp_scale", gp.scale), ("gp_shape", gp.shape)]
    metrics.write_table(out / f"probe_{mode}.csv", ["metric", "value"], rows)
    for k, v in rows:
        print(f"{k} {v}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="extvae", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("synth", "train", "sample", "evaluate", "probe"))
    p.add_argument("--config", help="flat key = value run configuration")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="master seed (overrides seed)")
    p.add_argument("--n", type=int, help="number of draws")
    p.add_argument("--mode", help="sample: joint|angular_measure|radius; "
                                  "probe: relu_pushforward|stdvae_tail")
    p.add_argument("--checkpoint", action="append", default=[], help="checkpoint file (repeatable)")
    p.add_argument("--data", help="data CSV (train: training data; evaluate: generated sample)")
    p.add_argument("--reference", help="reference CSV for evaluate")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    if args.command == "synth":
        return cmd_synth(cfg)
    if args.command == "train":
        return cmd_train(cfg)
    if args.command == "sample":
        if not args.checkpoint:
            raise UsageError("sample needs --checkpoint")
        return cmd_sample(cfg, args.checkpoint, 10000 if args.n is None else args.n,
                          args.mode or "joint")
    if args.command == "evaluate":
        if not (args.data and args.reference):
            raise UsageError("evaluate needs --data (generated) and --reference")
        return cmd_evaluate(cfg, args.data, args.reference)
    return cmd_probe(cfg, args.mode or "relu_pushforward", args.n, args.checkpoint, args.data)


def main(argv=None) -> int:
    try:
        return run(argv)
    except ExtVaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
