"""Threshold selection by the radius/angle independence test, per subsample size.

For each n_k the mean permutation p-value is computed on a grid of radius
thresholds over a synthetic test split, and the selected threshold (the
smallest one whose mean p-value reaches the selection level) is printed.
"""

import argparse

from extvae import data, metrics
from extvae.polar import polar_decompose
from extvae.rng import stream


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-k", type=int, nargs="+", default=[50, 100, 200, 500])
    ap.add_argument("--thresholds", type=float, nargs="+",
                    default=[0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0])
    ap.add_argument("--permutations", type=int, default=100)
    ap.add_argument("--repetitions", type=int, default=10)
    args = ap.parse_args()

    _, _, test = data.synth_dataset(data.SyntheticConfig(seed=args.seed), stream(args.seed, "synth"))
    polar = polar_decompose(test)
    print(f"selection level {metrics.PVALUE_LEVEL}")
    print("n_k  " + "".join(f"{t:>7g}" for t in args.thresholds) + "   selected")
    for n_k in args.n_k:
        res = metrics.independence_pvalues(polar, args.thresholds,
                                           stream(args.seed, f"sweep/{n_k}"), n_k=n_k,
                                           L=args.permutations, m_reps=args.repetitions)
        print(f"{n_k:<5d}" + "".join(f"{p:7.2f}" for p in res.mean_pvalues)
              + f"   {res.selected_threshold}")


if __name__ == "__main__":
    main()
