"""Freeze high-precision reference values for the special-function tests.

Writes tests/data/special_fn_oracle.npz with mpmath (50 significant digits)
values of ln Γ and ψ on a log-spaced grid over [1e-3, 1e6], and of the
regularized lower incomplete gamma P(a, x) on random (a, x) pairs.
"""

import argparse
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data"
                                         / "special_fn_oracle.npz"))
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=20240101)
    args = ap.parse_args()

    x = np.logspace(-3, 6, args.n)
    lgamma = np.array([float(mp.loggamma(mp.mpf(float(v)))) for v in x])
    digamma = np.array([float(mp.digamma(mp.mpf(float(v)))) for v in x])

    rng = np.random.default_rng(args.seed)
    a = np.exp(rng.uniform(np.log(1e-2), np.log(1e3), args.n))
    # x spread around the bulk of Gamma(a): from deep left tail to far right tail
    xa = a * np.exp(rng.uniform(-3.0, 1.5, args.n))
    pvals = np.array([float(mp.gammainc(mp.mpf(float(s)), 0, mp.mpf(float(t)), regularized=True))
                      for s, t in zip(a, xa)])
    np.savez_compressed(args.out, x=x, lgamma=lgamma, digamma=digamma, a=a, xa=xa, p=pvals)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
