"""Moments of the smallest eigenvalue: Monte Carlo samples against collocation.

    python3 demos/mc_vs_sc.py [--cov 0.1] [--samples 10000]
"""
import argparse

import numpy as np

from sgeig import ProblemSpec, build_problem, collocation_run, monte_carlo_run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cov", type=float, default=0.1)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    p = build_problem(ProblemSpec(cov=args.cov))
    sc = collocation_run(p.A, p.basis_a, p.grid, 5, p.basis)
    mc = monte_carlo_run(p.A, p.basis_a, args.samples, args.seed, 5)
    print(f"{'s':>2} {'SC mean':>10} {'SC std':>10} {'MC mean':>10} {'MC std':>10} {'z':>6}")
    for s in range(5):
        c = sc.lam_coeffs[s]
        sd_sc = np.sqrt(np.sum(c[1:] ** 2))  # orthonormal basis: variance is the tail energy
        z = (mc.mean[s] - c[0]) / mc.standard_error[s]
        print(f"{s + 1:>2} {c[0]:10.5f} {sd_sc:10.5f} {mc.mean[s]:10.5f} {np.sqrt(mc.variance[s]):10.5f} {z:6.2f}")


if __name__ == "__main__":
    main()
