"""Average PCG iterations of inverse subspace iteration, MB versus hGS.

Runs the five smallest eigenpairs of the lognormal diffusion benchmark
and prints one row per preconditioner.

    python3 demos/pcg_iterations.py [--cov 0.1]
"""
import argparse

from sgeig import ProblemSpec, SisiConfig, build_problem, run_sisi


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cov", type=float, default=0.1)
    args = ap.parse_args()
    p = build_problem(ProblemSpec(cov=args.cov))
    variants = [("MB", SisiConfig(n_s=5))]
    variants += [(f"hGS(p_t={t})", SisiConfig(n_s=5, preconditioner="hgs", p_t=t)) for t in (1, 2, 3)]
    print(f"CoV={args.cov:g}  " + "".join(f"{s:>8}" for s in ("1st", "2nd", "3rd", "4th", "5th")))
    for name, cfg in variants:
        its = run_sisi(p.op, p.basis, p.grid, cfg).pcg_iterations.mean(axis=0)
        print(f"{name:<12}" + "".join(f"{x:8.2f}" for x in its))


if __name__ == "__main__":
    main()
