"""Residual history and GMRES counts of the Newton iteration per preconditioner.

    python3 demos/newton_convergence.py [--cov 0.1] [--s 1]
"""
import argparse
import warnings

from sgeig import NewtonConfig, ProblemSpec, build_problem, run_newton
from sgeig.fem import mean_eigenpairs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cov", type=float, default=0.1)
    ap.add_argument("--s", type=int, default=1)
    args = ap.parse_args()
    p = build_problem(ProblemSpec(cov=args.cov))
    me = mean_eigenpairs(p.A[0], args.s)
    mu, w = me.values[-1], me.vectors[:, -1]
    variants = {
        "cMB(fixed)": NewtonConfig(preconditioner="cmb", mode="fixed"),
        "cMB(updated)": NewtonConfig(preconditioner="cmb", mode="updated"),
        "chGS(p_t=1)": NewtonConfig(p_t=1),
        "chGS(p_t=2)": NewtonConfig(p_t=2),
    }
    for name, cfg in variants.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run_newton(p.op, p.basis, mu, w, cfg, s=args.s)
        hist = " ".join(f"{r:.1e}" for r in res.residual_norms)
        print(f"{name:<13} converged={res.converged!s:<5} GMRES={res.krylov_iterations}")
        print(f"{'':13} |r|: {hist}")


if __name__ == "__main__":
    main()
