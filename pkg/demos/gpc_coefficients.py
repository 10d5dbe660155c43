"""First ten gPC coefficients of the smallest eigenvalue by SC, SISI and NI.

    python3 demos/gpc_coefficients.py [--cov 0.1]
"""
import argparse

from sgeig import NewtonConfig, ProblemSpec, SisiConfig, build_problem, collocation_run, run_newton, run_sisi
from sgeig.fem import mean_eigenpairs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cov", type=float, default=0.1)
    args = ap.parse_args()
    p = build_problem(ProblemSpec(cov=args.cov))
    sc = collocation_run(p.A, p.basis_a, p.grid, 1, p.basis).lam_coeffs[0]
    sisi = run_sisi(p.op, p.basis, p.grid, SisiConfig(n_s=1)).pairs[0].lam
    me = mean_eigenpairs(p.A[0], 1)
    ni = run_newton(p.op, p.basis, me.values[0], me.vectors[:, 0], NewtonConfig()).expansion.lam
    deg = p.basis.total_degrees
    print(f"{'d':>2} {'k':>3} {'SC':>13} {'SISI':>13} {'NI':>13}")
    for k in range(10):
        print(f"{deg[k]:>2} {k + 1:>3} {sc[k]:13.4E} {sisi[k]:13.4E} {ni[k]:13.4E}")


if __name__ == "__main__":
    main()
