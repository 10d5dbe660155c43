"""Command-line front end.

``sgeig run <config.json>`` builds a problem, runs one method and writes a
self-describing run directory; ``sgeig compare`` and ``sgeig table`` read
those directories back.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .fem import mean_eigenpairs
from .newton import NewtonConfig, cost_report, run_newton
from .problems import DEFAULT_GRID_LEVEL, ProblemSpec, build_problem
from .sampling import collocation_run, monte_carlo_run
from .sisi import SisiConfig, run_sisi

METHODS = ("sisi", "newton", "mc", "sc")
TABLE_KINDS = ("pcg-iters", "gmres-iters", "gpc-coeffs", "cost")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {"enum": ["lognormal-diffusion", "uniform-diffusion", "synthetic"]},
        "n_el": {"type": "integer", "minimum": 1},
        "m_xi": {"type": "integer", "minimum": 1},
        "p": {"type": "integer", "minimum": 0},
        "p_t": {"type": "integer", "minimum": 0},
        "cov": {"type": "number", "exclusiveMinimum": 0},
        "Lx": {"type": "number", "exclusiveMinimum": 0},
        "Ly": {"type": "number", "exclusiveMinimum": 0},
        "mean_a": {"type": "number", "exclusiveMinimum": 0},
        "g0_mode": {"enum": ["truncated", "pointwise"]},
        "grid_level": {"type": "integer", "minimum": 1},
        "n_x": {"type": "integer", "minimum": 1},
        "method": {"enum": list(METHODS)},
        "n_s": {"type": "integer", "minimum": 1},
        "steps": {"type": "integer", "minimum": 1},
        "tau_pcg": {"type": "number", "exclusiveMinimum": 0},
        "sisi_preconditioner": {"enum": ["mb", "hgs"]},
        "solver": {"enum": ["gmres", "minres"]},
        "side": {"enum": ["left", "right"]},
        "preconditioner": {"enum": ["nmb", "cmb", "chgs", "none"]},
        "mode": {"enum": ["fixed", "updated"]},
        "eps_M": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "tau_krylov": {"type": "number", "exclusiveMinimum": 0},
        "newton_tol": {"type": "number", "exclusiveMinimum": 0},
        "max_steps": {"type": "integer", "minimum": 1},
        "maxit": {"type": "integer", "minimum": 1},
        "n_samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": ["string", "null"]},
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "lognormal-diffusion"
    n_el: int = 16
    m_xi: int = 3
    p: int = 3
    p_t: int = 2
    cov: float = 0.1
    Lx: float = 2.0
    Ly: float = 2.0
    mean_a: float = 1.0
    g0_mode: str = "truncated"
    grid_level: int = DEFAULT_GRID_LEVEL
    n_x: int = 6
    method: str = "sisi"
    n_s: int = 1
    steps: int = 20
    tau_pcg: float = 1e-2
    sisi_preconditioner: str = "mb"
    solver: str = "gmres"
    side: str = "left"
    preconditioner: str = "chgs"
    mode: str = "updated"
    eps_M: float | None = None
    tau_krylov: float = 1e-1
    newton_tol: float = 1e-10
    max_steps: int = 50
    maxit: int = 500
    n_samples: int = 10_000
    seed: int = 0
    output: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        try:
            jsonschema.validate(doc, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(exc.message) from None
        cfg = cls(**doc)
        cfg.check()
        return cfg

    def check(self) -> None:
        uses_pt = (self.method == "sisi" and self.sisi_preconditioner == "hgs") or (
            self.method == "newton" and self.preconditioner == "chgs"
        )
        if uses_pt and self.p_t > self.p:
            raise ConfigError(f"p_t={self.p_t} exceeds p={self.p}")
        if self.method == "newton":
            try:
                self.newton_config()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec(
            kind=self.problem,
            n_el=self.n_el,
            m_xi=self.m_xi,
            p=self.p,
            cov=self.cov,
            Lx=self.Lx,
            Ly=self.Ly,
            mean_a=self.mean_a,
            g0_mode=self.g0_mode,
            grid_level=self.grid_level,
            n_x=self.n_x,
            seed=self.seed if self.problem == "synthetic" else 0,
        )

    def sisi_config(self) -> SisiConfig:
        return SisiConfig(
            n_s=self.n_s,
            steps=self.steps,
            tau=self.tau_pcg,
            preconditioner=self.sisi_preconditioner,
            p_t=self.p_t,
            maxit=self.maxit,
        )

    def newton_config(self) -> NewtonConfig:
        return NewtonConfig(
            tol=self.newton_tol,
            tau=self.tau_krylov,
            solver=self.solver,
            side=self.side,
            preconditioner=self.preconditioner,
            mode=self.mode,
            p_t=self.p_t,
            eps_M=self.eps_M,
            max_steps=self.max_steps,
            maxit=self.maxit,
        )


def load_config(path: Path) -> RunConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict) and "config" in doc and "versions" in doc:
        doc = doc["config"]  # a previous run.json
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig.from_dict(doc)


# ---------------------------------------------------------------- writing


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _coeff_rows(lam_by_s, degrees):
    for s, lam in lam_by_s:
        for k, v in enumerate(lam):
            yield s, k + 1, int(degrees[k]), _fmt(v)


def _run_sisi(cfg, problem, jobs):
    res = run_sisi(problem.op, problem.basis, problem.grid, cfg.sisi_config())
    lam = [(p.s, p.lam) for p in res.pairs]
    its = [(s + 1, n + 1, int(res.pcg_iterations[n, s])) for n in range(res.pcg_iterations.shape[0]) for s in range(cfg.n_s)]
    resid = [
        (p.s, n, _fmt(p.eps1[n]), _fmt(p.eps_var[n]), _fmt(p.residual_norms[n]))
        for p in res.pairs
        for n in range(len(p.residual_norms))
    ]
    cost = {"counters": res.counters, "n_a": problem.op.n_a, "n_xi": problem.op.n_xi, "n_x": problem.op.n_x}
    summary = {"average_pcg_iterations": res.pcg_iterations.mean(axis=0).tolist(), "shift": res.shift}
    return lam, its, resid, None, cost, summary


def _run_newton(cfg, problem, jobs):
    ncfg = cfg.newton_config()
    mean = mean_eigenpairs(problem.A[0], cfg.n_s)

    def one(s):
        before = problem.op.counters.snapshot()
        r = run_newton(problem.op, problem.basis, mean.values[s], mean.vectors[:, s], ncfg, s=s + 1)
        if jobs <= 1:
            # counters are shared by all eigenpairs; keep this run's share only
            r.counters = {k: v - before.get(k, 0) for k, v in r.counters.items()}
        return r

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(cfg.n_s)))
    else:
        results = [one(s) for s in range(cfg.n_s)]
    failed = [s + 1 for s, r in enumerate(results) if not r.converged]
    lam = [(s + 1, r.expansion.lam) for s, r in enumerate(results)]
    its = [(s + 1, n + 1, int(c)) for s, r in enumerate(results) for n, c in enumerate(r.krylov_iterations)]
    resid = [(s + 1, n, "", "", _fmt(v)) for s, r in enumerate(results) for n, v in enumerate(r.residual_norms)]
    reports = []
    for s, r in enumerate(results):
        rep = cost_report(problem.op, r, problem.basis, ncfg.preconditioner, ncfg.p_t)
        rep["s"] = s + 1
        reports.append(rep)
    cost = {"runs": reports, "counters": problem.op.counters.snapshot()}
    summary = {
        "converged": [r.converged for r in results],
        "step_lengths": [r.step_lengths for r in results],
        "backtracks": [r.backtracks for r in results],
        "warnings": [r.warnings for r in results],
    }
    if failed:
        summary["error"] = f"Newton iteration did not reach tolerance for eigenpairs {failed}"
    return lam, its, resid, None, cost, summary


def _sample_rows(run, n_s):
    w = run.weights if run.weights is not None else np.full(run.points.shape[0], 1.0 / run.points.shape[0])
    for i, (xi, wi, lam) in enumerate(zip(run.points, w, run.eigenvalues)):
        yield [i, _fmt(wi), *(_fmt(x) for x in xi), *(_fmt(v) for v in lam[:n_s])]


def _run_sampling(cfg, problem, jobs):
    if cfg.method == "sc":
        mean = mean_eigenpairs(problem.A[0], cfg.n_s)
        run = collocation_run(problem.A, problem.basis_a, problem.grid, cfg.n_s, problem.basis, mean.vectors, jobs)
    else:
        run = monte_carlo_run(problem.A, problem.basis_a, cfg.n_samples, cfg.seed, cfg.n_s, problem.basis, jobs)
    lam = [(s + 1, run.lam_coeffs[s]) for s in range(cfg.n_s)]
    samples = list(_sample_rows(run, cfg.n_s))
    cost = {"n_points": int(run.points.shape[0]), "eigensolves": int(run.points.shape[0])}
    summary = {
        "mean": run.mean.tolist(),
        "variance": run.variance.tolist(),
        "standard_error": run.standard_error.tolist(),
    }
    return lam, [], [], samples, cost, summary


RUNNERS = {"sisi": _run_sisi, "newton": _run_newton, "mc": _run_sampling, "sc": _run_sampling}


def execute(cfg: RunConfig, out: Path, jobs: int = 1) -> dict:
    """Run ``cfg`` and write all artifacts to ``out``; returns the run record."""
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.problem_spec()
    problem = build_problem(spec)
    lam, its, resid, samples, cost, summary = RUNNERS[cfg.method](cfg, problem, jobs)
    degrees = problem.basis.total_degrees
    _write_csv(out / "eigen_coeffs.csv", ["s", "k", "degree", "value"], _coeff_rows(lam, degrees))
    _write_csv(out / "iterations.csv", ["s", "step", "iterations"], its)
    _write_csv(out / "residuals.csv", ["s", "step", "eps1", "eps_var", "residual_norm"], resid)
    if samples is not None:
        header = ["index", "weight", *(f"xi{j + 1}" for j in range(cfg.m_xi)), *(f"lambda{s + 1}" for s in range(cfg.n_s))]
        _write_csv(out / "samples.csv", header, samples)
    cost.update({"method": cfg.method, "problem_hash": spec.digest()})
    _write_json(out / "cost.json", cost)
    record = {
        "config": asdict(cfg),
        "problem": asdict(spec),
        "problem_hash": spec.digest(),
        "versions": {
            "sgeig": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "summary": summary,
    }
    _write_json(out / "run.json", record)
    return record


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, json.JSONDecodeError, TypeError) as exc:
        return _fail("config", str(exc), 2)
    except OSError as exc:
        return _fail("io", str(exc), 2)
    out = Path(args.out or cfg.output or "sgeig-run")
    try:
        record = execute(cfg, out, max(args.jobs, 1))
    except Exception as exc:  # solver failures become a machine-readable error
        out.mkdir(parents=True, exist_ok=True)
        return _fail(type(exc).__name__, str(exc), 1, out)
    err = record["summary"].get("error")
    if err:
        return _fail("convergence", err, 1, out)
    print(f"wrote {out}")
    return 0


def _fail(kind: str, message: str, code: int, out: Path | None = None) -> int:
    doc = {"error": kind, "message": message, "exit_code": code}
    if out is not None:
        _write_json(out / "error.json", doc)
    print(json.dumps(doc), file=sys.stderr)
    return code


# ---------------------------------------------------------------- reading


class ArtifactError(RuntimeError):
    pass


def _load_run(path: Path) -> dict:
    path = Path(path)
    rec_path = path / "run.json"
    if not rec_path.is_file():
        raise ArtifactError(f"{path}: missing run.json")
    rec = json.loads(rec_path.read_text(encoding="utf-8"))
    rec["dir"] = str(path)
    return rec


def _read_csv(path: Path) -> list[dict]:
    if not path.is_file():
        raise ArtifactError(f"missing {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def load_coefficients(path: Path) -> dict[tuple[int, int], float]:
    rows = _read_csv(Path(path) / "eigen_coeffs.csv")
    return {(int(r["s"]), int(r["k"])): float(r["value"]) for r in rows}


def _label(rec: dict) -> str:
    c = rec["config"]
    if c["method"] == "sisi":
        prec = c["sisi_preconditioner"]
        return f"sisi/{prec}" + (f"({c['p_t']})" if prec == "hgs" else "")
    if c["method"] == "newton":
        prec = c["preconditioner"]
        return f"ni/{prec}" + (f"({c['p_t']})" if prec == "chgs" else f"[{c['mode']}]")
    return c["method"]


def compare_runs(dirs, rtol: float = 1e-3, large: float = 1e-4) -> dict:
    """Coefficient discrepancies of every run against the first one.

    Relative discrepancies are taken over "large" coefficients, those with
    ``|value| >= large * |mean coefficient|`` in the reference run.
    """
    if len(dirs) < 2:
        raise ArtifactError("compare needs at least two run directories")
    recs = [_load_run(d) for d in dirs]
    hashes = {r["problem_hash"] for r in recs}
    if len(hashes) != 1:
        raise ArtifactError(f"runs are on different problems: {sorted(hashes)}")
    coeffs = [load_coefficients(d) for d in dirs]
    keys = sorted(set.intersection(*(set(c) for c in coeffs)))
    if not keys:
        raise ArtifactError("runs share no coefficients")
    ref = coeffs[0]
    max_abs, max_rel = 0.0, 0.0
    for key in keys:
        scale = abs(ref[(key[0], 1)]) if (key[0], 1) in ref else 1.0
        for c in coeffs[1:]:
            d = abs(c[key] - ref[key])
            max_abs = max(max_abs, d)
            if abs(ref[key]) >= large * scale:
                max_rel = max(max_rel, d / abs(ref[key]))
    return {
        "labels": [_label(r) for r in recs],
        "keys": keys,
        "values": [[c[k] for c in coeffs] for k in keys],
        "max_abs": max_abs,
        "max_rel": max_rel,
        "rtol": rtol,
        "passed": max_rel < rtol,
    }


def cmd_compare(args) -> int:
    try:
        rep = compare_runs(args.dirs, args.rtol, args.large)
    except (ArtifactError, OSError, json.JSONDecodeError) as exc:
        return _fail("compare", str(exc), 2)
    lines = [" ".join(["s", "k"] + [f"{lab:>14s}" for lab in rep["labels"]])]
    for (s, k), vals in zip(rep["keys"], rep["values"]):
        lines.append(" ".join([str(s), str(k)] + [f"{v:14.5E}" for v in vals]))
    lines.append(f"max abs discrepancy {rep['max_abs']:.5E}")
    lines.append(f"max rel discrepancy {rep['max_rel']:.5E} (large coefficients, tol {rep['rtol']:.1E})")
    lines.append("PASS" if rep["passed"] else "FAIL")
    print("\n".join(lines))
    return 0 if rep["passed"] else 1


def render_table(kind: str, dirs) -> str:
    if not dirs:
        raise ArtifactError("no run directories given")
    recs = [_load_run(d) for d in dirs]
    if kind == "pcg-iters":
        return _table_pcg(recs)
    if kind == "gmres-iters":
        return _table_gmres(recs)
    if kind == "gpc-coeffs":
        return _table_coeffs(recs)
    if kind == "cost":
        return _table_cost(recs)
    raise ArtifactError(f"unknown table kind {kind!r}")


def _iterations(rec) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for r in _read_csv(Path(rec["dir"]) / "iterations.csv"):
        out.setdefault(int(r["s"]), []).append(int(r["iterations"]))
    return out


def _table_pcg(recs) -> str:
    n_s = max(r["config"]["n_s"] for r in recs)
    lines = [f"{'preconditioner':16s}" + "".join(f"{s:>8d}" for s in range(1, n_s + 1))]
    for rec in recs:
        if rec["config"]["method"] != "sisi":
            raise ArtifactError(f"{rec['dir']}: pcg-iters needs a sisi run")
        its = _iterations(rec)
        cells = [f"{np.mean(its[s]):8.2f}" if s in its else f"{'-':>8s}" for s in range(1, n_s + 1)]
        lines.append(f"{_label(rec):16s}" + "".join(cells))
    return "\n".join(lines)


def _table_gmres(recs) -> str:
    cols, width = [], 0
    for rec in recs:
        if rec["config"]["method"] != "newton":
            raise ArtifactError(f"{rec['dir']}: gmres-iters needs a newton run")
        for s, its in sorted(_iterations(rec).items()):
            cols.append((f"{_label(rec)} s={s}", its))
            width = max(width, len(its))
    w = max(len(c[0]) for c in cols) + 2
    lines = ["step" + "".join(f"{c[0]:>{w}s}" for c in cols)]
    for n in range(width):
        lines.append(f"{n + 1:4d}" + "".join(f"{c[1][n]:>{w}d}" if n < len(c[1]) else " " * w for c in cols))
    lines.append("sum " + "".join(f"{sum(c[1]):>{w}d}" for c in cols))
    return "\n".join(lines)


def _table_coeffs(recs) -> str:
    data = [(_label(r), load_coefficients(r["dir"])) for r in recs]
    degrees = {}
    for r in recs:
        for row in _read_csv(Path(r["dir"]) / "eigen_coeffs.csv"):
            degrees[int(row["k"])] = int(row["degree"])
    keys = sorted(set().union(*(set(c) for _, c in data)))
    lines = ["s   k  deg" + "".join(f"{lab:>14s}" for lab, _ in data)]
    for s, k in keys:
        cells = "".join(f"{c[(s, k)]:14.4E}" if (s, k) in c else f"{'-':>14s}" for _, c in data)
        lines.append(f"{s:<3d} {k:<3d}{degrees[k]:>3d}" + cells)
    return "\n".join(lines)


def _table_cost(recs) -> str:
    head = ["run", "s", "n_a", "n_t", "n_xi", "n_iter", "c_mvp", "c_prec", "log10 cost"]
    lines = ["".join(f"{h:>14s}" for h in head)]
    for rec in recs:
        path = Path(rec["dir"]) / "cost.json"
        if not path.is_file():
            raise ArtifactError(f"missing {path}")
        cost = json.loads(path.read_text(encoding="utf-8"))
        if "runs" not in cost:
            raise ArtifactError(f"{rec['dir']}: cost table needs a newton run")
        for r in cost["runs"]:
            vals = [_label(rec), r["s"], r["n_a"], r["n_t"], r["n_xi"], r["n_iter"], r["c_mvp"], r["c_prec"]]
            lines.append("".join(f"{str(v):>14s}" for v in vals) + f"{r['log10_estimated_cost']:14.3f}")
    return "\n".join(lines)


def cmd_table(args) -> int:
    try:
        print(render_table(args.kind, args.dirs))
    except (ArtifactError, OSError, json.JSONDecodeError, KeyError) as exc:
        return _fail("table", str(exc), 2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgeig", description="Stochastic Galerkin eigenvalue solvers.")
    ap.add_argument("--version", action="version", version=f"sgeig {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one method from a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--jobs", type=int, default=1, help="workers across eigenpairs or samples")
    run.add_argument("--out", type=Path, default=None, help="output directory")
    run.set_defaults(func=cmd_run)
    cmp_ = sub.add_parser("compare", help="compare eigenvalue coefficients across runs")
    cmp_.add_argument("dirs", nargs="+", type=Path)
    cmp_.add_argument("--rtol", type=float, default=1e-3)
    cmp_.add_argument("--large", type=float, default=1e-4, help="large-coefficient threshold relative to the mean")
    cmp_.set_defaults(func=cmd_compare)
    tab = sub.add_parser("table", help="render a table from run directories")
    tab.add_argument("kind", choices=TABLE_KINDS)
    tab.add_argument("dirs", nargs="*", type=Path)
    tab.set_defaults(func=cmd_table)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
