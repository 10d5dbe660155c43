import numpy as np
import pytest

from sgeig.gpc import HERMITE, GpcBasis, triple_product_tensor
from sgeig.problems import ProblemSpec, build_problem
from sgeig.sg_operator import GalerkinOperator


def random_sym(rng, n, scale=1.0):
    B = rng.standard_normal((n, n))
    return scale * (B + B.T) / 2


def random_operator(seed=0, n_x=4, m_xi=2, p=2, pa=None, family=HERMITE, scale=0.1, spd_shift=3.0):
    """Small random Galerkin operator with a dominant positive definite mean."""
    rng = np.random.default_rng(seed)
    basis = GpcBasis.create(family, m_xi, p)
    basis_a = GpcBasis.create(family, m_xi, 2 * p if pa is None else pa)
    Q, _ = np.linalg.qr(rng.standard_normal((n_x, n_x)))
    A = np.empty((basis_a.size, n_x, n_x))
    A[0] = Q @ np.diag(spd_shift + np.arange(n_x, dtype=float)) @ Q.T
    A[0] = 0.5 * (A[0] + A[0].T)
    for ell in range(1, basis_a.size):
        A[ell] = random_sym(rng, n_x, scale)
    tensor = triple_product_tensor(basis_a if basis_a.degree >= p else basis, basis)
    return GalerkinOperator(A, tensor), basis


@pytest.fixture(scope="session")
def bench10():
    return build_problem(ProblemSpec(cov=0.1))


@pytest.fixture(scope="session")
def bench25():
    return build_problem(ProblemSpec(cov=0.25))


@pytest.fixture(scope="session")
def sisi10_ns5(bench10):
    from sgeig.sisi import SisiConfig, run_sisi

    p = bench10
    return run_sisi(p.op, p.basis, p.grid, SisiConfig(n_s=5))


@pytest.fixture(scope="session")
def sisi10_ns1(bench10):
    from sgeig.sisi import SisiConfig, run_sisi

    p = bench10
    return run_sisi(p.op, p.basis, p.grid, SisiConfig(n_s=1))


def _newton(problem, s, **kw):
    from sgeig.fem import mean_eigenpairs
    from sgeig.newton import NewtonConfig, run_newton

    me = mean_eigenpairs(problem.A[0], s)
    problem.op.counters.reset()
    return run_newton(problem.op, problem.basis, me.values[s - 1], me.vectors[:, s - 1], NewtonConfig(**kw), s=s)


@pytest.fixture(scope="session")
def newton10(bench10):
    """Newton runs at CoV 10%: chGS(2) for s = 1 and 4, updated cMB for s = 1."""
    return {
        ("chgs", 1): _newton(bench10, 1, preconditioner="chgs", p_t=2),
        ("chgs", 4): _newton(bench10, 4, preconditioner="chgs", p_t=2),
        ("cmb", 1): _newton(bench10, 1, preconditioner="cmb", mode="updated"),
    }


@pytest.fixture(scope="session")
def sc10(bench10):
    from sgeig.sampling import collocation_run

    p = bench10
    return collocation_run(p.A, p.basis_a, p.grid, 5, p.basis)


@pytest.fixture(scope="session")
def mc10(bench10):
    from sgeig.sampling import monte_carlo_run

    p = bench10
    return monte_carlo_run(p.A, p.basis_a, 10_000, 0, 1, p.basis)
