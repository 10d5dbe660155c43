import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_operator
from sgeig.gpc import HERMITE, GpcBasis, triple_product_tensor
from sgeig.krylov import SolverError, minres
from sgeig.preconditioners import (
    CHGSPreconditioner,
    CMBPreconditioner,
    HGSPreconditioner,
    MBPreconditioner,
    NMBPreconditioner,
    SaddleMeanBlock,
)
from sgeig.sg_operator import GalerkinOperator, vec


def _deterministic_op(A1, m_xi=2, p=2):
    b = GpcBasis.create(HERMITE, m_xi, p)
    return GalerkinOperator(np.asarray(A1)[None], triple_product_tensor(b, b)), b


def _blocks_of(basis):
    return basis.block_ranges()


# ---------------------------------------------------------------- MB / hGS


def test_mb_identity_and_oracle():
    op, _ = _deterministic_op(np.eye(3))
    R = np.random.default_rng(0).standard_normal(op.shape)
    np.testing.assert_allclose(MBPreconditioner(op).apply(R), R, atol=1e-15)
    op, b = random_operator(seed=1)
    R = np.random.default_rng(1).standard_normal(op.shape)
    P = np.kron(np.eye(op.n_xi), np.linalg.inv(op.A[0]))
    np.testing.assert_allclose(vec(MBPreconditioner(op).apply(R)), P @ vec(R), atol=1e-12)


def test_mb_single_column():
    op, _ = random_operator(seed=2)
    r = np.ones((op.n_x, 1))
    np.testing.assert_allclose(MBPreconditioner(op).apply(r), np.linalg.solve(op.A[0], r), atol=1e-13)


def test_mb_rejects_indefinite_mean():
    op, _ = _deterministic_op(np.diag([1.0, -1.0]))
    with pytest.raises(np.linalg.LinAlgError):
        MBPreconditioner(op)


def test_hgs_pt0_equals_mb():
    op, b = random_operator(seed=3, m_xi=2, p=3)
    R = np.random.default_rng(0).standard_normal(op.shape)
    np.testing.assert_allclose(HGSPreconditioner(op, b, 0).apply(R), MBPreconditioner(op).apply(R), atol=1e-14)


def test_hgs_deterministic_operator_equals_mb():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((4, 4))
    op, b = _deterministic_op(B @ B.T + 4 * np.eye(4), p=3)
    R = rng.standard_normal(op.shape)
    for p_t in range(4):
        np.testing.assert_allclose(HGSPreconditioner(op, b, p_t).apply(R), MBPreconditioner(op).apply(R), atol=1e-14)


def _dense_sgs(K, D, blocks_idx, r):
    """Symmetric block Gauss-Seidel with diagonal blocks D over index lists."""
    nb = len(blocks_idx)
    x = np.zeros_like(r)
    for d in range(nb):
        rows = blocks_idx[d]
        prev = np.concatenate(blocks_idx[:d]) if d else np.array([], int)
        x[rows] = D(d) @ (r[rows] - K[np.ix_(rows, prev)] @ x[prev])
    for d in range(nb - 2, -1, -1):
        rows = blocks_idx[d]
        other = np.concatenate([blocks_idx[j] for j in range(nb) if j != d])
        x[rows] = D(d) @ (r[rows] - K[np.ix_(rows, other)] @ x[other])
    return x


def test_hgs_matches_dense_block_gauss_seidel():
    op, b = random_operator(seed=4, n_x=3, m_xi=2, p=3)
    p_t = 1
    nt = 3
    n_x = op.n_x
    Kt = sum(np.kron(op.H[t], op.A[t]) for t in range(nt))
    idx = [np.concatenate([np.arange(k * n_x, (k + 1) * n_x) for k in range(s.start, s.stop)]) for s in _blocks_of(b)]
    A1inv = np.linalg.inv(op.A[0])
    D = lambda d: np.kron(np.eye(len(idx[d]) // n_x), A1inv)  # noqa: E731
    R = np.random.default_rng(5).standard_normal(op.shape)
    ref = _dense_sgs(Kt, D, idx, vec(R))
    np.testing.assert_allclose(vec(HGSPreconditioner(op, b, p_t).apply(R)), ref, atol=1e-12)


def _induced(apply, shape):
    n = shape[0] * shape[1]
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(vec(apply(e.reshape(shape, order="F"))))
    return np.array(cols).T


@pytest.mark.parametrize("p_t", [1, 2, 3])
def test_hgs_symmetric(p_t):
    op, b = random_operator(seed=6, n_x=3, m_xi=2, p=3)
    P = _induced(HGSPreconditioner(op, b, p_t).apply, op.shape)
    assert np.abs(P - P.T).max() <= 1e-10 * np.abs(P).max()


def test_hgs_stationary_iteration_reduces_residual():
    op, b = random_operator(seed=7, n_x=5, m_xi=2, p=3, scale=0.05)
    P = HGSPreconditioner(op, b, 2)
    B = np.random.default_rng(0).standard_normal(op.shape)
    X = np.zeros_like(B)
    norms = [np.linalg.norm(B)]
    for _ in range(5):
        X = X + P.apply(B - op.matvec(X))
        norms.append(np.linalg.norm(B - op.matvec(X)))
    assert all(b2 < b1 for b1, b2 in zip(norms, norms[1:]))


def test_hgs_rejects_bad_truncation():
    op, b = random_operator(p=2)
    with pytest.raises(ValueError):
        HGSPreconditioner(op, b, 3)
    with pytest.raises(ValueError):
        HGSPreconditioner(op, b, -1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.floats(-3, 3), st.floats(-3, 3))
def test_preconditioners_linear(seed, a, c):
    op, b = random_operator(seed=seed % 20, n_x=3, m_xi=2, p=2)
    rng = np.random.default_rng(seed)
    r1, r2 = rng.standard_normal((2, *op.shape))
    l1, l2 = rng.standard_normal((2, op.n_xi))
    for P in (MBPreconditioner(op), HGSPreconditioner(op, b, 1)):
        lhs = P.apply(a * r1 + c * r2)
        np.testing.assert_allclose(lhs, a * P.apply(r1) + c * P.apply(r2), atol=1e-12 * (1 + np.abs(lhs).max()))
    mu, W = np.linalg.eigh(op.A[0])
    for P in (
        NMBPreconditioner(op, mu[0], W[:, 0]),
        CMBPreconditioner(op, mu[0], W[:, 0]),
        CHGSPreconditioner(op, b, 1, mu[0], W[:, 0]),
    ):
        u1, v1 = P.apply(r1, l1)
        u2, v2 = P.apply(r2, l2)
        u, v = P.apply(a * r1 + c * r2, a * l1 + c * l2)
        scale = 1 + np.abs(u).max() + np.abs(v).max()
        np.testing.assert_allclose(u, a * u1 + c * u2, atol=1e-10 * scale)
        np.testing.assert_allclose(v, a * v1 + c * v2, atol=1e-10 * scale)


# ------------------------------------------------------ Newton preconditioners


def test_nmb_identity():
    # A1 - eps mu I = I with mu = 1, eps = 0.95
    op, _ = _deterministic_op(1.95 * np.eye(3))
    w = np.array([0.6, 0.8, 0.0])
    P = NMBPreconditioner(op, 1.0, w)
    R = np.random.default_rng(0).standard_normal(op.shape)
    rl = np.arange(op.n_xi, dtype=float)
    u, l = P.apply(R, rl)
    np.testing.assert_allclose(u, R, atol=1e-14)
    np.testing.assert_allclose(l, rl, atol=1e-14)
    assert P.is_spd()


def test_nmb_oracle_and_spd_for_smallest_pair():
    op, b = random_operator(seed=8)
    mu, W = np.linalg.eigh(op.A[0])
    P = NMBPreconditioner(op, mu[0], W[:, 0])
    assert P.is_spd()
    Ms = op.A[0] - 0.95 * mu[0] * np.eye(op.n_x)
    R = np.random.default_rng(1).standard_normal(op.shape)
    rl = np.random.default_rng(2).standard_normal(op.n_xi)
    u, l = P.apply(R, rl)
    np.testing.assert_allclose(u, np.linalg.solve(Ms, R), atol=1e-12)
    np.testing.assert_allclose(l, rl / (W[:, 0] @ np.linalg.solve(Ms, W[:, 0])), atol=1e-12)
    # an interior eigenpair makes the shifted mean indefinite
    assert not NMBPreconditioner(op, mu[2], W[:, 2]).is_spd()


def test_cmb_unit_saddle_example():
    op, _ = _deterministic_op(1.95 * np.eye(3))
    w = np.array([1.0, 0.0, 0.0])
    P = CMBPreconditioner(op, 1.0, w, eps_M=0.95, pseudo=False)
    R = np.zeros(op.shape)
    R[0, 0] = 1.0
    rl = np.zeros(op.n_xi)
    rl[0] = 1.0
    u, l = P.apply(R, rl)
    K = np.array([[1, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0], [-1, 0, 0, 0]], float)
    ref = np.linalg.solve(K, [1, 0, 0, 1])
    np.testing.assert_allclose(u[:, 0], ref[:3], atol=1e-14)
    assert u[0, 0] == pytest.approx(-1.0)
    assert l[0] == pytest.approx(ref[3])
    np.testing.assert_allclose(u[:, 1:], 0.0, atol=1e-15)


@pytest.mark.parametrize("pseudo,eps", [(False, 0.95), (True, 1.0), (True, 0.95)])
def test_cmb_matches_saddle_solve(pseudo, eps):
    op, b = random_operator(seed=9)
    mu, W = np.linalg.eigh(op.A[0])
    P = CMBPreconditioner(op, mu[0], W[:, 0], eps_M=eps, pseudo=pseudo)
    n = op.n_x
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = op.A[0] - eps * mu[0] * np.eye(n)
    K[:n, n] = K[n, :n] = -W[:, 0]
    Kinv = np.linalg.pinv(K, rcond=1e-10) if pseudo else np.linalg.inv(K)
    rng = np.random.default_rng(3)
    R, rl = rng.standard_normal(op.shape), rng.standard_normal(op.n_xi)
    u, l = P.apply(R, rl)
    Z = Kinv @ np.vstack([R, rl])
    np.testing.assert_allclose(u, Z[:n], atol=1e-10)
    np.testing.assert_allclose(l, Z[n], atol=1e-10)
    # the constraint row is reproduced: -w^T u_k = r_lam,k
    if not pseudo:
        np.testing.assert_allclose(-W[:, 0] @ u, rl, atol=1e-10)


def test_cmb_pseudoinverse_constraint_row():
    # with eps_M = 1 the bordered block remains nonsingular, so the pseudoinverse is an inverse
    op, b = random_operator(seed=10)
    mu, W = np.linalg.eigh(op.A[0])
    P = CMBPreconditioner(op, mu[0], W[:, 0], mode="updated")
    assert P.eps_M == 1.0 and P.block.pseudo
    rng = np.random.default_rng(4)
    R, rl = rng.standard_normal(op.shape), rng.standard_normal(op.n_xi)
    u, _ = P.apply(R, rl)
    np.testing.assert_allclose(-W[:, 0] @ u, rl, atol=1e-10)


def test_cmb_indefinite_rejected_by_minres():
    op, _ = _deterministic_op(1.95 * np.eye(3))
    P = CMBPreconditioner(op, 1.0, np.array([1.0, 0.0, 0.0]), eps_M=0.95, pseudo=False)
    n = op.n_x * op.n_xi

    def precond(x):
        u, l = P.apply(x[:n].reshape(op.shape, order="F"), x[n:])
        return np.concatenate([vec(u), l])

    rhs = np.zeros(n + op.n_xi)
    rhs[n] = 1.0
    with pytest.raises(SolverError):
        minres(lambda x: x, rhs, precond)


def test_saddle_block_singular_detected():
    with pytest.raises(np.linalg.LinAlgError):
        SaddleMeanBlock(np.eye(2), 1.0, np.zeros(2), 0.5, pseudo=False)


def test_chgs_pt0_equals_updated_cmb():
    op, b = random_operator(seed=11, m_xi=2, p=3)
    mu, W = np.linalg.eigh(op.A[0])
    rng = np.random.default_rng(0)
    U = rng.standard_normal(op.shape) * 0.1
    U[:, 0] += W[:, 0]
    lam = rng.standard_normal(op.n_xi) * 0.1
    lam[0] = mu[0]
    ch = CHGSPreconditioner(op, b, 0, mu[0], W[:, 0])
    cm = CMBPreconditioner(op, mu[0], W[:, 0], mode="updated")
    ch.update(U, lam)
    cm.update(U, lam)
    R, rl = rng.standard_normal(op.shape), rng.standard_normal(op.n_xi)
    for x, y in zip(ch.apply(R, rl), cm.apply(R, rl)):
        np.testing.assert_allclose(x, y, atol=1e-13)


def test_chgs_deterministic_limit_equals_cmb():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((4, 4))
    op, b = _deterministic_op(B @ B.T + 4 * np.eye(4), p=2)
    mu, W = np.linalg.eigh(op.A[0])
    ch = CHGSPreconditioner(op, b, 2, mu[0], W[:, 0])
    cm = CMBPreconditioner(op, mu[0], W[:, 0], mode="updated")
    R, rl = rng.standard_normal(op.shape), rng.standard_normal(op.n_xi)
    for x, y in zip(ch.apply(R, rl), cm.apply(R, rl)):
        np.testing.assert_allclose(x, y, atol=1e-12)


@pytest.mark.parametrize("p_t,eps,pseudo", [(1, 0.95, False), (2, 0.95, False), (1, 1.0, True)])
def test_chgs_matches_dense_block_gauss_seidel(p_t, eps, pseudo):
    op, b = random_operator(seed=12, n_x=3, m_xi=2, p=2)
    n_x, n_xi = op.shape
    nt = {0: 1, 1: 3, 2: 6}[p_t]
    mu, W = np.linalg.eigh(op.A[0])
    rng = np.random.default_rng(2)
    U = 0.1 * rng.standard_normal(op.shape)
    U[:, 0] += W[:, 0]
    lam = 0.1 * rng.standard_normal(n_xi)
    lam[0] = mu[0]
    # per-index unknowns (u_k, lam_k), blocks of size n_x + 1
    m = n_x + 1
    K = np.zeros((m * n_xi, m * n_xi))
    for r in range(n_xi):
        for c in range(n_xi):
            h = op.H[:nt, r, c]
            blk = np.zeros((m, m))
            blk[:n_x, :n_x] = np.tensordot(h, op.A[:nt], axes=1) - (h @ lam[:nt]) * np.eye(n_x)
            g = U[:, :nt] @ h
            blk[:n_x, n_x] = -g
            blk[n_x, :n_x] = -g
            K[r * m : (r + 1) * m, c * m : (c + 1) * m] = blk
    S = np.zeros((m, m))
    S[:n_x, :n_x] = op.A[0] - eps * mu[0] * np.eye(n_x)
    S[:n_x, n_x] = S[n_x, :n_x] = -U[:, 0]
    Sinv = np.linalg.pinv(S, rcond=1e-10) if pseudo else np.linalg.inv(S)
    blocks = b.block_ranges()
    idx = [np.concatenate([np.arange(k * m, (k + 1) * m) for k in range(s.start, s.stop)]) for s in blocks]
    D = lambda d: np.kron(np.eye(len(idx[d]) // m), Sinv)  # noqa: E731
    R, rl = rng.standard_normal(op.shape), rng.standard_normal(n_xi)
    r = np.vstack([R, rl]).reshape(-1, order="F")
    ref = _dense_sgs(K, D, idx, r).reshape(m, n_xi, order="F")
    P = CHGSPreconditioner(op, b, p_t, mu[0], W[:, 0], eps_M=eps, pseudo=pseudo)
    P.update(U, lam)
    u, l = P.apply(R, rl)
    np.testing.assert_allclose(u, ref[:n_x], atol=1e-10)
    np.testing.assert_allclose(l, ref[n_x], atol=1e-10)


def test_dense_oracle_off_blocks_match_jacobian():
    # with p_t = p the oracle's couplings are the full symmetrized Jacobian
    from sgeig.newton import explicit_jacobian

    op, b = random_operator(seed=13, n_x=3, m_xi=2, p=1, pa=1)
    n_x, n_xi = op.shape
    rng = np.random.default_rng(0)
    U, lam = rng.standard_normal(op.shape), rng.standard_normal(n_xi)
    J = explicit_jacobian(op, U, lam)
    m = n_x + 1
    perm = np.concatenate([np.r_[np.arange(k * n_x, (k + 1) * n_x), n_x * n_xi + k] for k in range(n_xi)])
    Jp = J[np.ix_(perm, perm)]
    r, c = 0, 1
    h = op.H[:, r, c]
    assert Jp[r * m : r * m + n_x, c * m : c * m + n_x] == pytest.approx(
        np.tensordot(h[: op.n_a], op.A, axes=1) - (h @ lam) * np.eye(n_x)
    )
    np.testing.assert_allclose(Jp[r * m : r * m + n_x, c * m + n_x], -(U @ h), atol=1e-14)


def test_newton_preconditioner_mode_validation():
    op, _ = random_operator()
    mu, W = np.linalg.eigh(op.A[0])
    with pytest.raises(ValueError):
        CMBPreconditioner(op, mu[0], W[:, 0], mode="sometimes")
