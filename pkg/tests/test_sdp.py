import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locbeam import sdp
from locbeam.sdp import (
    EQ,
    GE,
    LE,
    SDPError,
    SDPProblem,
    embed_hermitian,
    extract_hermitian,
    kkt_residuals,
    solve_sdp,
)


def lam_max_problem(C):
    n = C.shape[0]
    p = SDPProblem([n], {0: C})
    p.add_constraint({0: np.eye(n)}, EQ, 1.0)
    return p


def maxcut_problem(W):
    n = W.shape[0]
    Lap = np.diag(W.sum(1)) - W
    p = SDPProblem([n], {0: Lap / 4})
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        p.add_constraint({0: E}, EQ, 1.0)
    return p


def test_lam_max_two_by_two():
    sol = solve_sdp(lam_max_problem(np.diag([3.0, 1.0])))
    assert sol.status == sdp.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-8)
    np.testing.assert_allclose(sol.blocks[0], np.diag([1.0, 0.0]), atol=1e-7)
    assert kkt_residuals(lam_max_problem(np.diag([3.0, 1.0])), sol).max() <= 1e-8


@pytest.mark.parametrize("n", [2, 5, 9])
def test_lam_max_random(rng, n):
    A = rng.standard_normal((n, n))
    C = A + A.T
    sol = solve_sdp(lam_max_problem(C))
    w, V = np.linalg.eigh(C)
    assert sol.status == sdp.OPTIMAL
    assert sol.objective == pytest.approx(w[-1], abs=1e-8 * (1 + abs(w[-1])))
    v = V[:, -1]
    assert np.linalg.norm(sol.blocks[0] - np.outer(v, v)) < 1e-4


def test_perturbed_primal_reports_residual():
    p = lam_max_problem(np.diag([3.0, 1.0]))
    sol = solve_sdp(p)
    X = sol.blocks[0] + 0.1 * np.eye(2)
    X /= np.trace(X)
    sol.blocks = [X]
    r = kkt_residuals(p, sol)
    assert r.max() > 0
    assert r.gap > 1e-3


def test_max_iters_status():
    A = np.random.default_rng(0).standard_normal((6, 6))
    sol = solve_sdp(maxcut_problem(np.abs(A + A.T)), max_iters=2)
    assert sol.status == sdp.MAX_ITERS
    assert np.isfinite(sol.residuals.max())


def test_inequalities_and_multiple_blocks():
    # max x11 + 2 y11 s.t. tr X <= 1, tr Y >= 0.5, tr X + tr Y = 2
    p = SDPProblem([2, 2], {0: np.diag([1.0, 0.0]), 1: np.diag([2.0, 0.0])})
    p.add_constraint({0: np.eye(2)}, LE, 1.0)
    p.add_constraint({1: np.eye(2)}, GE, 0.5)
    p.add_constraint({0: np.eye(2), 1: np.eye(2)}, EQ, 2.0)
    sol = solve_sdp(p)
    assert sol.status == sdp.OPTIMAL
    assert sol.objective == pytest.approx(4.0, abs=1e-7)
    assert kkt_residuals(p, sol).max() <= 1e-8


def test_infeasible_and_unbounded():
    p = SDPProblem([2], {0: np.eye(2)})
    p.add_constraint({0: np.eye(2)}, EQ, -1.0)
    assert solve_sdp(p).status == sdp.INFEASIBLE
    q = SDPProblem([2], {0: np.eye(2)})
    q.add_constraint({0: np.diag([1.0, 0.0])}, EQ, 1.0)
    assert solve_sdp(q).status == sdp.UNBOUNDED


def test_validation_errors():
    with pytest.raises(SDPError):
        solve_sdp(SDPProblem([2], {0: np.eye(2)}))
    p = SDPProblem([2], {0: np.array([[0.0, 1.0], [0.0, 0.0]])})
    p.add_constraint({0: np.eye(2)}, EQ, 1.0)
    with pytest.raises(SDPError, match="symmetric"):
        solve_sdp(p)
    q = SDPProblem([2], {0: np.eye(3)})
    q.add_constraint({0: np.eye(2)}, EQ, 1.0)
    with pytest.raises(SDPError, match="shape"):
        solve_sdp(q)
    r = SDPProblem([2], {0: np.eye(2)})
    r.add_constraint({0: np.eye(2)}, "!=", 1.0)
    with pytest.raises(SDPError):
        solve_sdp(r)


def test_embedding_examples():
    np.testing.assert_array_equal(embed_hermitian(np.eye(2)), np.eye(4))
    E = embed_hermitian(np.array([[0, 1j], [-1j, 0]]))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(E)), [-1, -1, 1, 1], atol=1e-12)
    with pytest.raises(ValueError):
        embed_hermitian(np.array([[0, 1j], [1j, 0]]))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 10_000))
def test_embedding_preserves_psd_and_round_trips(n, seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    P = A @ A.conj().T
    E = embed_hermitian(P)
    assert np.linalg.eigvalsh(E).min() >= -1e-9 * (1 + np.abs(P).max())
    np.testing.assert_allclose(extract_hermitian(E), P, atol=1e-12)


def test_weak_duality_and_residuals_random(rng):
    for _ in range(8):
        n = int(rng.integers(3, 12))
        A = np.abs(rng.standard_normal((n, n)))
        W = np.triu(A, 1) + np.triu(A, 1).T
        p = maxcut_problem(W)
        sol = solve_sdp(p)
        assert sol.status == sdp.OPTIMAL
        assert kkt_residuals(p, sol).max() <= 1e-8
        C = p.objective[0]
        for _ in range(50):
            # random feasible correlation matrix
            B = rng.standard_normal((n, n))
            X = B @ B.T
            d = np.sqrt(np.diag(X))
            X = X / np.outer(d, d)
            assert np.sum(C * X) <= sol.dual_objective + 1e-9 * (1 + abs(sol.dual_objective))


def test_dump_load_round_trip(tmp_path, rng):
    A = rng.standard_normal((3, 3))
    p = SDPProblem([3, 2], {0: A + A.T, 1: np.eye(2)})
    p.add_constraint({0: np.eye(3)}, LE, 1.0)
    p.add_constraint({1: np.eye(2)}, EQ, 1.0)
    path = tmp_path / "p.sdp"
    sdp.dump_problem(p, path)
    q = sdp.load_problem(path)
    assert q.block_sizes == p.block_sizes
    assert [c.sense for c in q.constraints] == [LE, EQ]
    np.testing.assert_allclose(q.objective[0], p.objective[0])
    assert solve_sdp(q).objective == pytest.approx(solve_sdp(p).objective, abs=1e-8)
