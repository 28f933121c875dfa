import numpy as np
import pytest

from bddbscan.core import BlockPartition, ValidationError, apply_permutation, block_diagonal_score
from bddbscan.solver import (
    SolverConfig,
    SolverError,
    default_lambda,
    gradient,
    normalize_columns,
    objective,
    project_feasible,
    similarity_from_representation,
    solve,
    spectral_step,
)

from oracles import inner_loops, objective_loops


def random_feasible(rng, n):
    return project_feasible(rng.uniform(-0.5, 1.0, (n, n)))


def test_objective_examples():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 4))
    assert objective(X, np.zeros((4, 4)), 0.3) == pytest.approx(0.5 * np.sum(X**2), rel=1e-14)

    v = rng.standard_normal(2)
    Xd = np.column_stack([v, v])
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert objective(Xd, swap, 0.0) == 0.0

    Z = random_feasible(rng, 4)
    assert objective(X, Z, 0.1) == pytest.approx(objective_loops(X, Z, 0.1), rel=1e-10)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_objective_errors():
    with pytest.raises(ValidationError):
        objective(np.ones((2, 3)), np.zeros((2, 2)), 0.1)
    with pytest.raises(ValidationError):
        objective(np.ones((2, 3)), np.zeros((3, 3)), -1)
    with pytest.raises(ValidationError):
        objective(np.full((2, 2), 1e200), np.full((2, 2), 1e200), 0.0)


def test_gradient_at_zero():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((4, 5))
    assert np.allclose(gradient(X, np.zeros((5, 5)), 0.0), -X.T @ X)


def test_gradient_finite_differences():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((5, 7))
    Z = random_feasible(rng, 7)
    lam, h = 0.2, 1e-5
    G = gradient(X, Z, lam)
    for _ in range(20):
        i, j = rng.integers(0, 7, 2)
        E = np.zeros_like(Z)
        E[i, j] = h
        fd = (objective(X, Z + E, lam) - objective(X, Z - E, lam)) / (2 * h)
        assert abs(fd - G[i, j]) <= 1e-5 * max(1.0, abs(G[i, j]))


def test_gradient_vanishes_at_unconstrained_optimum():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((3, 4))
    lam = 0.5
    A = X.T @ X
    Z = np.linalg.solve(A + lam * np.eye(4), A)
    assert np.abs(gradient(X, Z, lam)).max() < 1e-8


def test_projection_examples():
    F = project_feasible(np.array([[0.0, 0.3], [0.2, 0.0]]))
    assert np.array_equal(F, [[0.0, 0.3], [0.2, 0.0]])
    assert np.all(project_feasible(-np.ones((3, 3))) == 0)
    A = np.full((3, 3), 0.5)
    np.fill_diagonal(A, 3)
    P = project_feasible(A)
    assert np.all(np.diag(P) == 0) and np.all(P[~np.eye(3, dtype=bool)] == 0.5)
    with pytest.raises(ValidationError):
        project_feasible(np.zeros((2, 3)))


def test_projection_idempotent_nonexpansive():
    rng = np.random.default_rng(4)
    for _ in range(50):
        A, B = rng.standard_normal((2, 6, 6))
        PA = project_feasible(A)
        assert np.array_equal(project_feasible(PA), PA)
        assert np.linalg.norm(PA - project_feasible(B)) <= np.linalg.norm(A - B) + 1e-15


def test_spectral_step_examples():
    rng = np.random.default_rng(5)
    dZ = rng.standard_normal((4, 4))
    assert spectral_step(dZ, 4.0 * dZ) == pytest.approx(0.25, rel=1e-14)
    orth = np.zeros((2, 2))
    orth[0, 0] = 1
    other = np.zeros((2, 2))
    other[1, 1] = 1
    assert spectral_step(orth, other, 1e-10, 1e10) == 1e10
    assert spectral_step(dZ, -dZ, 1e-10, 7.0) == 7.0
    assert spectral_step(dZ, 1e12 * dZ, 1e-10, 1e10) == 1e-10
    with pytest.raises(ValidationError):
        spectral_step(dZ, np.zeros((3, 3)))


def test_spectral_step_matches_loop_oracle():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((4, 6))
    Z0, Z1 = random_feasible(rng, 6), random_feasible(rng, 6)
    dZ = Z1 - Z0
    dG = gradient(X, Z1, 0.0) - gradient(X, Z0, 0.0)
    expected = inner_loops(dZ, dZ) / inner_loops(dZ, dG)
    assert spectral_step(dZ, dG) == pytest.approx(expected, rel=1e-12)


def test_solve_duplicate_columns():
    v = np.array([0.6, 0.8])
    st = solve(np.column_stack([v, v]), SolverConfig(lam=1e-3))
    assert st.converged
    assert st.Z[0, 1] > 0.9 and st.Z[1, 0] > 0.9
    # closed form for a duplicated unit vector: z = 1 / (1 + lam)
    assert st.Z[0, 1] == pytest.approx(1 / (1 + 1e-3), abs=1e-6)


def test_solve_orthogonal_groups_match_grid_search():
    # two orthogonal pairs in R^4, N=4; cross entries must vanish
    X = np.array([[1.0, 0.8, 0, 0], [0, 0.6, 0, 0], [0, 0, 1.0, 0.6], [0, 0, 0, 0.8]])
    lam = 0.01
    st = solve(X, SolverConfig(lam=lam, normalize_columns=False))
    cross = np.ones((4, 4), dtype=bool)
    cross[:2, :2] = cross[2:, 2:] = False
    assert np.abs(st.Z[cross]).max() < 1e-6
    # within-pair entries: coarse grid over z01, z10 for the first pair
    grid = np.linspace(0, 1.2, 241)
    best = min(
        (objective(X[:, :2], np.array([[0, a], [b, 0]]), lam), a, b) for a in grid for b in grid
    )
    assert st.Z[0, 1] == pytest.approx(best[1], abs=0.01)
    assert st.Z[1, 0] == pytest.approx(best[2], abs=0.01)


def test_solve_state_consistency_and_feasibility():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((6, 15))
    st = solve(X, SolverConfig())
    Xn = normalize_columns(X)
    assert np.all(st.Z >= 0) and np.all(np.diag(st.Z) == 0)
    assert st.objective_value == pytest.approx(objective(Xn, st.Z, st.lam), rel=1e-9, abs=1e-12)
    assert np.allclose(st.residual, Xn - Xn @ st.Z)
    assert st.lam == pytest.approx(default_lambda(Xn))
    assert st.stationarity <= 1e-4


def test_nonmonotone_acceptance_holds():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((10, 30))
    cfg = SolverConfig(lam=0.05)
    st = solve(X, cfg)
    m = cfg.linesearch_memory
    for t in range(1, len(st.history)):
        window = st.history[max(0, t - m):t]
        assert st.history[t] <= max(window) + 1e-12 * abs(max(window))
        assert st.history[t] <= st.acceptance_bounds[t - 1] + 1e-12 * abs(max(window))


def test_two_starts_converge_together():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((8, 20))
    cfg = SolverConfig(lam=0.1, epsilon_tol=1e-9)
    a = solve(X, cfg)
    b = solve(X, cfg, Z0=rng.uniform(0, 1, (20, 20)))
    assert np.linalg.norm(a.Z - b.Z) < 1e-4


def test_max_iters_reports_nonconvergence(caplog):
    rng = np.random.default_rng(10)
    st = solve(rng.standard_normal((5, 20)), SolverConfig(lam=1e-4, max_iters=2))
    assert not st.converged and st.iter == 2
    assert "without converging" in caplog.text


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_raises_with_iteration():
    X = np.full((2, 3), 1e200)
    with pytest.raises(SolverError) as err:
        solve(X, SolverConfig(normalize_columns=False, lam=0.0))
    assert err.value.iteration == 0


def test_config_validation():
    for bad in [dict(lam=-1), dict(epsilon_tol=0), dict(max_iters=0), dict(step_min=0), dict(linesearch_shrink=1.0)]:
        with pytest.raises(ValidationError):
            SolverConfig(**bad)


def test_similarity_examples():
    assert np.all(similarity_from_representation(np.zeros((3, 3))) == 0)
    Z = np.zeros((3, 3))
    Z[0, 1], Z[1, 0] = 0.8, 0.4
    W = similarity_from_representation(Z)
    assert W[0, 1] == W[1, 0] == pytest.approx(0.6)
    with pytest.raises(ValidationError):
        similarity_from_representation(np.array([[0, np.nan], [0, 0]]))


def test_block_structured_z_gives_block_graph():
    rng = np.random.default_rng(11)
    groups = np.array([1, 0, 1, 0, 0, 1])
    Z = rng.uniform(0.1, 1, (6, 6)) * (groups[:, None] == groups[None, :])
    W = similarity_from_representation(Z)
    order = np.argsort(groups, kind="stable")
    assert block_diagonal_score(apply_permutation(W, order), BlockPartition((3,), 6)) == 1.0
