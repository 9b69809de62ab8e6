import numpy as np
import pytest
from scipy.optimize import linprog

from eqtransport.divergences import DivergenceKind
from eqtransport.transport import (
    FDivTerm,
    PathMeasure,
    entropic_ot,
    independent_coupling,
    path_wasserstein,
    solve_composite_ot,
    solve_linear_ot,
)

from oracles import lp_min_by_vertices, min_2x2


def test_linear_ot_matches_vertex_enumeration(rng):
    for _ in range(30):
        m, n = rng.integers(2, 4, size=2)
        a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
        C = rng.normal(size=(m, n))
        val, cpl = solve_linear_ot(a, b, C)
        assert val == pytest.approx(lp_min_by_vertices(a, b, C)[0], abs=1e-12)
        assert cpl.violation() < 1e-12


def test_linear_ot_all_negative_costs():
    a, b = np.array([0.84128017, 0.15871983]), np.array([0.27229732, 0.72770268])
    C = np.array([[-1.39107332, -2.91452306], [-4.32089354, -1.97539966]])
    val, cpl = solve_linear_ot(a, b, C)
    assert val == pytest.approx(lp_min_by_vertices(a, b, C)[0], abs=1e-12)


def test_linear_ot_duals(rng):
    a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
    C = rng.normal(size=(3, 4))
    val, _, log = solve_linear_ot(a, b, C, log=True)
    assert a @ log["u"] + b @ log["v"] == pytest.approx(val, abs=1e-10)
    assert np.all(log["u"][:, None] + log["v"][None, :] <= C + 1e-10)


def test_linear_ot_zero_marginal_entries():
    a, b = np.array([0.0, 1.0]), np.array([0.5, 0.5])
    val, cpl = solve_linear_ot(a, b, np.array([[0.0, 0.0], [1.0, 2.0]]))
    assert val == pytest.approx(1.5)
    assert np.allclose(cpl.matrix[0], 0)


def test_linear_ot_errors():
    with pytest.raises(ValueError):
        solve_linear_ot([0.5, 0.5], [0.6, 0.6], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        solve_linear_ot([0.5, 0.5], [0.5, 0.5], np.zeros((3, 2)))
    with pytest.raises(ValueError):
        solve_linear_ot([0.5, 0.5], [0.5, 0.5], np.array([[0, np.nan], [0, 0]]))


def test_composite_quadratic_matches_grid(rng):
    for _ in range(10):
        a, b = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2))
        L, g = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        G = lambda s: 2.0 * (s - 0.3) ** 2  # noqa: E731
        val, cpl = solve_composite_ot(a, b, L, scalar_g=g, G=G)
        ref, _ = min_2x2(a, b, lambda P: np.sum(L * P) + G(np.sum(g * P)))
        assert val == pytest.approx(ref, abs=1e-7)
        assert cpl.violation() < 1e-9


def test_composite_numeric_derivative(rng):
    a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    L, g = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    v1, _ = solve_composite_ot(a, b, L, scalar_g=g, G=np.exp, dG=np.exp)
    v2, _ = solve_composite_ot(a, b, L, scalar_g=g, G=np.exp)
    assert v1 == pytest.approx(v2, abs=1e-7)


def test_composite_kl_matches_sinkhorn(rng):
    for _ in range(5):
        a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
        C = rng.normal(size=(3, 4))
        term = FDivTerm.one_step(DivergenceKind.KL, independent_coupling(a, b))
        val, cpl = solve_composite_ot(a, b, C, fdiv=term, tol=1e-10)
        ref, P = entropic_ot(a, b, C)
        assert val == pytest.approx(ref, abs=1e-8)
        assert np.abs(cpl.matrix - P).max() < 1e-4


def test_entropic_ot_closed_form():
    # zero cost: the independent coupling is optimal with value 0
    a, b = np.array([0.2, 0.8]), np.array([0.5, 0.5])
    val, P = entropic_ot(a, b, np.zeros((2, 2)))
    assert val == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(P, np.outer(a, b))


def test_fdiv_term_gradient_and_hessian(rng):
    a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    rho = independent_coupling(a, b)
    P = rng.dirichlet(np.ones(9)).reshape(3, 3)
    for kind in DivergenceKind:
        term = FDivTerm.one_step(kind, rho)
        g = term.gradient(P)
        h = term.hessian_diag(P)
        eps = 1e-6
        for e in range(9):
            E = np.zeros(9)
            E[e] = eps
            E = E.reshape(3, 3)
            fd = (term.value(P + E) - term.value(P - E)) / (2 * eps)
            fd2 = (term.value(P + E) - 2 * term.value(P) + term.value(P - E)) / eps**2
            assert g.ravel()[e] == pytest.approx(fd, rel=1e-5, abs=1e-6)
            assert h.ravel()[e] == pytest.approx(fd2, rel=1e-3, abs=1e-3)


def test_path_measure_merges_and_sorts():
    pm = PathMeasure([[1, 0], [0, 0], [1, 0]], [[0, 0], [1, 1], [0, 0]], [0.25, 0.5, 0.25], [0, 1], [0, 1])
    assert len(pm) == 2
    assert pm.as_dict() == {((0, 0), (1, 1)): 0.5, ((1, 0), (0, 0)): 0.5}
    assert pm.is_normalized


def test_path_wasserstein_matches_linprog(rng):
    P = PathMeasure(rng.integers(0, 3, (5, 3)), rng.integers(0, 3, (5, 3)), rng.dirichlet(np.ones(5)),
                    [0, 0.5, 1], [0, 0.5, 1])
    Q = PathMeasure(rng.integers(0, 3, (4, 3)), rng.integers(0, 3, (4, 3)), rng.dirichlet(np.ones(4)),
                    [0, 0.5, 1], [0, 0.5, 1])
    C = np.array([[np.abs(P.x_values[P.x[i]] - Q.x_values[Q.x[j]]).sum()
                   + np.abs(P.y_values[P.y[i]] - Q.y_values[Q.y[j]]).sum()
                   for j in range(len(Q))] for i in range(len(P))])
    m, n = C.shape
    A = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([P.weights, Q.weights]), bounds=(0, None))
    assert path_wasserstein(P, Q) == pytest.approx(res.fun, abs=1e-9)
    assert path_wasserstein(P, P) == pytest.approx(0.0, abs=1e-12)


def test_path_wasserstein_requires_normalized():
    P = PathMeasure([[0]], [[0]], [0.5], [0, 1], [0, 1])
    with pytest.raises(ValueError):
        path_wasserstein(P, P)


def test_composite_degenerate_edge_converges():
    # away-step Frank-Wolfe alone zigzags here for more than 10000 iterations
    rng = np.random.default_rng(9404522)
    m, n = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    a, b = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
    C = rng.normal(size=(m, n)) * 10 ** rng.uniform(-2, 2)
    g = rng.normal(size=(m, n))
    k, s0 = rng.uniform(0.1, 5), rng.normal()
    value, cpl, info = solve_composite_ot(a, b, C, g, G=lambda s: k * (s - s0) ** 2,
                                          dG=lambda s: 2 * k * (s - s0), log=True)
    assert info["gap"] <= 1e-8
    assert cpl.is_feasible()
    # brute force along the parametric edge
    best = np.inf
    for lam in np.linspace(-0.1, 0.1, 401):
        x = solve_linear_ot(a, b, C + lam * g)[1].matrix
        best = min(best, float(np.sum(C * x) + k * (np.sum(g * x) - s0) ** 2))
    assert value <= best + 1e-12
