import numpy as np
import pytest

from eqtransport.plans import (
    FULL,
    MARKOV,
    KernelPlan,
    check_bicausal,
    concatenate,
    history_marginals,
    plan_expected_cost,
    product_plan,
    sample_plan,
    solve_bicausal_linear,
    top_k_paths,
)
from eqtransport.process import FiniteProcess
from eqtransport.transport import Coupling

import suites


def test_linear_dpp_matches_vertex_oracle():
    worst, _, outputs = suites.run_criterion_1(n=10, seed=11)
    assert worst < 1e-9
    for plan, mu, nu, _ in outputs:
        assert check_bicausal(plan, mu, nu) == []


def test_linear_value_equals_plan_cost(rng):
    mu, nu = suites.rand_proc(rng, 3, 3), suites.rand_proc(rng, 2, 3)
    stages = [rng.normal(size=(3, 2)) for _ in range(3)]
    val, plan, values = solve_bicausal_linear(mu, nu, stages, 0.8, return_values=True)
    cost = plan_expected_cost(plan, lambda x, y: sum(0.8 ** (t + 1) * stages[t][x[t], y[t]] for t in range(3)))
    assert val == pytest.approx(cost, abs=1e-12)
    assert len(values) == 4 and np.allclose(values[3], 0)


def test_linear_zero_discount():
    mu = FiniteProcess([0.5, 0.5], [[1, 0], [0, 1]], 2)
    val, _ = solve_bicausal_linear(mu, mu, [np.ones((2, 2))] * 2, 0.0)
    assert val == 0.0


def test_pam_on_identical_marginals_is_diagonal(rng):
    mu = suites.rand_proc(rng, 3, 3)
    gap = np.abs(mu.state_values[:, None] - mu.state_values[None, :])
    val, plan = solve_bicausal_linear(mu, mu, [gap] * 3, 0.9)
    assert val == pytest.approx(0.0, abs=1e-14)
    pm = concatenate(plan, mu, mu)
    assert np.array_equal(pm.x, pm.y)


def test_linear_rejects_bad_input(rng):
    mu = suites.rand_proc(rng, 2, 2)
    with pytest.raises(ValueError):
        solve_bicausal_linear(mu, mu, [np.zeros((2, 2))], 1.0)
    with pytest.raises(ValueError):
        solve_bicausal_linear(mu, mu, [np.zeros((2, 2))] * 2, 1.5)


def test_product_plan_is_bicausal(rng):
    mu, nu = suites.rand_proc(rng, 3, 3), suites.rand_proc(rng, 2, 3)
    for mode in (MARKOV, FULL):
        plan = product_plan(mu, nu, mode)
        assert check_bicausal(plan, mu, nu) == []
        assert concatenate(plan, mu, nu).total_mass == pytest.approx(1.0, abs=1e-12)


def test_check_bicausal_flags_errors():
    mu = FiniteProcess([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], 2)
    plan = product_plan(mu, mu)
    other = Coupling(np.array([[0.5, 0.0], [0.0, 0.5]]), mu.kernel[0], mu.kernel[0])
    assert check_bicausal(plan.with_kernel(1, (0, 0), other), mu, mu) == []
    worse = Coupling(np.array([[0.6, 0.0], [0.0, 0.4]]), mu.kernel[0], mu.kernel[0])
    report = check_bicausal(plan.with_kernel(1, (0, 0), worse), mu, mu)
    assert report and report[0][:2] == (1, (0, 0))
    missing = KernelPlan(plan.initial, [{}], MARKOV)
    assert all(r[2] == np.inf for r in check_bicausal(missing, mu, mu))


def test_history_marginals_sum_to_one(rng):
    mu, nu = suites.rand_proc(rng, 2, 3), suites.rand_proc(rng, 3, 3)
    plan = product_plan(mu, nu, FULL)
    for t in (1, 2, 3):
        assert sum(history_marginals(plan, t).values()) == pytest.approx(1.0, abs=1e-12)


def test_top_k_matches_sorted_enumeration(rng):
    mu, nu = suites.rand_proc(rng, 3, 3), suites.rand_proc(rng, 3, 3)
    plan = product_plan(mu, nu)
    full = concatenate(plan, mu, nu)
    order = sorted(full.atoms(), key=lambda a: (-a[2], a[0] + a[1]))
    for K in (1, 7, 50):
        top = top_k_paths(plan, mu, nu, K, renormalize=False)
        want = {(a[0], a[1]): a[2] for a in order[:K]}
        got = top.as_dict()
        assert set(got) == set(want)
        assert all(got[k] == pytest.approx(want[k], abs=1e-15) for k in want)
    assert top_k_paths(plan, mu, nu, 10**6).total_mass == pytest.approx(1.0, abs=1e-12)
    assert len(top_k_paths(plan, mu, nu, 10**6)) == len(full)


def test_top_k_tie_order():
    # four equally likely paths: ties resolved by lexicographic x_path + y_path
    mu = FiniteProcess([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], 1)
    plan = product_plan(mu, mu)
    top = top_k_paths(plan, mu, mu, 2, renormalize=False)
    assert top.as_dict() == {((0,), (0,)): 0.25, ((0,), (1,)): 0.25}
    assert top_k_paths(plan, mu, mu, 2).total_mass == pytest.approx(1.0)
    with pytest.raises(ValueError):
        top_k_paths(plan, mu, mu, 0)


def test_concatenate_cap():
    mu = FiniteProcess([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], 3)
    with pytest.raises(ValueError):
        concatenate(product_plan(mu, mu), mu, mu, cap=10)


def test_sample_plan_frequencies():
    mu = FiniteProcess([0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]], 2)
    plan = product_plan(mu, mu)
    s = sample_plan(plan, mu, mu, 4000, seed=3)
    exact = concatenate(plan, mu, mu).as_dict()
    got = s.as_dict()
    assert s.total_mass == pytest.approx(1.0)
    assert max(abs(got.get(k, 0.0) - v) for k, v in exact.items()) < 0.03
    assert sample_plan(plan, mu, mu, 50, 9).as_dict() == sample_plan(plan, mu, mu, 50, 9).as_dict()
