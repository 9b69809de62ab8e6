import numpy as np
import pytest

from eqtransport.process import (
    FiniteProcess,
    all_paths,
    estimate_process,
    normalized_ranks,
    path_probability,
)


def test_normalized_ranks():
    assert np.allclose(normalized_ranks(4), [0, 0.25, 0.5, 0.75])


def test_rejects_bad_kernel():
    with pytest.raises(ValueError):
        FiniteProcess([0.5, 0.5], [[0.5, 0.6], [0.5, 0.5]], 2)
    with pytest.raises(ValueError):
        FiniteProcess([0.5, 0.5], [[1, 0], [0, 1]], 0)
    with pytest.raises(ValueError):
        FiniteProcess([1.0], [[1.0]], 2, state_values=[0.0, 1.0])


def test_marginal_propagates(rng):
    K = rng.dirichlet(np.ones(3), size=3)
    p = FiniteProcess([1, 0, 0], K, 4)
    assert np.allclose(p.marginal(1), [1, 0, 0])
    assert np.allclose(p.marginal(3), np.array([1, 0, 0]) @ K @ K)


def test_path_probabilities_sum_to_one(rng):
    p = FiniteProcess(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3), size=3), 3)
    total = sum(path_probability(p, path) for path in all_paths(3, 3))
    assert total == pytest.approx(1.0, abs=1e-12)
    assert sum(w for _, w in p.support_paths()) == pytest.approx(1.0, abs=1e-12)


def test_estimate_counts_transitions():
    paths = [[0, 0, 1], [1, 1, 0], [0, 1, 1]]
    p = estimate_process(paths, 3, horizon=3)
    assert np.allclose(p.initial, [2 / 3, 1 / 3, 0])
    assert np.allclose(p.kernel[0], [1 / 3, 2 / 3, 0])
    assert np.allclose(p.kernel[1], [1 / 3, 2 / 3, 0])
    # state 2 never left: filled with a self-loop
    assert p.filled_rows == (2,)
    assert np.allclose(p.kernel[2], [0, 0, 1])


def test_estimate_recovers_kernel(rng):
    K = np.array([[0.7, 0.3], [0.2, 0.8]])
    true = FiniteProcess([0.5, 0.5], K, 50)
    sims = true.simulate(400, rng)
    est = estimate_process(sims, 2)
    assert np.abs(est.kernel - K).max() < 0.02


def test_estimate_rejects_out_of_range():
    with pytest.raises(ValueError):
        estimate_process([[0, 3]], 3)
    with pytest.raises(ValueError):
        estimate_process([], 3)


def test_simulate_is_seeded():
    p = FiniteProcess([0.3, 0.7], [[0.5, 0.5], [0.1, 0.9]], 5)
    a = p.simulate(20, np.random.default_rng(7))
    b = p.simulate(20, np.random.default_rng(7))
    assert a.shape == (20, 5) and np.array_equal(a, b)
