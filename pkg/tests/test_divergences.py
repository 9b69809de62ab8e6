import math

import numpy as np
import pytest

from eqtransport.divergences import (
    DivergenceKind,
    chain_rule_gap,
    divergence_from_weights,
    f_at_zero,
    f_divergence,
    f_eval,
    f_prime,
    f_second,
)
from eqtransport.plans import concatenate, product_plan
from eqtransport.transport import solve_linear_ot

import suites

KINDS = list(DivergenceKind)


@pytest.mark.parametrize("kind", KINDS)
def test_generator_vanishes_at_one_and_is_convex(kind):
    assert f_eval(kind, 1.0) == pytest.approx(0.0, abs=1e-15)
    xs = np.linspace(0.05, 5, 200)
    assert np.all(f_second(kind, xs) > 0)
    assert f_eval(kind, 0.0) == pytest.approx(f_at_zero(kind))


@pytest.mark.parametrize("kind", KINDS)
def test_derivatives_match_finite_differences(kind):
    for x in (0.2, 0.9, 2.5):
        h = 1e-5
        assert f_prime(kind, x) == pytest.approx((f_eval(kind, x + h) - f_eval(kind, x - h)) / (2 * h), rel=1e-6)
        assert f_second(kind, x) == pytest.approx(
            (f_prime(kind, x + h) - f_prime(kind, x - h)) / (2 * h), rel=1e-5)


def test_known_values():
    p, q = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    assert divergence_from_weights("kl", p, q) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3))
    hel = (math.sqrt(0.5) - math.sqrt(0.25)) ** 2 + (math.sqrt(0.5) - math.sqrt(0.75)) ** 2
    assert divergence_from_weights("hellinger", p, q) == pytest.approx(hel)
    m = (p + q) / 2
    js = np.sum(p * np.log(p / m)) + np.sum(q * np.log(q / m))
    assert divergence_from_weights("js", p, q) == pytest.approx(js)
    lc = np.sum((p - q) ** 2 / (2 * (p + q)))
    assert divergence_from_weights("lecam", p, q) == pytest.approx(lc)


def test_support_conventions():
    assert divergence_from_weights("kl", [1.0, 0.0], [0.5, 0.0]) == pytest.approx(0.5 * 2 * math.log(2))
    assert divergence_from_weights("kl", [0.5, 0.5], [1.0, 0.0]) == math.inf
    assert divergence_from_weights("hellinger", [0.5, 0.5], [1.0, 0.0]) == pytest.approx(
        (1 - math.sqrt(0.5)) ** 2 + 0.5)
    # reference mass absent from the listing contributes f(0)
    assert divergence_from_weights("hellinger", [1.0], [0.5], 0.5) == pytest.approx(
        0.5 * (1 - math.sqrt(2)) ** 2 + 0.5)
    with pytest.raises(ValueError):
        divergence_from_weights("kl", [-0.1, 1.1], [0.5, 0.5])


def test_independent_coupling_has_zero_divergence(rng):
    a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(2))
    for kind in KINDS:
        assert f_divergence(kind, np.outer(a, b), a, b) == pytest.approx(0.0, abs=1e-14)


def test_path_measure_divergence_matches_matrix(rng):
    mu, nu = suites.rand_proc(rng, 2, 1), suites.rand_proc(rng, 3, 1)
    _, cpl = solve_linear_ot(mu.initial, nu.initial, rng.normal(size=(2, 3)))
    pm = concatenate(product_plan(mu, nu).with_kernel(0, None, cpl), mu, nu)
    for kind in KINDS:
        assert f_divergence(kind, pm, mu, nu) == pytest.approx(
            f_divergence(kind, cpl.matrix, mu.initial, nu.initial), abs=1e-14)


def test_kl_chain_rule_holds(rng):
    for _ in range(5):
        mu, nu = suites.rand_proc(rng, 2, 3), suites.rand_proc(rng, 3, 3)
        assert chain_rule_gap("kl", suites.random_plan(rng, mu, nu), mu, nu) <= 1e-10


def test_hellinger_chain_rule_fails(rng):
    mu, nu = suites.rand_proc(rng, 2, 2), suites.rand_proc(rng, 2, 2)
    gaps = [chain_rule_gap("hellinger", suites.random_plan(rng, mu, nu), mu, nu) for _ in range(5)]
    assert max(gaps) > 1e-4
