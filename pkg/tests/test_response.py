import numpy as np
import pytest

from beliefgames.families import (
    ExponentialFamily,
    ParetoFamily,
    TabulatedFamily,
    UniformFamily,
)
from beliefgames.games import matching_game, uniform_profile
from beliefgames.oracles import finite_difference_gradient, project_simplex
from beliefgames.response import (
    optimistic_value,
    quantal_response,
    response_probabilities,
    response_solver,
    smooth_payoff,
    smooth_payoff_gradient,
    sparsemax,
    weighted_softmax,
)


def test_weighted_softmax_frozen_value():
    p = weighted_softmax(np.array([1.0, 0.0]), np.ones(2), gamma=1.0)
    assert p[0] == pytest.approx(0.7310585786300049, abs=1e-15)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)


def test_weighted_softmax_handles_extreme_inputs():
    p = weighted_softmax(np.array([1000.0, 0.0]), np.ones(2), gamma=1.0)
    assert p[0] == 1.0 and p[1] == 0.0  # underflow becomes an exact zero
    with pytest.raises(ValueError, match="gamma"):
        weighted_softmax(np.ones(2), np.ones(2), gamma=0.0)


def test_weighted_softmax_prior_weights_tilt_the_outcome():
    p = weighted_softmax(np.zeros(2), np.array([3.0, 1.0]), gamma=1.0)
    np.testing.assert_allclose(p, [0.75, 0.25], atol=1e-15)


def test_sparsemax_frozen_values():
    np.testing.assert_array_equal(sparsemax(np.array([4.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(sparsemax(np.zeros(2)), [0.5, 0.5], atol=1e-15)
    # one dominated action dropped, the rest shared
    p = sparsemax(np.array([3.0, 3.0, -9.0]))
    np.testing.assert_allclose(p, [0.5, 0.5, 0.0], atol=1e-15)


def test_sparsemax_is_simplex_projection_of_scaled_input():
    rng = np.random.default_rng(3)
    for _ in range(300):
        n = int(rng.integers(2, 8))
        u = rng.normal(0.0, 3.0, size=n)
        gap = np.abs(sparsemax(u) - project_simplex(u / (2.0 * n))).max()
        assert gap < 1e-12


def test_sparsemax_permutation_equivariance():
    rng = np.random.default_rng(4)
    u = rng.normal(0.0, 2.0, size=6)
    perm = rng.permutation(6)
    np.testing.assert_array_equal(sparsemax(u)[perm], sparsemax(u[perm]))


def test_sparsemax_validation():
    with pytest.raises(ValueError, match="1-D"):
        sparsemax(np.zeros((2, 2)))
    with pytest.raises(ValueError, match="finite"):
        sparsemax(np.array([1.0, np.nan]))


def test_optimistic_value_frozen_constants():
    # constant payoffs: exponential adds gamma log N, uniform adds nothing
    u = np.full(4, 0.3)
    exp_val = optimistic_value(ExponentialFamily(gamma=0.7, n_actions=4), u)
    assert exp_val == pytest.approx(0.3 + 0.7 * np.log(4.0), abs=1e-12)
    uni_val = optimistic_value(UniformFamily(gamma=0.7, n_actions=4), u)
    assert uni_val == pytest.approx(0.3, abs=1e-12)


@pytest.mark.parametrize("n", [2, 5, 20])
def test_bisection_matches_softmax(n):
    rng = np.random.default_rng(40 + n)
    fam = ExponentialFamily(gamma=0.4, n_actions=n)
    for _ in range(20):
        u = rng.uniform(0.0, 1.0, size=n)
        direct = weighted_softmax(u, fam.eta, fam.gamma)
        solved = response_probabilities(fam, u, method="bisection")
        assert np.abs(direct - solved).max() < 1e-10


@pytest.mark.parametrize("n", [2, 5, 20])
def test_bisection_matches_sparsemax(n):
    rng = np.random.default_rng(60 + n)
    fam = UniformFamily(gamma=0.4, n_actions=n)
    for _ in range(20):
        u = rng.uniform(0.0, 1.0, size=n)
        direct = sparsemax(u / fam.gamma)
        solved = response_probabilities(fam, u, method="bisection")
        assert np.abs(direct - solved).max() < 1e-10


def test_kkt_multiplier_agrees_across_routes():
    rng = np.random.default_rng(8)
    u = rng.uniform(0.0, 1.0, size=5)

    exp = ExponentialFamily(gamma=0.6, n_actions=5)
    closed = quantal_response(exp, u)
    solved = quantal_response(exp, u, method="bisection")
    assert closed.solver_tag == "softmax" and solved.solver_tag == "bisection"
    assert closed.kkt_multiplier == pytest.approx(solved.kkt_multiplier, abs=1e-8)
    assert closed.optimistic_value == pytest.approx(solved.optimistic_value, abs=1e-10)

    uni = UniformFamily(gamma=0.6, n_actions=5)
    closed = quantal_response(uni, u)
    solved = quantal_response(uni, u, method="bisection")
    assert closed.solver_tag == "sparsemax"
    assert closed.kkt_multiplier == pytest.approx(solved.kkt_multiplier, abs=1e-8)


def test_kkt_multiplier_satisfies_stationarity():
    # on the support, u_i + quantile(1 - p_i) must equal the multiplier
    rng = np.random.default_rng(9)
    u = rng.uniform(0.0, 1.0, size=4)
    for fam in (ExponentialFamily(gamma=0.5, n_actions=4),
                ParetoFamily(gamma=0.5, q=1.8, eta=np.full(4, 0.25))):
        res = quantal_response(fam, u)
        station = u + fam.tail_quantile_vector(res.probabilities)
        np.testing.assert_allclose(station, res.kkt_multiplier, atol=1e-7)


def test_pareto_response_reduces_to_uniform_at_q_two():
    n = 4
    par = ParetoFamily(gamma=0.7, q=2.0, eta=np.full(n, 1.0 / n))
    uni = UniformFamily(gamma=0.7, n_actions=n)
    rng = np.random.default_rng(10)
    for _ in range(10):
        u = rng.uniform(0.0, 1.0, size=n)
        got = response_probabilities(par, u)
        want = response_probabilities(uni, u)
        assert np.abs(got - want).max() < 1e-9


def test_response_is_the_simplex_maximizer():
    rng = np.random.default_rng(11)
    for fam in (ExponentialFamily(gamma=0.3, n_actions=3),
                UniformFamily(gamma=0.3, n_actions=3),
                ParetoFamily(gamma=0.3, q=2.5, eta=np.full(3, 1 / 3))):
        u = rng.uniform(0.0, 1.0, size=3)
        res = quantal_response(fam, u)
        for _ in range(200):
            other = rng.dirichlet(np.ones(3))
            value = float(np.dot(other, u)) + fam.regularizer(other)
            assert value <= res.optimistic_value + 1e-9


def test_response_solver_closures_match_dispatch():
    rng = np.random.default_rng(12)
    u = rng.uniform(0.0, 1.0, size=4)
    for fam in (ExponentialFamily(gamma=0.5, n_actions=4),
                UniformFamily(gamma=0.5, n_actions=4),
                ParetoFamily(gamma=0.5, q=1.5, eta=np.full(4, 0.25))):
        np.testing.assert_array_equal(
            response_solver(fam)(u), response_probabilities(fam, u)
        )


def test_bisection_refuses_nonunique_responses():
    flat = TabulatedFamily(
        [np.array([[0.0, -1.0], [0.4, 0.0], [0.6, 0.0], [1.0, 1.0]])] * 2
    )
    with pytest.raises(ValueError, match="TabulatedFamily"):
        response_probabilities(flat, np.array([0.2, 0.1]))


def test_payoff_vector_input_validation():
    fam = ExponentialFamily(gamma=1.0, n_actions=3)
    with pytest.raises(ValueError, match="length 3"):
        quantal_response(fam, np.ones(2))
    with pytest.raises(ValueError, match="finite"):
        quantal_response(fam, np.array([1.0, np.inf, 0.0]))
    with pytest.raises(ValueError, match="method"):
        quantal_response(fam, np.ones(3), method="newton")


def test_smooth_payoff_adds_regularizer_to_expectation():
    game = matching_game(2)
    prof = uniform_profile(2, 2)
    fam = ExponentialFamily(gamma=1.0, n_actions=2)
    # 0.5 expected payoff plus entropy log 2
    assert smooth_payoff(game, 0, prof, fam) == pytest.approx(0.5 + np.log(2.0), abs=1e-12)


def test_smooth_payoff_gradient_matches_finite_differences():
    rng = np.random.default_rng(13)
    game = matching_game(3)
    fam = ExponentialFamily(gamma=0.8, n_actions=3)
    rows = rng.dirichlet(np.ones(3), size=2) * 0.9 + 0.1 / 3
    from beliefgames.games import StrategyProfile, payoff_vector

    prof = StrategyProfile(rows)
    grad = smooth_payoff_gradient(game, 0, prof, fam)
    u = payoff_vector(game, 0, prof)

    def f(p):
        return float(np.dot(p, u)) + fam.regularizer_terms(p)

    fd = finite_difference_gradient(f, rows[0], h=1e-6)
    np.testing.assert_allclose(grad, fd, atol=1e-6)


def test_smooth_payoff_gradient_raises_on_boundary():
    game = matching_game(2)
    fam = ExponentialFamily(gamma=1.0, n_actions=2)
    from beliefgames.games import StrategyProfile

    prof = StrategyProfile([[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ValueError, match="clamp"):
        smooth_payoff_gradient(game, 0, prof, fam)
