import numpy as np
import pytest

from beliefgames.analysis import (
    assemble_hessian,
    coupling_bound,
    diagonal_dominance_check,
    equilibrium_residual,
    fixed_point_iterate,
    game_hessian,
    hessian_blocks,
    negdef_on_tangent_check,
    operator_norm,
    residual_series,
    stability_check,
    strong_concavity_check,
    variational_stability_probe,
)
from beliefgames.dynamics import RunConfig, StepSchedule, run_dynamics
from beliefgames.families import ExponentialFamily, ParetoFamily, UniformFamily
from beliefgames.games import (
    StrategyProfile,
    matching_game,
    random_game,
    uniform_profile,
)


def _exp(gamma, n=2, players=2):
    return tuple(ExponentialFamily(gamma=gamma, n_actions=n) for _ in range(players))


# ---------------------------------------------------------------------------
# residuals and fixed points


def test_residual_frozen_value_at_a_vertex():
    game = matching_game(2)
    vertex = StrategyProfile([[1.0, 0.0], [1.0, 0.0]])
    res = equilibrium_residual(game, vertex, _exp(1.0))
    # the response to payoffs (1, 0) is softmax, so the gap is 1 - 0.731...
    assert res == pytest.approx(0.2689414213699951, abs=1e-15)


def test_residual_zero_exactly_at_the_response_fixed_point():
    game = matching_game(2)
    fams = _exp(3.0)
    result = fixed_point_iterate(game, fams)
    assert result.converged
    assert result.residual <= 1e-10
    assert equilibrium_residual(game, result.profile, fams) == result.residual


def test_residual_checks_family_count():
    with pytest.raises(ValueError, match="one family per player"):
        equilibrium_residual(matching_game(2), uniform_profile(2, 2), _exp(1.0, players=3))
    with pytest.raises(ValueError, match="action count"):
        equilibrium_residual(matching_game(2), uniform_profile(2, 2), _exp(1.0, n=3))


def test_fixed_point_on_random_games():
    rng = np.random.default_rng(31)
    for _ in range(5):
        game = random_game(2, 3, rng)
        result = fixed_point_iterate(game, _exp(2.0, n=3))
        assert result.converged
        assert result.residual < 1e-9


def test_fixed_point_reports_nonconvergence():
    game = matching_game(2)
    start = StrategyProfile([[0.9, 0.1], [0.9, 0.1]])
    result = fixed_point_iterate(game, _exp(0.2), start=start, max_iter=2)
    assert not result.converged
    assert result.iterations == 2
    with pytest.raises(ValueError, match="damping"):
        fixed_point_iterate(game, _exp(1.0), damping=0.0)


def test_fixed_point_accepts_a_start_profile():
    game = matching_game(2)
    fams = _exp(3.0)
    start = StrategyProfile([[0.9, 0.1], [0.9, 0.1]])
    result = fixed_point_iterate(game, fams, start=start)
    assert result.converged
    # symmetric game, strong regularization: same equilibrium from anywhere
    base = fixed_point_iterate(game, fams)
    np.testing.assert_allclose(result.profile.probs, base.profile.probs, atol=1e-8)


def test_residual_series_tracks_a_run():
    game = matching_game(3)
    fams = _exp(6.0, n=3)
    cfg = RunConfig(horizon=500, schedule=StepSchedule.power(1.0, 0.6),
                    risk_families=fams, belief_families=fams, record_every=100)
    trace = run_dynamics(game, cfg)
    series = residual_series(game, trace, fams)
    assert series.shape == (trace.rounds.size,)
    assert series[-1] == trace.final_residual
    assert series[-1] <= series[0]


# ---------------------------------------------------------------------------
# Hessian pieces


def test_hessian_blocks_frozen_values():
    game = matching_game(2)
    prof = StrategyProfile([[0.25, 0.75], [0.5, 0.5]])
    blocks = hessian_blocks(game, prof, _exp(3.0))
    # diagonal: -gamma / p per action
    np.testing.assert_allclose(np.diagonal(blocks[0, 0]), [-12.0, -4.0], atol=1e-12)
    np.testing.assert_allclose(np.diagonal(blocks[1, 1]), [-6.0, -6.0], atol=1e-12)
    # symmetrized identity cross-payoffs
    np.testing.assert_array_equal(blocks[0, 1], np.eye(2))
    np.testing.assert_array_equal(blocks[1, 0], np.eye(2))


def test_hessian_is_exactly_symmetric():
    rng = np.random.default_rng(33)
    game = random_game(3, 3, rng)
    prof = StrategyProfile(rng.dirichlet(np.ones(3), size=3) * 0.94 + 0.02)
    h = game_hessian(game, prof, _exp(1.5, n=3, players=3))
    assert np.array_equal(h, h.T)


def test_hessian_raises_at_exponential_boundary():
    game = matching_game(2)
    vertex = StrategyProfile([[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ValueError):
        hessian_blocks(game, vertex, _exp(1.0))
    # bounded uniform marginals are fine at the vertex
    blocks = hessian_blocks(game, vertex,
                            tuple(UniformFamily(gamma=1.0, n_actions=2) for _ in range(2)))
    np.testing.assert_allclose(np.diagonal(blocks[0, 0]), [-4.0, -4.0])


def test_assemble_hessian_layout():
    blocks = np.arange(16, dtype=float).reshape(2, 2, 2, 2)
    full = assemble_hessian(blocks)
    assert full.shape == (4, 4)
    np.testing.assert_array_equal(full[:2, :2], blocks[0, 0])
    np.testing.assert_array_equal(full[:2, 2:], blocks[0, 1])
    np.testing.assert_array_equal(full[2:, :2], blocks[1, 0])


def test_operator_norm_matches_numpy():
    rng = np.random.default_rng(34)
    for _ in range(50):
        a = rng.normal(size=(int(rng.integers(1, 6)), int(rng.integers(1, 6))))
        assert operator_norm(a) == pytest.approx(np.linalg.norm(a, 2), abs=1e-8)
    assert operator_norm(np.zeros((3, 3))) == 0.0


# ---------------------------------------------------------------------------
# stability condition


def test_coupling_bound_frozen_and_capped():
    assert coupling_bound(matching_game(2), 0) == pytest.approx(1.0, abs=1e-10)
    rng = np.random.default_rng(35)
    for players, actions in [(2, 2), (2, 4), (3, 2), (3, 3)]:
        game = random_game(players, actions, rng)
        for j in range(players):
            bound = coupling_bound(game, j)
            assert bound <= actions * (players - 1) + 1e-9


def test_stability_check_passes_with_strong_regularization():
    report = stability_check(matching_game(2), _exp(3.0))
    assert report.all_passed
    assert report.diag_dominant
    assert report.negdef_on_tangent
    p0 = report.players[0]
    assert p0.curvature == pytest.approx(3.0)
    assert p0.coupling == pytest.approx(1.0, abs=1e-10)
    assert not p0.grid_fallback
    assert not p0.readings_differ
    # identical per-action densities: the grid agrees with the closed form
    assert p0.curvature_grid == pytest.approx(3.0, rel=1e-6)


def test_stability_check_fails_with_weak_regularization():
    report = stability_check(matching_game(2), _exp(0.5))
    assert not report.all_passed
    assert not report.diag_dominant        # floor 1 vs coupling 1 is not strict
    assert not report.players[0].passed
    doc = report.to_dict()
    assert doc["all_passed"] is False
    assert len(doc["players"]) == 2


def test_stability_check_uniform_curvature_is_exact():
    fams = tuple(UniformFamily(gamma=1.5, n_actions=2) for _ in range(2))
    report = stability_check(matching_game(2), fams)
    p0 = report.players[0]
    assert p0.curvature == pytest.approx(6.0)
    assert p0.curvature_grid == pytest.approx(6.0, abs=1e-12)
    assert report.all_passed


def test_stability_check_grid_fallback_for_pareto():
    fams = tuple(ParetoFamily(gamma=3.0, q=1.5, eta=np.array([0.2, 0.8]))
                 for _ in range(2))
    report = stability_check(matching_game(2), fams)
    p0 = report.players[0]
    assert p0.grid_fallback
    assert p0.readings_differ  # per-action densities genuinely differ
    assert p0.curvature_conservative < p0.curvature
    assert p0.passed


def test_diagonal_dominance_rejects_degenerate_blocks():
    good = hessian_blocks(matching_game(2), uniform_profile(2, 2), _exp(3.0))
    assert diagonal_dominance_check(good)
    bad = good.copy()
    bad[0, 0] = np.array([[-3.0, 0.5], [0.5, -3.0]])  # not diagonal
    assert not diagonal_dominance_check(bad)
    sing = good.copy()
    sing[1, 1] = np.zeros((2, 2))
    assert not diagonal_dominance_check(sing, verbose=True)


def test_negdef_on_tangent_frozen_examples():
    # strong regularization: [[-2 I, I], [I, -2 I]] has tangent spectrum {-1, -3}
    h = np.block([[-2.0 * np.eye(2), np.eye(2)], [np.eye(2), -2.0 * np.eye(2)]])
    assert negdef_on_tangent_check(h, n_players=2)
    # pure coupling with no curvature is indefinite on the tangent space
    j = np.ones((2, 2))
    h_bad = np.block([[np.zeros((2, 2)), j], [j.T, np.zeros((2, 2))]])
    assert not negdef_on_tangent_check(h_bad, n_players=2)


def test_negdef_dimension_handling():
    h = -np.eye(6)
    assert negdef_on_tangent_check(h)                # infers 2 players x 3 actions
    assert negdef_on_tangent_check(h, n_players=3)   # explicit 3 x 2 also fine
    with pytest.raises(ValueError, match="split"):
        negdef_on_tangent_check(-np.eye(6), n_players=4)
    with pytest.raises(ValueError, match="square"):
        negdef_on_tangent_check(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# variational stability probe and concavity


def test_probe_confirms_stable_equilibrium():
    game = matching_game(2)
    fams = _exp(3.0)
    star = fixed_point_iterate(game, fams).profile
    probe = variational_stability_probe(game, star, fams, n_samples=2000, seed=0)
    assert probe.violations == 0
    assert probe.min_margin > 0.0
    assert probe.samples == 2000


def test_probe_catches_unstable_candidate():
    # with weak regularization the uniform point is a fixed point, but the
    # coordination payoffs pull trajectories toward the corners
    game = matching_game(2)
    fams = _exp(0.1)
    probe = variational_stability_probe(game, uniform_profile(2, 2), fams,
                                        n_samples=2000, seed=0)
    assert probe.violations > 0
    assert probe.worst_value > 0.0


@pytest.mark.parametrize("fam", [
    ExponentialFamily(gamma=0.5, n_actions=3),
    UniformFamily(gamma=0.5, n_actions=3),
    ParetoFamily(gamma=0.5, q=1.5, eta=np.full(3, 1 / 3)),
])
def test_strong_concavity_verified(fam):
    report = strong_concavity_check(fam, n_trials=150, seed=2)
    assert report.verified
    assert report.worst_slack >= -1e-9
    assert report.modulus == pytest.approx(1.0 / report.lipschitz_constant)


def test_strong_concavity_modulus_closed_forms():
    assert strong_concavity_check(ExponentialFamily(gamma=0.5, n_actions=3),
                                  n_trials=10).modulus == pytest.approx(0.5)
    assert strong_concavity_check(UniformFamily(gamma=0.5, n_actions=3),
                                  n_trials=10).modulus == pytest.approx(3.0)
