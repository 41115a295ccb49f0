"""Independent numeric checks: sampling, quadrature, projection, brute force.

Nothing here reuses the closed forms it is meant to confirm.  Expectations of
maxima are estimated by Monte Carlo under explicit couplings of the marginals;
regularizers are integrated with scipy's adaptive quadrature; the sparse
response is rebuilt from a sort-based simplex projection; small fixed points
are located by exhaustive grid search.  All sampling goes through NumPy's
seeded PCG64 generator, so every estimate is reproducible from its seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .families import ExponentialFamily, MarginalFamily, UniformFamily
from .games import Game, StrategyProfile
from .response import response_probabilities

#: quantile arguments are capped at this level so draws stay finite even for
#: unbounded marginals.
_T_CAP = 1.0 - 1e-15

COPULAS = ("independence", "comonotone", "permutation")


@dataclass(frozen=True)
class SampleEstimate:
    """Monte Carlo estimate with its standard error and provenance."""

    mean: float
    stderr: float
    n: int
    seed: int


def coupling_expected_max(fam: MarginalFamily, u, copula: str, n: int,
                          seed: int = 0) -> SampleEstimate:
    """Estimate E[max_i (u_i + xi_i)] under a specific coupling of marginals.

    Couplings: ``independence`` draws each coordinate from its own marginal
    independently; ``comonotone`` feeds one shared uniform through every
    quantile; ``permutation`` applies a uniformly random coordinate
    permutation to each comonotone draw (a marginal-preserving mixture when
    the marginals are exchangeable).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (fam.n_actions,):
        raise ValueError(f"payoff vector must have length {fam.n_actions}")
    if copula not in COPULAS:
        raise ValueError(f"copula must be one of {COPULAS}")
    if n < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    k = fam.n_actions
    if copula == "independence":
        t = np.minimum(rng.random((n, k)), _T_CAP)
    else:
        t = np.minimum(rng.random(n), _T_CAP)[:, None] * np.ones((1, k))
    draws = np.column_stack([
        np.asarray(fam.quantile(i, t[:, i]), dtype=float) for i in range(k)
    ])
    if copula == "permutation":
        perms = rng.permuted(np.tile(np.arange(k), (n, 1)), axis=1)
        draws = np.take_along_axis(draws, perms, axis=1)
    vals = (u[None, :] + draws).max(axis=1)
    return SampleEstimate(
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(n)),
        n=n,
        seed=seed,
    )


def gumbel_choice_frequencies(u, scale: float, n: int, seed: int = 0) -> np.ndarray:
    """Frequencies of argmax(u + Gumbel(0, scale) noise) over n draws."""
    u = np.asarray(u, dtype=float)
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    noisy = u[None, :] + rng.gumbel(0.0, scale, size=(n, u.size))
    winners = np.argmax(noisy, axis=1)
    return np.bincount(winners, minlength=u.size) / float(n)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("need a 1-D vector")
    dropped = np.sort(v)[::-1]
    cumulative = (np.cumsum(dropped) - 1.0) / np.arange(1, v.size + 1)
    k = np.nonzero(dropped > cumulative)[0][-1]
    return np.maximum(v - cumulative[k], 0.0)


def finite_difference_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = h
        grad[i] = (f(x + bump) - f(x - bump)) / (2.0 * h)
    return grad


def quadrature_regularizer(fam: MarginalFamily, p) -> float:
    """Regularizer via scipy adaptive quadrature of the quantile integrals.

    An independent route around the families' own closed forms and panel
    integration: h(p) = sum_i integral over (1 - p_i, 1) of the quantile,
    computed as an integral over the upper-tail mass.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (fam.n_actions,):
        raise ValueError(f"need a length-{fam.n_actions} vector")
    total = 0.0
    for i in range(fam.n_actions):
        mass = float(p[i])
        if mass == 0.0:
            continue
        with warnings.catch_warnings():
            # integrable endpoint singularities trip quad's roundoff heuristic
            # long after the needed accuracy is reached
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(
                lambda s, i=i: float(fam.tail_quantile(i, s)),
                0.0, mass, epsabs=1e-11, epsrel=1e-11, limit=200,
            )
        total += val
    return total


def grid_fixed_point(game: Game, fams, resolution: float = 1e-2) -> StrategyProfile:
    """Exhaustive grid minimizer of the response residual for 2x2 games.

    Scans the (p_1, p_2) unit square at the given resolution and returns the
    profile with the smallest sup-norm response gap.  Exponential and uniform
    families evaluate on the whole grid at once; other families fall back to
    a Python loop, so keep the resolution coarse for them.
    """
    fams = tuple(fams)
    if game.num_players != 2 or game.num_actions != 2:
        raise ValueError("grid search is implemented for 2-player, 2-action games")
    if len(fams) != 2:
        raise ValueError("need one family per player")
    if not 0.0 < resolution <= 0.5:
        raise ValueError("resolution must lie in (0, 0.5]")
    steps = int(round(1.0 / resolution))
    xs = np.linspace(0.0, 1.0, steps + 1)
    x, y = np.meshgrid(xs, xs, indexing="ij")  # rows: p of player 1's action 0

    u1 = game.payoffs[0]
    u2 = game.payoffs[1]
    # expected payoff of each own action against the other player's mix
    u1_a = u1[0, 0] * y + u1[0, 1] * (1.0 - y)
    u1_b = u1[1, 0] * y + u1[1, 1] * (1.0 - y)
    u2_a = u2[0, 0] * x + u2[1, 0] * (1.0 - x)
    u2_b = u2[0, 1] * x + u2[1, 1] * (1.0 - x)

    q1 = _first_component_response(fams[0], u1_a, u1_b)
    q2 = _first_component_response(fams[1], u2_a, u2_b)
    residual = np.maximum(np.abs(x - q1), np.abs(y - q2))
    best = np.unravel_index(int(residual.argmin()), residual.shape)
    px, py = float(xs[best[0]]), float(xs[best[1]])
    return StrategyProfile([[px, 1.0 - px], [py, 1.0 - py]])


def _first_component_response(fam: MarginalFamily, ua: np.ndarray,
                              ub: np.ndarray) -> np.ndarray:
    """First response probability for a 2-action family on a grid of payoffs."""
    if isinstance(fam, ExponentialFamily):
        top = np.maximum(ua, ub)
        wa = fam.eta[0] * np.exp((ua - top) / fam.gamma)
        wb = fam.eta[1] * np.exp((ub - top) / fam.gamma)
        return wa / (wa + wb)
    if isinstance(fam, UniformFamily):
        # projection of u / (4 gamma) onto the 2-simplex
        return np.clip(0.5 * ((ua - ub) / (4.0 * fam.gamma) + 1.0), 0.0, 1.0)
    out = np.empty_like(ua)
    flat_a, flat_b, flat_o = ua.ravel(), ub.ravel(), out.ravel()
    for idx in range(flat_a.size):
        flat_o[idx] = response_probabilities(fam, [flat_a[idx], flat_b[idx]])[0]
    return out


def exhaustive_profile_payoff(game: Game, player: int, profile: StrategyProfile) -> float:
    """Expected payoff by brute-force enumeration of pure action profiles.

    Exponentially slower than the tensor contraction it double-checks.
    """
    from itertools import product

    m, n = game.num_players, game.num_actions
    total = 0.0
    for combo in product(range(n), repeat=m):
        weight = 1.0
        for j, a in enumerate(combo):
            weight *= profile.probs[j, a]
        total += weight * float(game.payoffs[player][combo])
    return total
