"""Quantal response maps induced by marginal perturbation families.

Given a payoff vector u and a family with regularizer h, the response is the
unique maximizer of ``p . u + h(p)`` over the simplex.  Exponential families
give a weighted softmax, uniform families give a sparse thresholded map, and
everything else is solved through the stationarity system

    u_i + F_i^{-1}(1 - p_i) = kappa   (p_i > 0),

whose scalar unknown kappa is bisected until sum_i p_i(kappa) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .families import ExponentialFamily, MarginalFamily, UniformFamily
from .games import Game, StrategyProfile, payoff_vector

#: |sum p - 1| target for the kappa bisection.
BISECT_TOL = 1e-12
_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class ResponseResult:
    """Solved response: probabilities, attained value, and solver details.

    ``kkt_multiplier`` is the stationarity constant kappa above (all solver
    routes report it on the same scale, so they can be cross-checked);
    ``solver_tag`` records which route produced the answer.
    """

    probabilities: np.ndarray
    optimistic_value: float
    kkt_multiplier: float
    solver_tag: str


def _check_payoff_vector(fam: MarginalFamily, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (fam.n_actions,):
        raise ValueError(f"payoff vector must have length {fam.n_actions}")
    if not np.all(np.isfinite(u)):
        raise ValueError("payoff vector must be finite")
    return u


def weighted_softmax(u, eta, gamma: float) -> np.ndarray:
    """Softmax of u / gamma with positive prior weights eta.

    Computed with the max subtracted from the exponent, so any finite inputs
    are safe; components whose exponent underflows come out as exact zeros.
    """
    u = np.asarray(u, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    z = u / gamma
    w = eta * np.exp(z - z.max())
    return w / w.sum()


def sparsemax(u) -> np.ndarray:
    """Sparse simplex map: p_i = max(u_i - kappa, 0) / (2N).

    The threshold kappa is chosen so the output sums to one; the result
    equals the Euclidean projection of u / (2N) onto the simplex.  Ties are
    broken stably, so permuting u permutes the output exactly.
    """
    p, _ = _sparsemax_threshold(u)
    return p


def _sparsemax_threshold(u) -> tuple[np.ndarray, float]:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("sparsemax needs a 1-D vector")
    if not np.all(np.isfinite(u)):
        raise ValueError("sparsemax needs finite inputs")
    n = u.size
    sorted_u = u[np.argsort(-u, kind="stable")]
    cumsum = np.cumsum(sorted_u)
    j = np.arange(1, n + 1)
    in_support = 2.0 * n + j * sorted_u > cumsum
    k = int(j[in_support].max())  # j = 1 always qualifies
    kappa = (cumsum[k - 1] - 2.0 * n) / k
    return np.maximum(u - kappa, 0.0) / (2.0 * n), float(kappa)


def _bisection_response(fam: MarginalFamily, u: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve sum_i (1 - F_i(kappa - u_i)) = 1 for kappa by bisection.

    Components with kappa - u_i at or above the support's upper end come out
    exactly zero (their CDF saturates at one).
    """
    if not fam.strictly_increasing_cdf:
        raise ValueError(
            f"{type(fam).__name__} has a non-strictly-increasing CDF; "
            "the response is not unique"
        )
    n = fam.n_actions
    lows = np.array([fam.support(i)[0] for i in range(n)])

    def probs(kappa: float) -> np.ndarray:
        return 1.0 - fam.cdf_vector(kappa - u)

    lo = float(np.min(u + lows))  # here some component hits probability 1
    if n == 1:
        return np.array([1.0]), lo
    hi = float(np.max(u + fam.tail_quantile_vector(np.full(n, 1.0 / n))))
    hi = max(hi, lo + 1e-12)
    step = max(1.0, hi - lo)
    for _ in range(200):
        if probs(hi).sum() <= 1.0:
            break
        hi += step
        step *= 2.0
    else:
        raise RuntimeError(
            f"bisection bracket failure: sum of probabilities still above 1 at "
            f"kappa = {hi!r} (lo = {lo!r})"
        )
    kappa = 0.5 * (lo + hi)
    for _ in range(_BISECT_MAX_ITER):
        kappa = 0.5 * (lo + hi)
        gap = probs(kappa).sum() - 1.0
        if abs(gap) <= BISECT_TOL:
            break
        if gap > 0.0:
            lo = kappa
        else:
            hi = kappa
    p = probs(kappa)
    total = p.sum()
    if not (0.5 < total < 2.0) or abs(total - 1.0) > 1e-9:
        raise RuntimeError(
            f"bisection failed to converge: sum p = {total!r} at kappa = {kappa!r} "
            f"(bracket [{lo!r}, {hi!r}])"
        )
    return p / total, float(kappa)


def response_probabilities(fam: MarginalFamily, u, method: str = "auto") -> np.ndarray:
    """Probabilities of the quantal response, skipping value bookkeeping.

    ``method`` is "auto" (closed form when the family has one) or "bisection"
    (force the generic solver; useful for agreement checks).
    """
    u = _check_payoff_vector(fam, u)
    if method not in ("auto", "bisection"):
        raise ValueError("method must be 'auto' or 'bisection'")
    if method == "auto":
        if isinstance(fam, ExponentialFamily):
            return weighted_softmax(u, fam.eta, fam.gamma)
        if isinstance(fam, UniformFamily):
            return sparsemax(u / fam.gamma)
    p, _ = _bisection_response(fam, u)
    return p


def response_solver(fam: MarginalFamily):
    """Bind the family's response route once, for per-round hot loops.

    Returns a callable mapping a payoff vector to its response probabilities
    by the same route :func:`response_probabilities` would pick, minus the
    per-call input validation and dispatch.
    """
    if isinstance(fam, ExponentialFamily):
        eta, gamma = fam.eta, fam.gamma
        return lambda u: weighted_softmax(u, eta, gamma)
    if isinstance(fam, UniformFamily):
        gamma = fam.gamma
        return lambda u: sparsemax(u / gamma)
    return lambda u: _bisection_response(fam, u)[0]


def quantal_response(fam: MarginalFamily, u, method: str = "auto") -> ResponseResult:
    """Maximize ``p . u + h(p)`` over the simplex for payoff vector u."""
    u = _check_payoff_vector(fam, u)
    if method not in ("auto", "bisection"):
        raise ValueError("method must be 'auto' or 'bisection'")
    if method == "auto" and isinstance(fam, ExponentialFamily):
        p = weighted_softmax(u, fam.eta, fam.gamma)
        z = u / fam.gamma
        m = float(z.max())
        lse = m + np.log(np.dot(fam.eta, np.exp(z - m)))
        kappa = fam.gamma * lse - fam.gamma
        tag = "softmax"
    elif method == "auto" and isinstance(fam, UniformFamily):
        p, kappa_star = _sparsemax_threshold(u / fam.gamma)
        kappa = fam.gamma * (1.0 + kappa_star)
        tag = "sparsemax"
    else:
        p, kappa = _bisection_response(fam, u)
        tag = "bisection"
    value = float(np.dot(p, u)) + fam.regularizer(p)
    return ResponseResult(p, value, float(kappa), tag)


def optimistic_value(fam: MarginalFamily, u) -> float:
    """Value of the response problem: max over the simplex of p . u + h(p)."""
    return quantal_response(fam, u).optimistic_value


def smooth_payoff(game: Game, player: int, profile: StrategyProfile,
                  fam: MarginalFamily) -> float:
    """Player's expected payoff plus the perturbation value of their own mix."""
    u = payoff_vector(game, player, profile)
    return float(np.dot(profile.player(player), u)) + fam.regularizer(profile.player(player))


def smooth_payoff_gradient(game: Game, player: int, profile: StrategyProfile,
                           fam: MarginalFamily) -> np.ndarray:
    """Gradient of :func:`smooth_payoff` in the player's own probabilities.

    Component i is ``u_i + F_i^{-1}(1 - p_i)``.  Raises when some p_i = 0
    meets an unbounded quantile; clamp the profile away from the boundary
    before calling in that case.
    """
    u = payoff_vector(game, player, profile)
    grad = u + fam.quantile_vector(1.0 - profile.player(player))
    if not np.all(np.isfinite(grad)):
        raise ValueError(
            "gradient is infinite at a boundary probability; clamp the profile "
            "away from 0 before differentiating"
        )
    return grad
