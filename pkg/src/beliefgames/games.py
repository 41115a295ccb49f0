"""Finite normal-form games and their mixed extensions.

A game is one dense payoff tensor per player, each of shape ``(N,) * M``
(M players, N actions, payoffs in [0, 1]).  Entry ``payoffs[j][a_1, ..., a_M]``
is player j's payoff at the pure action profile ``(a_1, ..., a_M)``.  Expected
payoffs under mixed play are multilinear contractions of these tensors;
everything downstream (responses, dynamics, stability checks) is built on the
three contraction routines in this module.
"""

from __future__ import annotations

import json

import numpy as np

#: tolerance for "sums to one" checks on probability vectors.  Vectors further
#: from the simplex than this are rejected rather than renormalized, so that
#: upstream bugs surface instead of being silently washed out.
SIMPLEX_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


class Game:
    """Immutable M-player, N-action game.

    Parameters
    ----------
    payoffs : sequence of array_like
        One tensor per player, each of shape ``(N,) * M`` with every entry in
        [0, 1].  Player axes are ordered: axis m indexes player m+1's action.
    """

    __slots__ = ("payoffs",)

    def __init__(self, payoffs) -> None:
        tensors = tuple(_readonly(t) for t in payoffs)
        if len(tensors) < 2:
            raise ValueError("a game needs at least two players")
        m = len(tensors)
        n = tensors[0].shape[0] if tensors[0].ndim else 0
        want = (n,) * m
        for j, t in enumerate(tensors):
            if t.shape != want:
                raise ValueError(
                    f"player {j} payoff tensor has shape {t.shape}, expected {want}"
                )
            if not np.all(np.isfinite(t)):
                raise ValueError(f"player {j} payoff tensor has non-finite entries")
            if t.min() < 0.0 or t.max() > 1.0:
                raise ValueError(f"player {j} payoffs must lie in [0, 1]")
        if n < 2:
            raise ValueError("each player needs at least two actions")
        object.__setattr__(self, "payoffs", tensors)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Game is immutable")

    @property
    def num_players(self) -> int:
        return len(self.payoffs)

    @property
    def num_actions(self) -> int:
        return self.payoffs[0].shape[0]

    def __repr__(self) -> str:
        return f"Game(players={self.num_players}, actions={self.num_actions})"


class StrategyProfile:
    """One mixed strategy per player, stored as a read-only (M, N) array.

    Each row must be a probability vector: nonnegative entries summing to one
    within ``SIMPLEX_TOL``.  Off-simplex rows raise rather than being
    renormalized.
    """

    __slots__ = ("probs",)

    def __init__(self, strategies) -> None:
        arr = np.array(strategies, dtype=float)
        if arr.ndim != 2:
            raise ValueError("a profile is a 2-D array: one row per player")
        if not np.all(np.isfinite(arr)):
            raise ValueError("strategy entries must be finite")
        if arr.min() < 0.0:
            raise ValueError("strategy entries must be nonnegative")
        gap = np.abs(arr.sum(axis=1) - 1.0).max()
        if gap > SIMPLEX_TOL:
            raise ValueError(
                f"strategy rows must sum to 1 within {SIMPLEX_TOL:g} (off by {gap:.3g})"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("StrategyProfile is immutable")

    @property
    def num_players(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    def player(self, j: int) -> np.ndarray:
        return self.probs[j]

    def replace(self, j: int, strategy) -> "StrategyProfile":
        """New profile with player j's row swapped out."""
        rows = self.probs.copy()
        rows[j] = np.asarray(strategy, dtype=float)
        return StrategyProfile(rows)

    def __repr__(self) -> str:
        return f"StrategyProfile({self.probs.tolist()})"


def uniform_profile(num_players: int, num_actions: int) -> StrategyProfile:
    """Every player mixes uniformly over their actions."""
    return StrategyProfile(np.full((num_players, num_actions), 1.0 / num_actions))


def random_profile(num_players: int, num_actions: int, rng, floor: float = 0.0) -> StrategyProfile:
    """Draw each row from the flat Dirichlet, optionally pushed off the boundary.

    With ``floor`` > 0 every component is at least ``floor`` (rows are mixed
    with the uniform vector, which keeps them on the simplex).
    """
    rows = rng.dirichlet(np.ones(num_actions), size=num_players)
    if floor > 0.0:
        if floor >= 1.0 / num_actions:
            raise ValueError("floor must be below 1/N")
        rows = rows * (1.0 - num_actions * floor) + floor
    return StrategyProfile(rows)


def _check_pair(game: Game, profile: StrategyProfile) -> None:
    if profile.num_players != game.num_players or profile.num_actions != game.num_actions:
        raise ValueError(
            f"profile shape {profile.probs.shape} does not match game "
            f"({game.num_players} players, {game.num_actions} actions)"
        )


def expected_payoff(game: Game, player: int, profile: StrategyProfile) -> float:
    """Expected payoff of ``player`` when everyone mixes as in ``profile``.

    Computed by successive contraction of the payoff tensor, one player axis
    at a time (O(M * N^M) work, no N^M-sized intermediates beyond the tensor).
    """
    _check_pair(game, profile)
    out = game.payoffs[player]
    for axis in range(game.num_players - 1, -1, -1):
        out = np.tensordot(out, profile.probs[axis], axes=([axis], [0]))
    return float(out)


def payoff_vector_rows(game: Game, player: int, rows: np.ndarray) -> np.ndarray:
    """:func:`payoff_vector` against a raw (M, N) array of strategy rows.

    Skips profile validation, so hot loops can call it every round and
    validate on their own cadence.  Two-player games take a direct
    matrix-vector product; larger games fold the payoff tensor one opponent
    axis at a time.
    """
    if game.num_players == 2:
        t = game.payoffs[player]
        return t @ rows[1] if player == 0 else rows[0] @ t
    out = game.payoffs[player]
    # fold axes above `player` first (indices unaffected), then those below
    for axis in range(game.num_players - 1, player, -1):
        out = np.tensordot(out, rows[axis], axes=([axis], [0]))
    for axis in range(player - 1, -1, -1):
        out = np.tensordot(out, rows[axis], axes=([axis], [0]))
    return out


def payoff_vector(game: Game, player: int, profile: StrategyProfile) -> np.ndarray:
    """Expected payoff of each pure action of ``player`` against the others.

    Component i is player ``player``'s expected payoff when they play action i
    and every other player mixes as in ``profile`` (the player's own row is
    ignored).  Returns a length-N vector.
    """
    _check_pair(game, profile)
    return payoff_vector_rows(game, player, profile.probs)


def pairwise_payoff_matrix(game: Game, player: int, other: int, rest) -> np.ndarray:
    """Payoff matrix of ``player`` across their and ``other``'s pure actions.

    Entry (i, i') is ``player``'s expected payoff when they play i, ``other``
    plays i', and the remaining players mix according to ``rest`` (their
    strategies in ascending player order).  For two-player games ``rest`` is
    empty and this is just the raw tensor (transposed when player > other).
    """
    if player == other:
        raise ValueError("pairwise matrix needs two distinct players")
    m, n = game.num_players, game.num_actions
    rest = [np.asarray(r, dtype=float) for r in rest]
    if len(rest) != m - 2:
        raise ValueError(f"expected {m - 2} remaining strategies, got {len(rest)}")
    others = [k for k in range(m) if k != player and k != other]
    strategies: dict[int, np.ndarray] = dict(zip(others, rest))
    for k, s in strategies.items():
        if s.shape != (n,):
            raise ValueError(f"strategy for player {k} has wrong length")
    out = game.payoffs[player]
    for axis in range(m - 1, -1, -1):
        if axis in (player, other):
            continue
        out = np.tensordot(out, strategies[axis], axes=([axis], [0]))
    # remaining axes keep their original relative order
    return out if player < other else out.T


def matching_game(num_actions: int = 2) -> Game:
    """Two-player coordination game: both earn 1 when their actions match."""
    eye = np.eye(num_actions)
    return Game([eye, eye])


def random_game(num_players: int, num_actions: int, rng) -> Game:
    """Game with independent uniform [0, 1] payoff entries."""
    shape = (num_actions,) * num_players
    return Game([rng.random(shape) for _ in range(num_players)])


def save_game(game: Game, path) -> None:
    """Write a game as JSON: player/action counts plus flat payoff lists.

    Flattening is row-major over the action profile (the last player's action
    varies fastest).
    """
    doc = {
        "players": game.num_players,
        "actions": game.num_actions,
        "payoffs": [t.ravel().tolist() for t in game.payoffs],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_game(path) -> Game:
    """Inverse of :func:`save_game`; raises ValueError on malformed input."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("game file must hold a JSON object")
    try:
        m = int(doc["players"])
        n = int(doc["actions"])
        flat = doc["payoffs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"game file missing or malformed field: {exc}") from exc
    if m < 2 or n < 2:
        raise ValueError("need at least two players and two actions")
    if not isinstance(flat, list) or len(flat) != m:
        raise ValueError(f"'payoffs' must list {m} per-player tables")
    tensors = []
    for j, entries in enumerate(flat):
        arr = np.asarray(entries, dtype=float)
        if arr.shape != (n**m,):
            raise ValueError(
                f"player {j} payoff table has {arr.size} entries, expected {n**m}"
            )
        tensors.append(arr.reshape((n,) * m))
    return Game(tensors)
