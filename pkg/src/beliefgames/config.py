"""Experiment configuration files.

A config is a single JSON object naming a game file (resolved relative to the
config's own directory), the per-player families, a step schedule, and run
and solver settings.  Families may be given once (applied to every player) or
as a per-player list.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import PROBABILITY_CLAMP, StepSchedule
from .families import MarginalFamily, family_from_dict
from .games import Game, load_game


@dataclass
class Tolerances:
    """Thresholds shared by the simulate/solve/check commands."""

    residual: float = 1e-3
    fixed_point: float = 1e-10
    max_iterations: int = 10_000
    damping: float = 0.5


@dataclass
class ExperimentConfig:
    game: Game
    game_path: str
    risk_families: tuple
    belief_families: tuple
    schedule: StepSchedule
    horizon: int
    seed: int = 0
    downsample: int = 1
    clamp: float = PROBABILITY_CLAMP
    initial_estimates: np.ndarray | None = None
    out_dir: str | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def describe(self) -> dict:
        """JSON-friendly summary used by dry runs and written next to outputs."""
        return {
            "game": self.game_path,
            "players": self.game.num_players,
            "actions": self.game.num_actions,
            "risk_families": [f.to_dict() for f in self.risk_families],
            "belief_families": [f.to_dict() for f in self.belief_families],
            "schedule": self.schedule.to_dict(),
            "horizon": self.horizon,
            "seed": self.seed,
            "downsample": self.downsample,
            "clamp": self.clamp,
            "out_dir": self.out_dir,
            "tolerances": vars(self.tolerances) | {},
        }


def _families_from_spec(spec, game: Game, label: str) -> tuple:
    if isinstance(spec, dict):
        specs = [spec] * game.num_players
    elif isinstance(spec, list):
        specs = spec
    else:
        raise ValueError(f"{label} must be a family object or a per-player list")
    if len(specs) != game.num_players:
        raise ValueError(
            f"{label} lists {len(specs)} families, game has {game.num_players} players"
        )
    fams = []
    for j, doc in enumerate(specs):
        try:
            fams.append(family_from_dict(doc, n_actions=game.num_actions))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"{label}[{j}]: {exc}") from exc
    return tuple(fams)


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and validate a config file; raises ValueError on any problem."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    base = os.path.dirname(os.path.abspath(path))

    try:
        game_rel = doc["game"]
        risk_spec = doc["risk_families"]
        schedule = StepSchedule.from_dict(doc["schedule"])
        horizon = int(doc["horizon"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing required field {exc}") from exc

    game_path = game_rel if os.path.isabs(game_rel) else os.path.join(base, game_rel)
    try:
        game = load_game(game_path)
    except OSError as exc:
        raise ValueError(f"{path}: cannot read game file {game_path!r} ({exc})") from exc

    risk = _families_from_spec(risk_spec, game, "risk_families")
    belief = (_families_from_spec(doc["belief_families"], game, "belief_families")
              if "belief_families" in doc else risk)

    if horizon < 1:
        raise ValueError(f"{path}: horizon must be positive")
    downsample = int(doc.get("downsample", 1))
    if downsample < 1:
        raise ValueError(f"{path}: downsample must be at least 1")

    initial = None
    if "initial_estimates" in doc and doc["initial_estimates"] is not None:
        initial = np.asarray(doc["initial_estimates"], dtype=float)
        if initial.shape != (game.num_players, game.num_actions):
            raise ValueError(f"{path}: initial_estimates must be (players, actions)")

    tols = Tolerances()
    for key, value in (doc.get("tolerances") or {}).items():
        if not hasattr(tols, key):
            raise ValueError(f"{path}: unknown tolerance {key!r}")
        setattr(tols, key, type(getattr(tols, key))(value))

    return ExperimentConfig(
        game=game,
        game_path=game_path,
        risk_families=risk,
        belief_families=belief,
        schedule=schedule,
        horizon=horizon,
        seed=int(doc.get("seed", 0)),
        downsample=downsample,
        clamp=float(doc.get("clamp", PROBABILITY_CLAMP)),
        initial_estimates=initial,
        out_dir=doc.get("out_dir"),
        tolerances=tols,
    )
