"""Zero-sum two-agent game instances: states, trajectories, rollouts, cost.

A game couples one robot (minimizer, actions ``u``) and one adversarial
human channel (maximizer, actions ``w``) through deterministic discrete-time
dynamics ``x' = f(x, u, w)`` and a scalar stage cost. Everything here is a
pure function over immutable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

State = np.ndarray
Action = np.ndarray


class GameError(Exception):
    """Base class for game evaluation failures."""


class DimensionError(GameError, ValueError):
    """An input's shape does not match the game definition."""


class NumericError(GameError, ArithmeticError):
    """A dynamics or cost evaluation produced a non-finite value."""


@dataclass(frozen=True)
class GameDefinition:
    """One zero-sum encounter: dynamics, costs, horizon and action bounds.

    ``dynamics``, ``stage_cost`` and ``terminal_cost`` are opaque callables;
    nothing downstream assumes differentiability. ``rollout_fn`` and
    ``traj_cost_fn`` are optional vectorized fast paths over a whole horizon
    (``rollout_fn(x0, U, W) -> (T+1, d)`` states,
    ``traj_cost_fn(X, U, W) -> float``); when present they must agree with
    the per-step callables. ``lq_model_fn(X, U, W) -> (A, B, D, Q, Ru, Rw, q)``
    is an optional closed-form local LQ model (lists of per-timestep
    matrices, same blocks and conventions as the finite-difference
    quadraticizer builds); games with analytic derivatives can supply it to
    skip the finite differencing entirely.
    """

    horizon: int
    state_dim: int
    robot_dim: int
    human_dim: int
    dynamics: Callable[[State, Action, Action], State]
    stage_cost: Callable[[State, Action, Action], float]
    terminal_cost: Callable[[State], float]
    robot_bounds: np.ndarray  # (robot_dim, 2) closed intervals
    human_bounds: np.ndarray  # (human_dim, 2)
    rollout_fn: Optional[Callable] = None
    traj_cost_fn: Optional[Callable] = None
    lq_model_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DimensionError(f"horizon must be >= 1, got {self.horizon}")
        for name, b, m in (
            ("robot_bounds", self.robot_bounds, self.robot_dim),
            ("human_bounds", self.human_bounds, self.human_dim),
        ):
            b = np.asarray(b, dtype=float)
            if b.shape != (m, 2):
                raise DimensionError(f"{name} must have shape ({m}, 2), got {b.shape}")
            object.__setattr__(self, name.replace("bounds", "bounds"), b)


@dataclass(frozen=True)
class JointTrajectory:
    """An initial state plus both agents' open-loop action sequences."""

    x0: State
    u: np.ndarray  # (T, robot_dim)
    w: np.ndarray  # (T, human_dim)

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.u.ndim != 2 or self.w.ndim != 2:
            raise DimensionError("action sequences must be 2-d (T, action_dim)")
        if len(self.u) != len(self.w):
            raise DimensionError(
                f"robot and human horizons differ: {len(self.u)} vs {len(self.w)}"
            )

    @property
    def horizon(self) -> int:
        return len(self.u)

    def to_json(self) -> str:
        return json.dumps(
            {"x0": self.x0.tolist(), "u": self.u.tolist(), "w": self.w.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "JointTrajectory":
        obj = json.loads(text)
        return cls(
            x0=np.array(obj["x0"], dtype=float),
            u=np.array(obj["u"], dtype=float),
            w=np.array(obj["w"], dtype=float),
        )


def clamp(actions: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Clip actions (``(m,)`` or ``(T, m)``) into per-dimension box bounds."""
    return np.clip(actions, bounds[:, 0], bounds[:, 1])


def in_bounds(actions: np.ndarray, bounds: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(
        np.all(actions >= bounds[:, 0] - tol) and np.all(actions <= bounds[:, 1] + tol)
    )


def _check_traj(game: GameDefinition, traj: JointTrajectory) -> None:
    if traj.x0.shape != (game.state_dim,):
        raise DimensionError(
            f"x0 has dimension {traj.x0.shape}, game expects ({game.state_dim},)"
        )
    if traj.horizon != game.horizon:
        raise DimensionError(
            f"trajectory horizon {traj.horizon} != game horizon {game.horizon}"
        )
    if traj.u.shape[1] != game.robot_dim or traj.w.shape[1] != game.human_dim:
        raise DimensionError(
            f"action dims ({traj.u.shape[1]}, {traj.w.shape[1]}) do not match game "
            f"({game.robot_dim}, {game.human_dim})"
        )


def step(game: GameDefinition, x: State, u: Action, w: Action) -> State:
    """Apply one timestep of the game dynamics. Purely functional."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (game.state_dim,):
        raise DimensionError(f"state dim {x.shape} != ({game.state_dim},)")
    if u.shape != (game.robot_dim,):
        raise DimensionError(f"robot action dim {u.shape} != ({game.robot_dim},)")
    if w.shape != (game.human_dim,):
        raise DimensionError(f"human action dim {w.shape} != ({game.human_dim},)")
    x_next = np.asarray(game.dynamics(x, u, w), dtype=float)
    if x_next.shape != (game.state_dim,):
        raise DimensionError(f"dynamics returned shape {x_next.shape}")
    bad = np.flatnonzero(~np.isfinite(x_next))
    if bad.size:
        raise NumericError(f"dynamics produced non-finite state entry {bad[0]}")
    return x_next


def rollout(game: GameDefinition, traj: JointTrajectory) -> np.ndarray:
    """Simulate the full horizon; returns the ``(T+1, d)`` state sequence."""
    _check_traj(game, traj)
    if game.rollout_fn is not None:
        states = np.asarray(game.rollout_fn(traj.x0, traj.u, traj.w), dtype=float)
        if not np.all(np.isfinite(states)):
            t_bad = int(np.argmax(~np.isfinite(states).all(axis=1)))
            raise NumericError(f"non-finite state at timestep {t_bad}")
        return states
    states = np.empty((game.horizon + 1, game.state_dim))
    states[0] = traj.x0
    x = traj.x0
    for t in range(game.horizon):
        try:
            x = step(game, x, traj.u[t], traj.w[t])
        except GameError as err:
            raise type(err)(f"timestep {t}: {err}") from err
        states[t + 1] = x
    return states


def cumulative_cost(game: GameDefinition, traj: JointTrajectory) -> float:
    """Total cost: summed stage costs along the rollout plus terminal cost."""
    states = rollout(game, traj)
    if game.traj_cost_fn is not None:
        total = float(game.traj_cost_fn(states, traj.u, traj.w))
        if not np.isfinite(total):
            raise NumericError("non-finite trajectory cost")
        return total
    total = 0.0
    for t in range(game.horizon):
        c = float(game.stage_cost(states[t], traj.u[t], traj.w[t]))
        if not np.isfinite(c):
            raise NumericError(f"non-finite stage cost at timestep {t}")
        total += c
    d = float(game.terminal_cost(states[-1]))
    if not np.isfinite(d):
        raise NumericError(f"non-finite terminal cost at timestep {game.horizon}")
    return total + d
