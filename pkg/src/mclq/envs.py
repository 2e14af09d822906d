"""Concrete game environments and simulated-human models.

Three families of games: a 2-D point-mass game (single or multi human), and
a two-car kinematic-bicycle driving game. Also provides the bounded-rational
(Boltzmann) simulated human used in closed-loop benchmarks and the nominal
human model used as the reference trajectory for the sampler's margin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .game import GameDefinition, JointTrajectory, State, clamp
from .lq import floor_pd


# ---------------------------------------------------------------------------
# Point-mass (and stacked multi-human point-mass)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointMassParams:
    goal: np.ndarray = field(default_factory=lambda: np.zeros(2))
    q_goal: float = 1.0
    r_u: float = 1.0
    r_w: float = 8.0
    prox_weight: float = 4.0
    prox_radius: float = 1.0
    horizon: int = 30
    action_bound: float = 0.5  # max |displacement| per axis per step (robot)
    human_bound: Optional[float] = None  # humans default to the robot's bound
    proximity: bool = True     # disable for exactly linear-quadratic tests

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))
        if self.human_bound is None:
            object.__setattr__(self, "human_bound", self.action_bound)
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        for name in ("q_goal", "r_u", "r_w", "prox_weight", "prox_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def multi_human_game(k: int, params: PointMassParams) -> GameDefinition:
    """Point-mass game with ``k`` humans stacked into the state and w."""
    if k < 0:
        raise ValueError("k must be >= 0")
    p = params
    d = 2 + 2 * k
    mw = max(2 * k, 1)  # keep a (dummy) human channel even with k=0

    def dynamics(x, u, w):
        x2 = x.copy()
        x2[:2] += u
        if k:
            x2[2:] += w[: 2 * k]
        return x2

    def proximity_cost(xr, xh):
        # hinge well: penalty fades to zero at prox_radius. The squared
        # hinge keeps a nonzero inward slope all the way to contact, so a
        # planner that cannot fully escape an encounter still sees which
        # way out is less bad (a well that flattens at the center would
        # leave it gradient-blind exactly when it has been cornered).
        d = math.hypot(xr[0] - xh[0], xr[1] - xh[1])
        gap = p.prox_radius - d
        return p.prox_weight * gap * gap if gap > 0.0 else 0.0

    def stage_cost(x, u, w):
        c = (
            p.q_goal * ((x[0] - p.goal[0]) ** 2 + (x[1] - p.goal[1]) ** 2)
            + p.r_u * (u[0] ** 2 + u[1] ** 2)
            - p.r_w * float(w @ w)
        )
        if p.proximity:
            for i in range(k):
                c += proximity_cost(x[:2], x[2 + 2 * i : 4 + 2 * i])
        return c

    def terminal_cost(x):
        return p.q_goal * ((x[0] - p.goal[0]) ** 2 + (x[1] - p.goal[1]) ** 2)

    def rollout_fn(x0, U, W):
        T = len(U)
        states = np.empty((T + 1, d))
        states[0] = x0
        np.cumsum(U, axis=0, out=states[1:, :2])
        states[1:, :2] += x0[:2]
        if k:
            np.cumsum(W[:, : 2 * k], axis=0, out=states[1:, 2:])
            states[1:, 2:] += x0[2:]
        else:
            states[1:, 2:] = x0[2:]
        return states

    def traj_cost_fn(X, U, W):
        dr = X[:-1, :2] - p.goal
        c = (
            p.q_goal * float(np.einsum("ij,ij->", dr, dr))
            + p.r_u * float(np.einsum("ij,ij->", U, U))
            - p.r_w * float(np.einsum("ij,ij->", W, W))
        )
        if p.proximity and k:
            rel = X[:-1, :2, None] - X[:-1, 2:].reshape(len(U), k, 2).transpose(0, 2, 1)
            gap = p.prox_radius - np.sqrt(np.einsum("ijk,ijk->ik", rel, rel))
            np.maximum(gap, 0.0, out=gap)
            c += p.prox_weight * float(np.sum(gap * gap))
        dT = X[-1, :2] - p.goal
        return c + p.q_goal * float(dT @ dT)

    # closed-form local LQ model: the dynamics are exactly linear and the
    # cost is piecewise quadratic, so the quadraticization has an explicit
    # form (the proximity well contributes only where it is active)
    A_const = np.eye(d)
    B_const = np.zeros((d, 2))
    B_const[:2, :2] = np.eye(2)
    D_const = np.zeros((d, mw))
    if k:
        D_const[2:, : 2 * k] = np.eye(2 * k)
    Ru_const = p.r_u * np.eye(2)
    Rw_const = p.r_w * np.eye(mw)
    QT = np.zeros((d, d))
    QT[0, 0] = QT[1, 1] = p.q_goal

    def quad_state_cost(x):
        Qt = QT.copy()
        qt = np.zeros(d)
        qt[:2] = 2.0 * p.q_goal * (x[:2] - p.goal)
        if p.proximity and k:
            rel = x[:2] - x[2:].reshape(k, 2)
            dist = np.maximum(np.linalg.norm(rel, axis=1), 1e-9)
            active = np.flatnonzero(dist < p.prox_radius)
            for i in active:
                ix = 2 + 2 * i
                di = dist[i]
                uvec = rel[i] / di
                gap = p.prox_radius - di
                uu = np.outer(uvec, uvec)
                H = 2.0 * p.prox_weight * (uu - (gap / di) * (np.eye(2) - uu))
                grad = -2.0 * p.prox_weight * gap * uvec
                Qt[:2, :2] += 0.5 * H
                Qt[ix : ix + 2, ix : ix + 2] += 0.5 * H
                Qt[:2, ix : ix + 2] -= 0.5 * H
                Qt[ix : ix + 2, :2] -= 0.5 * H
                qt[:2] += grad
                qt[ix : ix + 2] -= grad
            if len(active):
                Qt = floor_pd(Qt, 0.0)
        return Qt, qt

    def lq_model_fn(X, U, W):
        T = len(U)
        Q, q = [], []
        for t in range(T):
            Qt, qt = quad_state_cost(X[t])
            Q.append(Qt)
            q.append(qt)
        qT = np.zeros(d)
        qT[:2] = 2.0 * p.q_goal * (X[T, :2] - p.goal)
        Q.append(QT.copy())
        q.append(qT)
        return (
            [A_const] * T, [B_const] * T, [D_const] * T,
            Q, [Ru_const] * T, [Rw_const] * T, q,
        )

    bound = np.array([[-p.action_bound, p.action_bound]] * 2)
    hbound = np.array([[-p.human_bound, p.human_bound]] * 2)
    return GameDefinition(
        horizon=p.horizon,
        state_dim=d,
        robot_dim=2,
        human_dim=mw,
        dynamics=dynamics,
        stage_cost=stage_cost,
        terminal_cost=terminal_cost,
        robot_bounds=bound,
        human_bounds=np.tile(hbound, (max(k, 1), 1))[:mw],
        rollout_fn=rollout_fn,
        traj_cost_fn=traj_cost_fn,
        lq_model_fn=lq_model_fn,
    )


def point_mass_game(params: PointMassParams) -> GameDefinition:
    """Robot and one human in a 2-D plane with additive linear dynamics."""
    return multi_human_game(1, params)


# ---------------------------------------------------------------------------
# Driving (two kinematic bicycles)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DrivingParams:
    goal: np.ndarray = field(default_factory=lambda: np.array([5.0, 0.0]))
    eta: float = 10.0
    r_u: float = 0.5
    dt: float = 0.1
    wheelbase: float = 2.7
    accel_bound: float = 2.0
    steer_bound: float = 0.5
    horizon: int = 30

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))
        if self.eta <= 0 or self.dt <= 0:
            raise ValueError("eta and dt must be positive")


def _bicycle_step(s, a, delta, dt, wheelbase):
    px, py, th, v = s
    return (
        px + v * math.cos(th) * dt,
        py + v * math.sin(th) * dt,
        th + (v / wheelbase) * math.tan(delta) * dt,
        v + a * dt,
    )


def driving_game(params: DrivingParams) -> GameDefinition:
    """Two-car game; each agent state is (px, py, heading, speed)."""
    p = params

    def dynamics(x, u, w):
        r = _bicycle_step(x[0:4], u[0], u[1], p.dt, p.wheelbase)
        h = _bicycle_step(x[4:8], w[0], w[1], p.dt, p.wheelbase)
        return np.array(r + h)

    def stage_cost(x, u, w):
        gx, gy = x[0] - p.goal[0], x[1] - p.goal[1]
        dx, dy = x[0] - x[4], x[1] - x[5]
        return (
            gx * gx
            + gy * gy
            + p.eta * math.exp(-(dx * dx + dy * dy) / p.eta)
            + p.r_u * (u[0] ** 2 + u[1] ** 2)
        )

    def terminal_cost(x):
        gx, gy = x[0] - p.goal[0], x[1] - p.goal[1]
        return gx * gx + gy * gy

    def rollout_fn(x0, U, W):
        T = len(U)
        states = np.empty((T + 1, 8))
        states[0] = x0
        r, h = tuple(x0[0:4]), tuple(x0[4:8])
        for t in range(T):
            r = _bicycle_step(r, U[t, 0], U[t, 1], p.dt, p.wheelbase)
            h = _bicycle_step(h, W[t, 0], W[t, 1], p.dt, p.wheelbase)
            states[t + 1, 0:4] = r
            states[t + 1, 4:8] = h
        return states

    def traj_cost_fn(X, U, W):
        dg = X[:-1, 0:2] - p.goal
        rel = X[:-1, 0:2] - X[:-1, 4:6]
        c = (
            float(np.einsum("ij,ij->", dg, dg))
            + p.eta * float(np.sum(np.exp(-np.einsum("ij,ij->i", rel, rel) / p.eta)))
            + p.r_u * float(np.einsum("ij,ij->", U, U))
        )
        dT = X[-1, 0:2] - p.goal
        return c + float(dT @ dT)

    bounds = np.array(
        [[-p.accel_bound, p.accel_bound], [-p.steer_bound, p.steer_bound]]
    )
    return GameDefinition(
        horizon=p.horizon,
        state_dim=8,
        robot_dim=2,
        human_dim=2,
        dynamics=dynamics,
        stage_cost=stage_cost,
        terminal_cost=terminal_cost,
        robot_bounds=bounds,
        human_bounds=bounds.copy(),
        rollout_fn=rollout_fn,
        traj_cost_fn=traj_cost_fn,
    )


# ---------------------------------------------------------------------------
# Simulated humans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoltzmannHuman:
    """Bounded-rational agent sampling grid actions ~ exp(-alpha * cost).

    ``stage_cost(x, w)`` scores this human's own objective on the full game
    state; it must not depend on the robot's goal. ``alpha = 0`` acts
    uniformly at random, ``alpha = inf`` always picks the argmin action.
    """

    alpha: float
    stage_cost: Callable[[State, np.ndarray], float]
    action_grid: np.ndarray  # (n_actions, m)
    goal: np.ndarray
    dynamics: Callable[[State, np.ndarray, np.ndarray], State]
    pad: Callable[[np.ndarray], np.ndarray]  # embed own action into full w
    lookahead: int = 5

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if len(self.action_grid) == 0:
            raise ValueError("action grid must be non-empty")


def boltzmann_action_costs(
    human: BoltzmannHuman, x: State, u_last: np.ndarray
) -> np.ndarray:
    """Lookahead cost of each grid action; the robot replays ``u_last``."""
    costs = np.empty(len(human.action_grid))
    for i, w in enumerate(human.action_grid):
        wf = human.pad(w)
        xs = x
        c = 0.0
        for _ in range(human.lookahead):
            xs = human.dynamics(xs, u_last, wf)
            c += human.stage_cost(xs, w)
        costs[i] = c
    return costs


def boltzmann_sample(
    human: BoltzmannHuman, x: State, u_last: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Sample one action from the softmax over grid-action lookahead costs."""
    costs = boltzmann_action_costs(human, x, u_last)
    if math.isinf(human.alpha):
        return human.action_grid[int(np.argmin(costs))].copy()
    logits = -human.alpha * (costs - costs.min())
    p = np.exp(logits)
    p /= p.sum()
    idx = int(rng.choice(len(p), p=p))
    return human.action_grid[idx].copy()


def velocity_action_grid(bound: float) -> np.ndarray:
    """8 compass directions x 2 speeds + stay, scaled to the action bound."""
    dirs = []
    for kx in (-1, 0, 1):
        for ky in (-1, 0, 1):
            if kx == 0 and ky == 0:
                continue
            v = np.array([kx, ky], dtype=float)
            v *= bound / np.linalg.norm(v)
            dirs.append(v)
            dirs.append(0.5 * v)
    dirs.append(np.zeros(2))
    return np.array(dirs)


def driving_action_grid(accel_bound: float, steer_bound: float) -> np.ndarray:
    """3 accelerations x 5 steering angles."""
    accels = np.array([-accel_bound, 0.0, accel_bound])
    steers = np.linspace(-steer_bound, steer_bound, 5)
    return np.array([[a, s] for a in accels for s in steers])


# ---------------------------------------------------------------------------
# Nominal human models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NominalHumanModel:
    """Prediction of one human's open-loop behavior.

    kinds: ``straight_line`` (constant speed toward ``goal``),
    ``constant_velocity`` (repeat ``velocity``), ``zero``.
    """

    kind: str = "straight_line"
    goal: Optional[np.ndarray] = None
    max_speed: float = 0.5
    velocity: Optional[np.ndarray] = None
    action_dim: int = 2

    def __post_init__(self):
        if self.kind not in ("straight_line", "constant_velocity", "zero"):
            raise ValueError(f"unknown nominal human kind {self.kind!r}")
        if self.kind == "straight_line" and self.goal is None:
            raise ValueError("straight_line model needs a goal")
        if self.kind == "constant_velocity" and self.velocity is None:
            raise ValueError("constant_velocity model needs a velocity")


def nominal_trajectory(
    model: NominalHumanModel, human_state: np.ndarray, T: int
) -> np.ndarray:
    """Open-loop (T, m) nominal action sequence for one human."""
    if model.kind == "zero":
        return np.zeros((T, model.action_dim))
    if model.kind == "constant_velocity":
        v = np.asarray(model.velocity, dtype=float)
        v = np.clip(v, -model.max_speed, model.max_speed)
        return np.tile(v, (T, 1))
    actions = np.zeros((T, 2))
    pos = np.asarray(human_state[:2], dtype=float).copy()
    goal = np.asarray(model.goal, dtype=float)
    for t in range(T):
        rem = goal - pos
        dist = float(np.linalg.norm(rem))
        if dist <= 1e-12:
            break
        a = rem if dist <= model.max_speed else rem * (model.max_speed / dist)
        actions[t] = a
        pos += a
    return actions


# ---------------------------------------------------------------------------
# Closed-loop environment bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Env:
    """A game plus everything a closed-loop simulation needs around it."""

    kind: str
    game: GameDefinition
    k: int
    x0: State
    humans: tuple  # one BoltzmannHuman per human
    nominal_models: tuple  # one NominalHumanModel per human
    human_goals: np.ndarray
    robot_goal: Optional[np.ndarray] = None  # position-space goal, if meaningful

    def robot_pos(self, x: State) -> np.ndarray:
        return x[:2]

    def human_pos(self, x: State) -> np.ndarray:
        if self.kind == "driving":
            return x[4:6].reshape(1, 2)
        return x[2 : 2 + 2 * self.k].reshape(self.k, 2)

    def nominal_w(self, x: State, T: int) -> np.ndarray:
        """Stacked nominal action trajectory for all humans."""
        positions = self.human_pos(x)
        parts = [
            nominal_trajectory(m, positions[i], T)
            for i, m in enumerate(self.nominal_models)
        ]
        if not parts:
            return np.zeros((T, self.game.human_dim))
        return np.hstack(parts)

    def nominal_u(self, x: State, T: int) -> np.ndarray:
        """Straight-to-goal robot action sequence, used as a plan expansion
        point. Falls back to zero actions when the robot goal is not a
        plain position (driving)."""
        if self.robot_goal is None:
            return np.zeros((T, self.game.robot_dim))
        model = NominalHumanModel(
            kind="straight_line",
            goal=self.robot_goal,
            max_speed=float(np.min(self.game.robot_bounds[:, 1])),
        )
        return nominal_trajectory(model, self.robot_pos(x), T)

    def pursuit_scenarios(
        self, x: State, T: int, lam: float, u: Optional[np.ndarray] = None
    ) -> list:
        """Adversary responses tailored to one robot trajectory, one per
        human: that human diverts from its nominal actions to close on the
        route ``u`` traces (the straight-to-goal route when ``u`` is None)
        while everyone else stays nominal, and the diversion is scaled
        into the margin budget. A fixed scenario pool scores every
        candidate against dives aimed at somebody else's route, which a
        detour escapes for free; responses aimed at the candidate's own
        route make the worst case land on it."""
        if not self.humans or lam <= 0.0 or self.kind == "driving":
            return []
        w_nom = self.nominal_w(x, T)
        ru = self.nominal_u(x, T) if u is None else np.asarray(u, dtype=float)
        rpos = self.robot_pos(x) + np.cumsum(ru, axis=0)
        positions = self.human_pos(x)
        bounds = self.game.human_bounds
        out = []
        for j in range(self.k):
            w = w_nom.copy()
            pos = positions[j].copy()
            speed = float(bounds[2 * j, 1])
            for t in range(T):
                rem = rpos[t] - pos
                d = float(np.linalg.norm(rem))
                a = rem if d <= speed else rem * (speed / d)
                w[t, 2 * j : 2 * j + 2] = a
                pos = pos + a
            diff = w - w_nom
            n2 = float(np.sum(diff * diff))
            if math.isfinite(lam) and n2 > lam:
                w = w_nom + diff * math.sqrt(lam / n2)
            out.append(w)
        return out

    def dodge_candidates(
        self, x: State, T: int, offsets=(0.6, 1.2)
    ) -> list:
        """Lateral detour robot trajectories: straight to the goal via a
        control point pushed off the direct route by each offset, both
        sides. The sampler's chain only moves locally, so without these
        the candidate set never contains a plan that gives up progress
        for clearance; the final minimax picks whichever detour width the
        margin budget actually warrants."""
        if self.robot_goal is None:
            return []
        p0 = self.robot_pos(x)
        g = np.asarray(self.robot_goal, dtype=float)
        d = g - p0
        L = float(np.linalg.norm(d))
        if L < 1e-9:
            return []
        e = d / L
        perp = np.array([-e[1], e[0]])
        smax = float(np.min(self.game.robot_bounds[:, 1]))
        out = []
        for b in offsets:
            for sgn in (1.0, -1.0):
                mid = p0 + 0.5 * d + sgn * b * perp
                u = np.zeros((T, 2))
                pos = p0.copy()
                heading_mid = True
                for t in range(T):
                    target = mid if heading_mid else g
                    rem = target - pos
                    dist = float(np.linalg.norm(rem))
                    if heading_mid and dist <= smax:
                        heading_mid = False
                        target = g
                        rem = target - pos
                        dist = float(np.linalg.norm(rem))
                    if dist <= 1e-12:
                        break
                    a = rem if dist <= smax else rem * (smax / dist)
                    u[t] = a
                    pos = pos + a
                out.append(u)
        return out

    def sample_human_actions(
        self, x: State, u_last: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        if not self.humans:
            return np.zeros(self.game.human_dim)
        return np.concatenate(
            [boltzmann_sample(h, x, u_last, rng) for h in self.humans]
        )


def _pad_fn(k: int, i: int) -> Callable[[np.ndarray], np.ndarray]:
    def pad(w):
        full = np.zeros(max(2 * k, 1))
        full[2 * i : 2 * i + 2] = w
        return full

    return pad


def make_point_mass_env(
    params: PointMassParams,
    k: int = 1,
    rng: Optional[np.random.Generator] = None,
    alpha: float = 7.5,
    arena: float = 2.5,
    lookahead: int = 5,
    human_effort: float = 0.2,
    goal_noise: float = 0.0,
    hostile_prob: float = 0.0,
    hostile_trigger: float = 1.5,
) -> Env:
    """Randomized crossing encounter with k Boltzmann humans.

    Every agent starts on the rim of a circle of radius ``arena`` around
    ``params.goal`` and heads for (roughly) the antipodal point, so all
    paths funnel through the middle and conflicts happen in transit.
    Uniform spawns would instead leave humans parked at scattered goals,
    where closeness is a property of the draw rather than of the
    controller.

    ``goal_noise`` perturbs the goal the robot's nominal prediction points
    at, while each human keeps heading for its true goal: bounded intent
    mismatch that a safety margin around the prediction can absorb.

    ``hostile_prob`` is the chance that one human in the trial is
    provokable: while the robot stays further than ``hostile_trigger``
    away it crosses like everyone else, but once the robot intrudes it
    drops its goal and closes on the robot (predictions still expect a
    crosser). Margins are bought to cover bad realizations; whether this
    one materializes depends on how much clearance the controller keeps.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    center = np.asarray(params.goal, dtype=float)
    x0 = np.empty(2 + 2 * k)
    theta_r = rng.uniform(0.0, 2.0 * np.pi)
    x0[:2] = (
        center
        + arena * np.array([np.cos(theta_r), np.sin(theta_r)])
        + rng.uniform(-0.2, 0.2, 2)
    )
    params = replace(params, goal=2.0 * center - x0[:2])
    game = multi_human_game(k, params)
    goals = np.empty((k, 2))
    humans = []
    models = []
    grid = velocity_action_grid(params.human_bound)
    hostile_idx = -1
    if k > 0 and rng.random() < hostile_prob:
        hostile_idx = int(rng.integers(k))
    for i in range(k):
        # keep human spawn angles well clear of the robot's rim point, so
        # the first contact happens mid-crossing rather than at spawn
        th = theta_r + rng.uniform(1.1, 2.0 * np.pi - 1.1)
        start = (
            center
            + arena * np.array([np.cos(th), np.sin(th)])
            + rng.uniform(-0.3, 0.3, 2)
        )
        x0[2 + 2 * i : 4 + 2 * i] = start
        goals[i] = 2.0 * center - start + rng.uniform(-0.5, 0.5, 2)
        gi = goals[i]
        sl = slice(2 + 2 * i, 4 + 2 * i)

        if i == hostile_idx:
            # provokable: crosses toward its goal until the robot comes
            # inside hostile_trigger, then pursues the robot instead
            def stage_cost(x, w, gi=gi, sl=sl):
                d = x[sl] - x[:2]
                dd = float(d @ d)
                if dd < hostile_trigger * hostile_trigger:
                    return dd + human_effort * float(w @ w)
                dg = x[sl] - gi
                return float(dg @ dg) + human_effort * float(w @ w)
        else:
            def stage_cost(x, w, gi=gi, sl=sl):
                d = x[sl] - gi
                return float(d @ d) + human_effort * float(w @ w)

        humans.append(
            BoltzmannHuman(
                alpha=alpha,
                stage_cost=stage_cost,
                action_grid=grid,
                goal=gi,
                dynamics=game.dynamics,
                pad=_pad_fn(k, i),
                lookahead=lookahead,
            )
        )
        models.append(
            NominalHumanModel(
                kind="straight_line",
                goal=gi + goal_noise * rng.standard_normal(2),
                max_speed=params.human_bound,
            )
        )
    return Env(
        kind="point_mass" if k == 1 else "multi_human",
        game=game,
        k=k,
        x0=x0,
        humans=tuple(humans),
        nominal_models=tuple(models),
        human_goals=goals,
        robot_goal=np.asarray(params.goal, dtype=float),
    )


def make_driving_env(
    params: DrivingParams,
    rng: Optional[np.random.Generator] = None,
    alpha: float = 7.5,
    lookahead: int = 5,
    human_effort: float = 0.05,
    spread: float = 1.0,
) -> Env:
    """Randomized two-car encounter; the human car has its own goal.

    ``spread`` scales every randomization width; small values concentrate
    the trial distribution (useful when comparing controllers, where
    scenario variance otherwise drowns the effect).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    game = driving_game(params)
    s = spread
    # robot start is tightly controlled (keeps trial-to-trial cost variance
    # down to what the interaction itself causes); the oncoming human car
    # carries most of the randomness
    x0 = np.array(
        [
            -3.0 + s * rng.uniform(-0.1, 0.1),
            s * rng.uniform(-0.2, 0.2),
            s * rng.uniform(-0.1, 0.1),
            1.0 + s * rng.uniform(-0.1, 0.1),
            3.0 + s * rng.uniform(-1.0, 1.0),
            0.0,  # lateral offset filled below
            math.pi + s * rng.uniform(-0.3, 0.3),
            1.0 + s * rng.uniform(-0.5, 0.5),
        ]
    )
    # the oncoming car keeps a lane offset: start and goal on the same side,
    # so paths cross without deliberate head-on lane sharing
    side = 1.0 if rng.random() < 0.5 else -1.0
    x0[5] = side * (0.4 + s * rng.uniform(0.0, 0.8))
    human_goal = np.array(
        [-4.0 + s * rng.uniform(-1.0, 1.0), side * (0.4 + s * rng.uniform(0.0, 1.0))]
    )

    def stage_cost(x, w, g=human_goal):
        d0, d1 = x[4] - g[0], x[5] - g[1]
        return d0 * d0 + d1 * d1 + human_effort * float(w @ w)

    human = BoltzmannHuman(
        alpha=alpha,
        stage_cost=stage_cost,
        action_grid=driving_action_grid(params.accel_bound, params.steer_bound),
        goal=human_goal,
        dynamics=game.dynamics,
        pad=lambda w: w,
        lookahead=lookahead,
    )
    model = NominalHumanModel(kind="zero", action_dim=2)
    return Env(
        kind="driving",
        game=game,
        k=1,
        x0=x0,
        humans=(human,),
        nominal_models=(model,),
        human_goals=human_goal.reshape(1, 2),
    )


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def load_env_config(path: str) -> dict:
    """Read an environment config from a JSON or TOML file."""
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib

        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def build_env(cfg: dict, rng: np.random.Generator) -> Env:
    """Build an Env from a config dict: {"env": ..., "T": ..., "k": ..., ...}."""
    kind = cfg.get("env", "point_mass")
    T = int(cfg.get("T", 30))
    if kind in ("point_mass", "multi_human"):
        k = int(cfg.get("k", 1))
        params = PointMassParams(
            goal=np.asarray(cfg.get("goal", [0.0, 0.0]), dtype=float),
            q_goal=float(cfg.get("q_goal", 1.0)),
            r_u=float(cfg.get("r_u", 1.0)),
            r_w=float(cfg.get("r_w", 8.0)),
            prox_weight=float(cfg.get("prox_weight", 4.0)),
            prox_radius=float(cfg.get("prox_radius", 1.0)),
            horizon=T,
            action_bound=float(cfg.get("action_bound", 0.5)),
            human_bound=cfg.get("human_bound"),
            proximity=bool(cfg.get("proximity", True)),
        )
        return make_point_mass_env(
            params,
            k=k,
            rng=rng,
            alpha=float(cfg.get("alpha", 7.5)),
            arena=float(cfg.get("arena", 2.5)),
            lookahead=int(cfg.get("lookahead", 5)),
            goal_noise=float(cfg.get("goal_noise", 0.0)),
            hostile_prob=float(cfg.get("hostile_prob", 0.0)),
            hostile_trigger=float(cfg.get("hostile_trigger", 1.5)),
        )
    if kind == "driving":
        params = DrivingParams(
            goal=np.asarray(cfg.get("goal", [5.0, 0.0]), dtype=float),
            eta=float(cfg.get("eta", 10.0)),
            r_u=float(cfg.get("r_u", 0.5)),
            dt=float(cfg.get("dt", 0.1)),
            wheelbase=float(cfg.get("wheelbase", 2.7)),
            accel_bound=float(cfg.get("accel_bound", 2.0)),
            steer_bound=float(cfg.get("steer_bound", 0.5)),
            horizon=T,
        )
        return make_driving_env(
            params,
            rng=rng,
            alpha=float(cfg.get("alpha", 7.5)),
            lookahead=int(cfg.get("lookahead", 5)),
            spread=float(cfg.get("spread", 1.0)),
        )
    raise ValueError(f"unknown environment {kind!r}")
