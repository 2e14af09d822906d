"""Realtime interaction session: a human-driven agent vs the MCLQ robot.

The session logic (``handle_input`` / ``tick`` / ``set_lambda``) is plain
synchronous code so it can be unit-tested and replayed deterministically;
``create_app`` wraps it in a FastAPI websocket endpoint that ticks on a
fixed period and broadcasts the state after every tick.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .envs import Env, PointMassParams, build_env, make_point_mass_env
from .filter import FilterConfig, PlanRecord, filter_step
from .game import clamp, step as game_step
from .refine import SamplerConfig


@dataclass
class SessionConfig:
    env: dict = field(default_factory=lambda: {"env": "point_mass", "T": 12})
    tick_ms: float = 100.0
    lam: float = 4.0
    collision_radius: float = 0.5
    orbit_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    orbit_radius: float = 2.0
    orbit_step: float = 0.35  # radians of goal lead per tick
    sampler: SamplerConfig = field(
        default_factory=lambda: SamplerConfig(outer_iters=40, inner_iters=8, seed=0)
    )
    refine_enabled: bool = True
    seed: int = 0


class SessionError(KeyError):
    """Unknown or closed session."""


@dataclass
class Session:
    """One human-in-the-loop arena; single logical owner, tick-driven."""

    id: str
    cfg: SessionConfig
    env: Env
    x: np.ndarray
    lam: float
    tick_count: int = 0
    pending_cmd: Optional[np.ndarray] = None
    carry: Optional[PlanRecord] = None
    collisions: int = 0
    revolutions: int = 0
    _angle_acc: float = 0.0
    _last_angle: Optional[float] = None
    last_plan_ms: float = 0.0
    command_log: List[dict] = field(default_factory=list)

    def robot_goal(self) -> np.ndarray:
        """Next waypoint on the monitoring orbit, a fixed lead ahead."""
        c = self.cfg.orbit_center
        rel = self.x[:2] - c
        ang = math.atan2(rel[1], rel[0]) + self.cfg.orbit_step
        return c + self.cfg.orbit_radius * np.array([math.cos(ang), math.sin(ang)])


def make_session(sid: str, cfg: SessionConfig) -> Session:
    rng = np.random.default_rng(cfg.seed)
    env = build_env(cfg.env, rng)
    return Session(id=sid, cfg=cfg, env=env, x=env.x0.copy(), lam=cfg.lam)


def handle_input(session: Session, vx: float, vy: float) -> dict:
    """Buffer the human's desired velocity for the next tick; latest wins."""
    cmd = np.array([float(vx), float(vy)])
    clamped = clamp(cmd, session.env.game.human_bounds[:2])
    session.pending_cmd = clamped
    session.command_log.append(
        {"tick": session.tick_count, "vx": float(clamped[0]), "vy": float(clamped[1])}
    )
    return {"type": "ack", "clamped": bool(np.any(clamped != cmd))}


def set_lambda(session: Session, lam: float) -> dict:
    """Change the safety margin; takes effect at the next replan."""
    lam = float(lam)
    if lam < 0 or math.isnan(lam):
        raise ValueError("lambda must be >= 0 (or inf)")
    session.lam = lam
    return {"type": "ack", "lambda": lam}


def _filter_config(session: Session) -> FilterConfig:
    cfg = session.cfg
    return FilterConfig(
        horizon=session.env.game.horizon,
        sampler=replace(cfg.sampler, lam=session.lam, seed=cfg.sampler.seed),
        nominal_human=session.env.nominal_w,
        refine_enabled=cfg.refine_enabled,
    )


def tick(session: Session) -> dict:
    """Advance the arena one tick and build the state broadcast.

    Simulation state changes only here: the buffered command is consumed,
    the filter picks the robot action (replanning with a goal waypoint on
    the orbit), dynamics advance, and metrics update. If the previous tick
    overran the tick period the carried plan is reused instead of
    replanning (deadline fallback).
    """
    env = session.env
    game = env.game
    w = session.pending_cmd if session.pending_cmd is not None else np.zeros(2)
    session.pending_cmd = None
    w_full = np.zeros(game.human_dim)
    w_full[:2] = w

    # rebuild the game around the moving orbit waypoint
    goal = session.robot_goal()
    arena_cfg = dict(session.cfg.env)
    arena_cfg["goal"] = goal.tolist()
    from .envs import multi_human_game, PointMassParams  # local to avoid cycle noise

    params = PointMassParams(
        goal=goal,
        horizon=game.horizon,
        action_bound=float(game.robot_bounds[0, 1]),
        q_goal=float(arena_cfg.get("q_goal", 1.0)),
        r_u=float(arena_cfg.get("r_u", 1.0)),
        r_w=float(arena_cfg.get("r_w", 8.0)),
        prox_weight=float(arena_cfg.get("prox_weight", 4.0)),
        prox_radius=float(arena_cfg.get("prox_radius", 1.0)),
    )
    goal_game = multi_human_game(env.k, params)

    error_flag = None
    t0 = time.perf_counter()
    over_deadline = (
        session.last_plan_ms > session.cfg.tick_ms
        and session.carry is not None
        and session.carry.age < game.horizon
    )
    if over_deadline:
        u = clamp(session.carry.plan.u[session.carry.age], game.robot_bounds)
        session.carry = replace(session.carry, age=session.carry.age + 1)
    else:
        fcfg = _filter_config(session)
        u, rec = filter_step(
            goal_game, session.x, fcfg, None, timestep=session.tick_count,
            sampler_seed=session.cfg.sampler.seed + session.tick_count,
        )
        session.carry = rec
        error_flag = rec.error
        if rec.error is not None:
            u = np.zeros(game.robot_dim)
    session.last_plan_ms = (time.perf_counter() - t0) * 1e3

    session.x = game_step(game, session.x, u, w_full)
    session.tick_count += 1

    # metrics: collision radius and accumulated revolution angle
    rp = env.robot_pos(session.x)
    hp = env.human_pos(session.x)
    dist = float(np.min(np.linalg.norm(hp - rp, axis=1)))
    if dist < session.cfg.collision_radius:
        session.collisions += 1
    rel = rp - session.cfg.orbit_center
    ang = math.atan2(rel[1], rel[0])
    if session._last_angle is not None:
        d = ang - session._last_angle
        if d > math.pi:
            d -= 2 * math.pi
        elif d < -math.pi:
            d += 2 * math.pi
        session._angle_acc += d
        if abs(session._angle_acc) >= 2 * math.pi:
            session.revolutions += 1
            session._angle_acc -= math.copysign(2 * math.pi, session._angle_acc)
    session._last_angle = ang

    carry = session.carry
    msg = {
        "type": "state",
        "t": session.tick_count,
        "robot": rp.tolist(),
        "human": hp[0].tolist(),
        "plan": carry.states[:, :2].tolist() if carry is not None else [],
        "worst_case_human": (
            carry.plan.w.tolist() if carry is not None else []
        ),
        "lambda": session.lam,
        "collisions": session.collisions,
        "revolutions": session.revolutions,
        "ms_plan": session.last_plan_ms,
    }
    if error_flag is not None:
        msg["error"] = error_flag
    return msg


# ---------------------------------------------------------------------------
# FastAPI app
# ---------------------------------------------------------------------------

def wire_dumps(msg: dict) -> str:
    """JSON for the websocket: infinite lambda goes out as the string "inf".

    Python's json module would emit the literal Infinity, which strict
    parsers (browsers included) refuse.
    """
    lam = msg.get("lambda")
    if isinstance(lam, float) and math.isinf(lam):
        msg = {**msg, "lambda": "inf"}
    return json.dumps(msg)


def create_app(cfg: Optional[SessionConfig] = None):
    cfg = cfg or SessionConfig()
    app = FastAPI(title="mclq-arena")
    app.state.session_cfg = cfg
    app.state.sessions = {}
    probe_env = build_env(cfg.env, np.random.default_rng(cfg.seed))
    human_bound = float(np.max(np.abs(probe_env.game.human_bounds)))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/config")
    def config():
        return {
            "tick_ms": cfg.tick_ms,
            "collision_radius": cfg.collision_radius,
            "orbit_center": cfg.orbit_center.tolist(),
            "orbit_radius": cfg.orbit_radius,
            "human_bound": human_bound,
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        sid = f"s{len(app.state.sessions)}"
        session = make_session(sid, cfg)
        app.state.sessions[sid] = session

        async def ticker():
            loop = asyncio.get_event_loop()
            while True:
                msg = await loop.run_in_executor(None, tick, session)
                await ws.send_text(wire_dumps(msg))
                await asyncio.sleep(cfg.tick_ms / 1e3)

        task = asyncio.create_task(ticker())
        try:
            while True:
                raw = await ws.receive_text()
                cmd = json.loads(raw)
                kind = cmd.get("type")
                if kind == "input":
                    ack = handle_input(session, cmd.get("vx", 0.0), cmd.get("vy", 0.0))
                elif kind == "set_lambda":
                    try:
                        value = cmd.get("value")
                        ack = set_lambda(
                            session,
                            math.inf if value in ("inf", None) else float(value),
                        )
                    except ValueError as err:
                        ack = {"type": "error", "message": str(err)}
                elif kind == "reset":
                    fresh = make_session(sid, cfg)
                    session.__dict__.update(fresh.__dict__)
                    ack = {"type": "ack", "reset": True}
                else:
                    ack = {"type": "error", "message": f"unknown message {kind!r}"}
                await ws.send_text(wire_dumps(ack))
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()
            app.state.sessions.pop(sid, None)

    return app
