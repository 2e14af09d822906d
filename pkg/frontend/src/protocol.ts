/** Wire protocol between the arena client and the interaction service.
 *
 * The JSON fixtures under ../tests/fixtures/ pin these shapes on both
 * sides; the server suite checks its messages against them and this
 * module's tests parse the very same files. Unbounded lambda crosses the
 * wire as the string "inf" in both directions because JSON has no
 * Infinity literal.
 */

export interface StateBroadcast {
  type: "state";
  t: number;
  robot: number[];
  human: number[];
  plan: number[][];
  worst_case_human: number[][];
  lambda: number;
  collisions: number;
  revolutions: number;
  ms_plan: number;
}

export interface ArenaConfig {
  tick_ms: number;
  collision_radius: number;
  orbit_center: number[];
  orbit_radius: number;
  human_bound: number;
}

export interface InputMessage {
  type: "input";
  vx: number;
  vy: number;
}

export interface SetLambdaMessage {
  type: "set_lambda";
  value: number | "inf";
}

export interface ResetMessage {
  type: "reset";
}

export type ClientMessage = InputMessage | SetLambdaMessage | ResetMessage;

function num(v: unknown, path: string): number {
  if (typeof v !== "number" || Number.isNaN(v)) {
    throw new Error(`${path}: expected number, got ${JSON.stringify(v)}`);
  }
  return v;
}

function point(v: unknown, path: string): number[] {
  if (!Array.isArray(v) || v.length < 2) {
    throw new Error(`${path}: expected [x, y]`);
  }
  return [num(v[0], `${path}[0]`), num(v[1], `${path}[1]`)];
}

function polyline(v: unknown, path: string): number[][] {
  if (!Array.isArray(v)) {
    throw new Error(`${path}: expected array of points`);
  }
  return v.map((p, i) => point(p, `${path}[${i}]`));
}

/** Parse a lambda that may be the string "inf". */
export function parseLambda(v: unknown, path: string): number {
  if (v === "inf") return Infinity;
  return num(v, path);
}

export function parseStateBroadcast(raw: unknown): StateBroadcast {
  const o = raw as Record<string, unknown>;
  if (!o || o.type !== "state") {
    throw new Error(`not a state broadcast: ${JSON.stringify(raw)}`);
  }
  return {
    type: "state",
    t: num(o.t, "t"),
    robot: point(o.robot, "robot"),
    human: point(o.human, "human"),
    plan: polyline(o.plan, "plan"),
    worst_case_human: polyline(o.worst_case_human, "worst_case_human"),
    lambda: parseLambda(o.lambda, "lambda"),
    collisions: num(o.collisions, "collisions"),
    revolutions: num(o.revolutions, "revolutions"),
    ms_plan: num(o.ms_plan, "ms_plan"),
  };
}

export function parseArenaConfig(raw: unknown): ArenaConfig {
  const o = raw as Record<string, unknown>;
  if (!o) throw new Error("empty arena config");
  return {
    tick_ms: num(o.tick_ms, "tick_ms"),
    collision_radius: num(o.collision_radius, "collision_radius"),
    orbit_center: point(o.orbit_center, "orbit_center"),
    orbit_radius: num(o.orbit_radius, "orbit_radius"),
    human_bound: num(o.human_bound, "human_bound"),
  };
}

export function inputMessage(vx: number, vy: number): InputMessage {
  return { type: "input", vx, vy };
}

export function setLambdaMessage(value: number): SetLambdaMessage {
  return { type: "set_lambda", value: Number.isFinite(value) ? value : "inf" };
}

export function serialize(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
