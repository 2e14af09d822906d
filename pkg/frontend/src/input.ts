/** Keyboard state -> human velocity command.
 *
 * Arrow keys and WASD both steer. The pressed-key set is sampled once per
 * client tick, so rapid toggles inside one tick coalesce into a single
 * message carrying the final state. Diagonals are normalized before
 * scaling by the bound, matching how the study participants' speed was
 * capped rather than their per-axis components.
 */

const KEY_DIRS: Record<string, [number, number]> = {
  ArrowUp: [0, 1],
  ArrowDown: [0, -1],
  ArrowLeft: [-1, 0],
  ArrowRight: [1, 0],
  w: [0, 1],
  s: [0, -1],
  a: [-1, 0],
  d: [1, 0],
};

export class KeyState {
  private pressed = new Set<string>();

  down(key: string): void {
    if (key in KEY_DIRS) this.pressed.add(key);
  }

  up(key: string): void {
    this.pressed.delete(key);
  }

  clear(): void {
    this.pressed.clear();
  }

  /** Current velocity command scaled to the bound; zero when idle. */
  velocity(bound: number): [number, number] {
    let vx = 0;
    let vy = 0;
    for (const key of this.pressed) {
      const [dx, dy] = KEY_DIRS[key];
      vx += dx;
      vy += dy;
    }
    const mag = Math.hypot(vx, vy);
    if (mag === 0) return [0, 0];
    return [(vx / mag) * bound, (vy / mag) * bound];
  }
}
