/**
 * Wire types for the /ws stream and strict validators for them.
 *
 * The viewer renders nothing it has not validated: a snapshot that fails
 * any check here is dropped on the floor, so the scene code can assume
 * every field is present, finite, and in range.
 */

export interface SphereState {
  /** center, world frame, meters */
  c: [number, number, number];
  /** hard radius */
  r: number;
  /** center distance to nearest environment voxel, -1 when map empty */
  xc: number;
  /** center distance to nearest self-map voxel, -1 when map empty */
  xs: number;
  /** activation in [0, 1], max over both maps */
  a: number;
}

export interface ObstacleState {
  id: number;
  position: [number, number, number];
}

export interface EEState {
  /** px py pz qx qy qz qw */
  pose: number[];
  target: number[];
}

export interface Timings {
  clear: number;
  insert: number;
  edt: number;
  solve: number;
}

export interface Snapshot {
  type: 'snapshot';
  t: number;
  q: number[];
  spheres: SphereState[];
  obstacles: ObstacleState[];
  ee: EEState;
  timings: Timings;
}

export interface ServerError {
  type: 'error';
  detail: string;
}

export type Command =
  | { type: 'set_obstacle'; id: number; position: [number, number, number] }
  | { type: 'set_target'; position: [number, number, number]; quaternion: [number, number, number, number] }
  | { type: 'pause' }
  | { type: 'resume' }
  | { type: 'toggle_regularization'; enabled: boolean };

const isObj = (v: unknown): v is Record<string, unknown> =>
  typeof v === 'object' && v !== null && !Array.isArray(v);

const isFiniteNum = (v: unknown): v is number =>
  typeof v === 'number' && Number.isFinite(v);

function isVec(v: unknown, n: number): v is number[] {
  return Array.isArray(v) && v.length === n && v.every(isFiniteNum);
}

function hasExactKeys(v: Record<string, unknown>, keys: string[]): boolean {
  const own = Object.keys(v);
  return own.length === keys.length && keys.every((k) => k in v);
}

function isSphere(v: unknown): v is SphereState {
  if (!isObj(v) || !hasExactKeys(v, ['c', 'r', 'xc', 'xs', 'a'])) return false;
  if (!isVec(v.c, 3)) return false;
  if (!isFiniteNum(v.r) || v.r <= 0) return false;
  for (const key of ['xc', 'xs'] as const) {
    const d = v[key];
    if (!isFiniteNum(d) || (d !== -1 && d < 0)) return false;
  }
  return isFiniteNum(v.a) && v.a >= 0 && v.a <= 1;
}

function isObstacle(v: unknown): v is ObstacleState {
  return isObj(v) && hasExactKeys(v, ['id', 'position'])
    && Number.isInteger(v.id) && isVec(v.position, 3);
}

export function validateSnapshot(value: unknown): Snapshot | null {
  if (!isObj(value) || value.type !== 'snapshot') return null;
  if (!hasExactKeys(value, ['type', 't', 'q', 'spheres', 'obstacles', 'ee', 'timings'])) return null;
  if (!isFiniteNum(value.t) || value.t < 0) return null;
  if (!Array.isArray(value.q) || value.q.length === 0 || !value.q.every(isFiniteNum)) return null;
  if (!Array.isArray(value.spheres) || !value.spheres.every(isSphere)) return null;
  if (!Array.isArray(value.obstacles) || !value.obstacles.every(isObstacle)) return null;
  const ee = value.ee;
  if (!isObj(ee) || !hasExactKeys(ee, ['pose', 'target'])) return null;
  if (!isVec(ee.pose, 7) || !isVec(ee.target, 7)) return null;
  const tm = value.timings;
  if (!isObj(tm) || !hasExactKeys(tm, ['clear', 'insert', 'edt', 'solve'])) return null;
  for (const key of ['clear', 'insert', 'edt', 'solve']) {
    const ms = (tm as Record<string, unknown>)[key];
    if (!isFiniteNum(ms) || ms < 0) return null;
  }
  return value as unknown as Snapshot;
}

/** Parse one incoming frame; anything unrecognized comes back null. */
export function parseServerMessage(raw: string): Snapshot | ServerError | null {
  let value: unknown;
  try {
    value = JSON.parse(raw);
  } catch {
    return null;
  }
  if (isObj(value) && value.type === 'error' && typeof value.detail === 'string') {
    return { type: 'error', detail: value.detail };
  }
  return validateSnapshot(value);
}

export function serializeCommand(cmd: Command): string {
  return JSON.stringify(cmd);
}
