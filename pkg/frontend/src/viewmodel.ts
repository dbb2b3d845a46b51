/**
 * Single source of truth between the socket and the scene.
 *
 * Socket callbacks push raw frames in; the render loop pulls the latest
 * snapshot and the per-frame command batch out.  Only schema-valid
 * snapshots are ever stored, and drag commands are coalesced so one
 * animation frame sends at most one of them no matter how fast the mouse
 * moves.
 */

import { Command, Snapshot, parseServerMessage } from './protocol';

export const STALE_AFTER_MS = 2000;

export type ConnectionStatus = 'connecting' | 'live' | 'stale' | 'closed';

export type DragState =
  | { kind: 'obstacle'; id: number; mode: 'plane' | 'height'; grabOffset: [number, number, number] }
  | { kind: 'target'; mode: 'plane' | 'height'; grabOffset: [number, number, number] }
  | null;

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

const GREEN: Rgb = { r: 0.13, g: 0.77, b: 0.37 };
const RED: Rgb = { r: 0.94, g: 0.27, b: 0.27 };

/** Sphere paint: green at rest, red at full activation, linear in between. */
export function activationColor(a: number): Rgb {
  const t = Math.min(1, Math.max(0, a));
  return {
    r: GREEN.r + (RED.r - GREEN.r) * t,
    g: GREEN.g + (RED.g - GREEN.g) * t,
    b: GREEN.b + (RED.b - GREEN.b) * t,
  };
}

export class ViewModel {
  latest: Snapshot | null = null;
  drag: DragState = null;
  lastError: string | null = null;

  private lastSnapshotAtMs: number | null = null;
  private socketClosed = false;
  private pendingDrag: Command | null = null;
  private discrete: Command[] = [];

  /** Feed one raw socket frame. Returns what it turned out to be. */
  ingest(raw: string, nowMs: number): 'snapshot' | 'error' | 'invalid' {
    const msg = parseServerMessage(raw);
    if (msg === null) return 'invalid';
    if (msg.type === 'error') {
      this.lastError = msg.detail;
      return 'error';
    }
    this.latest = msg;
    this.lastSnapshotAtMs = nowMs;
    return 'snapshot';
  }

  markClosed(): void {
    this.socketClosed = true;
  }

  markOpen(): void {
    this.socketClosed = false;
  }

  status(nowMs: number): ConnectionStatus {
    if (this.socketClosed) return 'closed';
    if (this.lastSnapshotAtMs === null) return 'connecting';
    return nowMs - this.lastSnapshotAtMs > STALE_AFTER_MS ? 'stale' : 'live';
  }

  /** True once the stream has gone quiet long enough to warn the user. */
  isStale(nowMs: number): boolean {
    const s = this.status(nowMs);
    return s === 'stale' || s === 'closed';
  }

  /**
   * Drag-sourced commands coalesce: only the newest survives until the
   * next flush, which is the per-frame rate cap.
   */
  queueDragCommand(cmd: Command): void {
    this.pendingDrag = cmd;
  }

  /** Button-sourced commands are never dropped. */
  queueDiscreteCommand(cmd: Command): void {
    this.discrete.push(cmd);
  }

  /**
   * Called once per animation frame: everything discrete, plus at most
   * one drag command.
   */
  flushCommands(): Command[] {
    const out = this.discrete;
    this.discrete = [];
    if (this.pendingDrag !== null) {
      out.push(this.pendingDrag);
      this.pendingDrag = null;
    }
    return out;
  }

  /** Orientation to keep while dragging the EE target around. */
  targetQuaternion(): [number, number, number, number] {
    const t = this.latest?.ee.target;
    if (!t) return [0, 0, 0, 1];
    return [t[3], t[4], t[5], t[6]];
  }
}
