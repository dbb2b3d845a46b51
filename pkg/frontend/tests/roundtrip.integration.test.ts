/**
 * Live round trip against a running sandbox server, driven through the
 * same modules the browser uses: drag math produces the positions, the
 * view model coalesces the commands, the wire format comes from
 * serializeCommand, and every incoming frame goes through ingest.
 *
 * Opt-in because it needs a server:
 *
 *   voxarm run sandbox --serve 8765 &
 *   VOXARM_WS=ws://127.0.0.1:8765/ws npx vitest run tests/roundtrip.integration.test.ts
 */

import { describe, expect, it } from 'vitest';
import WebSocket from 'ws';

import {
  Ray,
  Vec3,
  heightDragPosition,
  heightGrabOffset,
  planeDragPosition,
  planeGrabOffset,
} from '../src/drag';
import { Snapshot, serializeCommand } from '../src/protocol';
import { ViewModel, activationColor } from '../src/viewmodel';

const SERVER = process.env.VOXARM_WS ?? '';

function downRay(x: number, y: number): Ray {
  return { origin: [x, y, 2], dir: [0, 0, -1] };
}

function sideRay(x: number, y: number, z: number): Ray {
  return { origin: [x + 5, y, z], dir: [-1, 0, 0] };
}

describe.skipIf(SERVER === '')('live sandbox round trip', () => {
  it('echoes dragged obstacle positions and ramps a sphere green to red', { timeout: 60000 }, async () => {
    const vm = new ViewModel();
    const sock = new WebSocket(SERVER);
    let wake: (() => void) | null = null;
    sock.on('message', (data) => {
      vm.ingest(String(data), Date.now());
      wake?.();
    });
    await new Promise<void>((resolve, reject) => {
      sock.on('open', () => resolve());
      sock.on('error', (err) => reject(err));
    });

    const nextSnapshot = async (): Promise<Snapshot> => {
      const last = vm.latest;
      const deadline = Date.now() + 10000;
      while (vm.latest === last) {
        if (Date.now() > deadline) throw new Error('snapshot timeout');
        await new Promise<void>((resolve) => {
          wake = resolve;
          setTimeout(resolve, 50);
        });
      }
      wake = null;
      return vm.latest!;
    };

    // one frame of the browser's loop: flush the batch, put it on the wire
    const pumpFrame = (): void => {
      for (const cmd of vm.flushCommands()) {
        sock.send(serializeCommand(cmd));
      }
    };

    try {
      const first = await nextSnapshot();
      expect(first.obstacles.length).toBeGreaterThan(0);
      const start = first.obstacles[0].position;
      const id = first.obstacles[0].id;
      const calm = Math.min(...first.spheres.map((s) => s.a));
      expect(activationColor(calm).g).toBeGreaterThan(0.5);

      // plane drag: grab dead center, release over the end effector's x/y
      const ee: Vec3 = [first.ee.pose[0], first.ee.pose[1], first.ee.pose[2]];
      const grab = planeGrabOffset(downRay(start[0], start[1]), start)!;
      const overEE = planeDragPosition(downRay(ee[0], ee[1]), start, grab)!;
      vm.queueDragCommand({ type: 'set_obstacle', id, position: overEE });
      vm.queueDragCommand({ type: 'set_obstacle', id, position: overEE });
      pumpFrame();

      let snap = await nextSnapshot();
      const planeDeadline = Date.now() + 10000;
      while (true) {
        const got = snap.obstacles.find((o) => o.id === id)!.position;
        if (Math.abs(got[0] - overEE[0]) < 1e-9 && Math.abs(got[1] - overEE[1]) < 1e-9) {
          expect(got[2]).toBeCloseTo(start[2], 9);
          break;
        }
        if (Date.now() > planeDeadline) throw new Error('plane drag never echoed');
        snap = await nextSnapshot();
      }

      // height drag: raise the marker to the end effector's z
      const zGrab = heightGrabOffset(sideRay(overEE[0], overEE[1], overEE[2]), overEE)!;
      const atEE = heightDragPosition(sideRay(overEE[0], overEE[1], ee[2]), overEE, zGrab)!;
      vm.queueDragCommand({ type: 'set_obstacle', id, position: atEE });
      pumpFrame();

      // the cloud lands on the wrist: some sphere must run hot and paint red
      let peak = 0;
      const heatDeadline = Date.now() + 20000;
      while (peak < 0.9) {
        snap = await nextSnapshot();
        for (const s of snap.spheres) peak = Math.max(peak, s.a);
        if (Date.now() > heatDeadline) {
          throw new Error(`activation peaked at ${peak.toFixed(3)}, needed 0.9`);
        }
        // keep the obstacle pinned on the fleeing end effector
        const chase: Vec3 = [snap.ee.pose[0], snap.ee.pose[1], snap.ee.pose[2]];
        vm.queueDragCommand({ type: 'set_obstacle', id, position: chase });
        pumpFrame();
      }
      expect(peak).toBeGreaterThanOrEqual(0.9);
      expect(activationColor(peak).r).toBeGreaterThan(0.85);
    } finally {
      sock.close();
    }
  });
});
