/**
 * Three.js view of the stream: arm spheres colored by activation, obstacle
 * markers with a drag handle, the EE pose and its target.
 *
 * World frame is Z-up to match the wire coordinates, so the camera gets an
 * explicit up vector and the grid is rotated into the XY plane.  Dragging:
 * plain pointer drag moves a marker on the horizontal plane through it,
 * holding Shift moves it vertically.  While a drag is live the marker
 * follows the cursor locally and the snapshot echo takes over on release.
 */

import * as THREE from 'three';
import { OrbitControls } from 'three/addons/controls/OrbitControls.js';

import {
  Ray,
  Vec3,
  heightDragPosition,
  heightGrabOffset,
  planeDragPosition,
  planeGrabOffset,
} from './drag';
import { Snapshot } from './protocol';
import { ViewModel, activationColor } from './viewmodel';

interface ActiveDrag {
  kind: 'obstacle' | 'target';
  id: number; // unused for target
  mode: 'plane' | 'height';
  position: Vec3;
  grabOffset: Vec3;
  grabZOffset: number;
  moved: boolean;
}

export class SandboxScene {
  readonly renderer: THREE.WebGLRenderer;
  readonly camera: THREE.PerspectiveCamera;
  readonly controls: OrbitControls;
  private readonly scene = new THREE.Scene();
  private readonly raycaster = new THREE.Raycaster();
  private readonly pointer = new THREE.Vector2();

  private spheres: THREE.Mesh[] = [];
  private obstacles = new Map<number, THREE.Group>();
  private eeAxes = new THREE.AxesHelper(0.12);
  private targetMarker: THREE.Group;
  private drag: ActiveDrag | null = null;

  constructor(private container: HTMLElement, private vm: ViewModel) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.renderer.setSize(container.clientWidth, container.clientHeight);
    container.appendChild(this.renderer.domElement);

    this.scene.background = new THREE.Color(0x10141a);
    this.camera = new THREE.PerspectiveCamera(
      50, container.clientWidth / container.clientHeight, 0.01, 50);
    this.camera.up.set(0, 0, 1);
    this.camera.position.set(1.7, -1.7, 1.3);

    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.target.set(0.35, 0, 0.45);
    this.controls.enableDamping = true;

    const grid = new THREE.GridHelper(2.4, 24, 0x3a4455, 0x232a35);
    grid.rotation.x = Math.PI / 2; // into the XY plane, z up
    this.scene.add(grid);
    this.scene.add(new THREE.HemisphereLight(0xbfd4ff, 0x202028, 1.1));
    const sun = new THREE.DirectionalLight(0xffffff, 1.4);
    sun.position.set(1.5, -1.0, 2.5);
    this.scene.add(sun);
    this.scene.add(this.eeAxes);

    this.targetMarker = this.makeTargetMarker();
    this.scene.add(this.targetMarker);

    const el = this.renderer.domElement;
    el.addEventListener('pointerdown', (e) => this.onPointerDown(e));
    el.addEventListener('pointermove', (e) => this.onPointerMove(e));
    window.addEventListener('pointerup', () => this.onPointerUp());
    window.addEventListener('resize', () => this.onResize());
  }

  private makeTargetMarker(): THREE.Group {
    const g = new THREE.Group();
    const ring = new THREE.Mesh(
      new THREE.TorusGeometry(0.05, 0.008, 12, 32),
      new THREE.MeshStandardMaterial({ color: 0x7dd3fc, roughness: 0.4 }));
    g.add(ring);
    const core = new THREE.Mesh(
      new THREE.SphereGeometry(0.014, 16, 12),
      new THREE.MeshStandardMaterial({ color: 0x7dd3fc }));
    g.add(core);
    g.userData.draggable = { kind: 'target', id: -1 };
    for (const child of g.children) child.userData.draggable = g.userData.draggable;
    return g;
  }

  private makeObstacleMarker(id: number): THREE.Group {
    const g = new THREE.Group();
    const box = new THREE.Mesh(
      new THREE.BoxGeometry(0.16, 0.16, 0.16),
      new THREE.MeshStandardMaterial({
        color: 0xf59e0b, transparent: true, opacity: 0.45, roughness: 0.6,
      }));
    g.add(box);
    g.add(new THREE.LineSegments(
      new THREE.EdgesGeometry(box.geometry),
      new THREE.LineBasicMaterial({ color: 0xfbbf24 })));
    // vertical post down to the ground reads as the height affordance
    const post = new THREE.Line(
      new THREE.BufferGeometry().setFromPoints(
        [new THREE.Vector3(0, 0, 0), new THREE.Vector3(0, 0, -2)]),
      new THREE.LineDashedMaterial({ color: 0x6b7280, dashSize: 0.03, gapSize: 0.03 }));
    post.computeLineDistances();
    g.add(post);
    g.userData.draggable = { kind: 'obstacle', id };
    for (const child of g.children) child.userData.draggable = g.userData.draggable;
    this.scene.add(g);
    this.obstacles.set(id, g);
    return g;
  }

  private pickRay(e: PointerEvent): Ray {
    const rect = this.renderer.domElement.getBoundingClientRect();
    this.pointer.x = ((e.clientX - rect.left) / rect.width) * 2 - 1;
    this.pointer.y = -((e.clientY - rect.top) / rect.height) * 2 + 1;
    this.raycaster.setFromCamera(this.pointer, this.camera);
    const o = this.raycaster.ray.origin;
    const d = this.raycaster.ray.direction;
    return { origin: [o.x, o.y, o.z], dir: [d.x, d.y, d.z] };
  }

  private onPointerDown(e: PointerEvent): void {
    const rect = this.renderer.domElement.getBoundingClientRect();
    this.pointer.x = ((e.clientX - rect.left) / rect.width) * 2 - 1;
    this.pointer.y = -((e.clientY - rect.top) / rect.height) * 2 + 1;
    this.raycaster.setFromCamera(this.pointer, this.camera);
    const pickable: THREE.Object3D[] = [this.targetMarker];
    for (const g of this.obstacles.values()) pickable.push(g);
    const hits = this.raycaster.intersectObjects(pickable, true);
    const hit = hits.find((h) => h.object.userData.draggable);
    if (!hit) return;

    const tag = hit.object.userData.draggable as { kind: 'obstacle' | 'target'; id: number };
    const group = tag.kind === 'obstacle'
      ? this.obstacles.get(tag.id)! : this.targetMarker;
    const pos: Vec3 = [group.position.x, group.position.y, group.position.z];
    const ray = this.pickRay(e);
    const mode: 'plane' | 'height' = e.shiftKey ? 'height' : 'plane';
    const grabOffset = mode === 'plane' ? planeGrabOffset(ray, pos) : [0, 0, 0] as Vec3;
    const grabZ = mode === 'height' ? heightGrabOffset(ray, pos) : 0;
    if (grabOffset === null || grabZ === null) return;

    this.drag = {
      kind: tag.kind, id: tag.id, mode, position: pos,
      grabOffset, grabZOffset: grabZ, moved: false,
    };
    this.controls.enabled = false;
    this.vm.drag = tag.kind === 'obstacle'
      ? { kind: 'obstacle', id: tag.id, mode, grabOffset }
      : { kind: 'target', mode, grabOffset };
  }

  private onPointerMove(e: PointerEvent): void {
    if (this.drag === null) return;
    const ray = this.pickRay(e);
    const next = this.drag.mode === 'plane'
      ? planeDragPosition(ray, this.drag.position, this.drag.grabOffset)
      : heightDragPosition(ray, this.drag.position, this.drag.grabZOffset);
    if (next === null) return;
    this.drag.position = next;
    this.drag.moved = true;
    if (this.drag.kind === 'obstacle') {
      this.vm.queueDragCommand(
        { type: 'set_obstacle', id: this.drag.id, position: next });
    } else {
      this.vm.queueDragCommand({
        type: 'set_target', position: next,
        quaternion: this.vm.targetQuaternion(),
      });
    }
  }

  private onPointerUp(): void {
    this.drag = null;
    this.vm.drag = null;
    this.controls.enabled = true;
  }

  private onResize(): void {
    const w = this.container.clientWidth;
    const h = this.container.clientHeight;
    this.camera.aspect = w / h;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(w, h);
  }

  /** Reconcile meshes with the latest snapshot and draw one frame. */
  render(snap: Snapshot | null): void {
    if (snap !== null) this.sync(snap);
    this.controls.update();
    this.renderer.render(this.scene, this.camera);
  }

  private sync(snap: Snapshot): void {
    while (this.spheres.length < snap.spheres.length) {
      const mesh = new THREE.Mesh(
        new THREE.SphereGeometry(1, 24, 18),
        new THREE.MeshStandardMaterial({ roughness: 0.45 }));
      this.scene.add(mesh);
      this.spheres.push(mesh);
    }
    for (let i = 0; i < this.spheres.length; i++) {
      const mesh = this.spheres[i];
      const s = snap.spheres[i];
      if (!s) {
        mesh.visible = false;
        continue;
      }
      mesh.visible = true;
      mesh.position.set(s.c[0], s.c[1], s.c[2]);
      mesh.scale.setScalar(s.r);
      const col = activationColor(s.a);
      (mesh.material as THREE.MeshStandardMaterial).color.setRGB(col.r, col.g, col.b);
    }

    const seen = new Set<number>();
    for (const ob of snap.obstacles) {
      seen.add(ob.id);
      const g = this.obstacles.get(ob.id) ?? this.makeObstacleMarker(ob.id);
      const dragging = this.drag !== null && this.drag.kind === 'obstacle'
        && this.drag.id === ob.id && this.drag.moved;
      const p = dragging ? this.drag!.position : ob.position;
      g.position.set(p[0], p[1], p[2]);
    }
    for (const [id, g] of this.obstacles) {
      g.visible = seen.has(id);
    }

    const pose = snap.ee.pose;
    this.eeAxes.position.set(pose[0], pose[1], pose[2]);
    this.eeAxes.quaternion.set(pose[3], pose[4], pose[5], pose[6]);

    const draggingTarget = this.drag !== null && this.drag.kind === 'target'
      && this.drag.moved;
    const t = draggingTarget ? this.drag!.position : snap.ee.target;
    this.targetMarker.position.set(t[0], t[1], t[2]);
    this.targetMarker.quaternion.set(
      snap.ee.target[3], snap.ee.target[4], snap.ee.target[5], snap.ee.target[6]);
  }
}
