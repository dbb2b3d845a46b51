/**
 * Drag math, DOM-free on purpose so it unit-tests without a browser.
 *
 * The scheme: grabbing a marker starts either a ground-plane drag (moves
 * x/y on the horizontal plane through the marker) or a height drag (moves
 * z along the vertical line through the marker).  Both work from a pick
 * ray; the scene layer owns turning pointer events into rays.
 */

export type Vec3 = [number, number, number];

export interface Ray {
  origin: Vec3;
  dir: Vec3;
}

const EPS = 1e-9;

/** Ray hit on the horizontal plane z = planeZ, forward hits only. */
export function intersectHorizontalPlane(ray: Ray, planeZ: number): Vec3 | null {
  const dz = ray.dir[2];
  if (Math.abs(dz) < EPS) return null;
  const t = (planeZ - ray.origin[2]) / dz;
  if (t < 0) return null;
  return [
    ray.origin[0] + t * ray.dir[0],
    ray.origin[1] + t * ray.dir[1],
    planeZ,
  ];
}

/**
 * z of the point on the vertical line through (x, y) closest to the ray,
 * or null when the ray is parallel to the line.
 */
export function verticalLineClosestZ(ray: Ray, x: number, y: number): number | null {
  const [ox, oy, oz] = ray.origin;
  const [dx, dy, dz] = ray.dir;
  const A = dx * dx + dy * dy + dz * dz;
  const B = dz; // dir . (0,0,1)
  const den = A - B * B; // parallel when the ray is vertical itself
  if (den < EPS) return null;
  const w: Vec3 = [ox - x, oy - y, oz];
  const D = dx * w[0] + dy * w[1] + dz * w[2];
  const E = w[2];
  const s = (A * E - B * D) / den;
  return s;
}

/**
 * New marker position for a ground-plane drag: the pick ray hits the
 * horizontal plane through the marker's current z, the grab offset keeps
 * the marker from snapping its center under the cursor.
 */
export function planeDragPosition(ray: Ray, current: Vec3, grabOffset: Vec3): Vec3 | null {
  const hit = intersectHorizontalPlane(ray, current[2]);
  if (hit === null) return null;
  return [hit[0] + grabOffset[0], hit[1] + grabOffset[1], current[2]];
}

/**
 * New marker position for a height drag: x/y frozen, z follows the point
 * on the marker's vertical axis nearest the pick ray.
 */
export function heightDragPosition(ray: Ray, current: Vec3, grabZOffset: number): Vec3 | null {
  const z = verticalLineClosestZ(ray, current[0], current[1]);
  if (z === null) return null;
  return [current[0], current[1], z + grabZOffset];
}

/** Offset that preserves the cursor-to-center relation at grab time. */
export function planeGrabOffset(ray: Ray, current: Vec3): Vec3 | null {
  const hit = intersectHorizontalPlane(ray, current[2]);
  if (hit === null) return null;
  return [current[0] - hit[0], current[1] - hit[1], 0];
}

export function heightGrabOffset(ray: Ray, current: Vec3): number | null {
  const z = verticalLineClosestZ(ray, current[0], current[1]);
  if (z === null) return null;
  return current[2] - z;
}
