"""Kinematic chain, primitive link geometry, and derived collision models.

Links are unions of convex primitives instead of mesh files; everything the
controller needs (oriented boxes, bounding spheres, voxel sets, Jacobians)
is derived from them at load time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .grids import VoxelSet

_OBB_SAMPLES = 2048
_OBB_SEED = 8211
# fitted extents come from sampled extrema and sit slightly inside the true
# surface; a 1% pad restores containment without bending the 2% fit tolerance
_OBB_PAD = 1.01

DEFAULT_SPHERE_BUFFER = 0.02


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValueError("zero-length axis")
    return v / n


def _frame_from_axis(w: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal frame with w as the last column."""
    w = _unit(w)
    helper = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(helper, w)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return np.column_stack([u, v, w])


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

@dataclass
class Box:
    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.half_extents = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if (self.half_extents <= 0).any():
            raise ValueError("box half_extents must be positive")

    def contains(self, pts, tol=0.0):
        local = (np.atleast_2d(pts) - self.center) @ self.rotation
        return (np.abs(local) <= self.half_extents + tol).all(axis=1)

    def aabb(self):
        r = np.abs(self.rotation) @ self.half_extents
        return self.center - r, self.center + r

    def surface_area(self):
        a, b, c = 2 * self.half_extents
        return 2 * (a * b + b * c + c * a)

    def volume(self):
        return float(np.prod(2 * self.half_extents))

    def sample_surface(self, count, rng):
        h = self.half_extents
        areas = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]], dtype=np.float64)
        weights = np.repeat(areas, 2)
        weights /= weights.sum()
        faces = rng.choice(6, size=count, p=weights)
        pts = rng.uniform(-h, h, size=(count, 3))
        axis = faces // 2
        sign = np.where(faces % 2 == 0, 1.0, -1.0)
        pts[np.arange(count), axis] = sign * h[axis]
        return pts @ self.rotation.T + self.center

    def canonical_axes(self):
        return self.rotation


@dataclass
class Cylinder:
    base: np.ndarray
    axis: np.ndarray
    radius: float
    length: float

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=np.float64).reshape(3)
        self.axis = _unit(self.axis)
        if self.radius <= 0 or self.length <= 0:
            raise ValueError("cylinder radius and length must be positive")

    def contains(self, pts, tol=0.0):
        rel = np.atleast_2d(pts) - self.base
        t = rel @ self.axis
        radial = np.linalg.norm(rel - np.outer(t, self.axis), axis=1)
        return (t >= -tol) & (t <= self.length + tol) & (radial <= self.radius + tol)

    def aabb(self):
        # extent of the two cap circles along each world axis
        spread = self.radius * np.sqrt(np.maximum(0.0, 1.0 - self.axis ** 2))
        ends = np.stack([self.base, self.base + self.length * self.axis])
        return ends.min(axis=0) - spread, ends.max(axis=0) + spread

    def surface_area(self):
        return 2 * math.pi * self.radius * self.length + 2 * math.pi * self.radius ** 2

    def volume(self):
        return math.pi * self.radius ** 2 * self.length

    def sample_surface(self, count, rng):
        frame = _frame_from_axis(self.axis)
        lateral = 2 * math.pi * self.radius * self.length
        cap = math.pi * self.radius ** 2
        region = rng.choice(3, size=count, p=np.array([lateral, cap, cap]) / (lateral + 2 * cap))
        theta = rng.uniform(0, 2 * math.pi, size=count)
        rad = np.where(region == 0, self.radius, self.radius * np.sqrt(rng.uniform(0, 1, size=count)))
        t = np.where(region == 0, rng.uniform(0, self.length, size=count),
                     np.where(region == 1, 0.0, self.length))
        local = np.column_stack([rad * np.cos(theta), rad * np.sin(theta), t])
        return local @ frame.T + self.base

    def canonical_axes(self):
        return _frame_from_axis(self.axis)


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def contains(self, pts, tol=0.0):
        return np.linalg.norm(np.atleast_2d(pts) - self.center, axis=1) <= self.radius + tol

    def aabb(self):
        return self.center - self.radius, self.center + self.radius

    def surface_area(self):
        return 4 * math.pi * self.radius ** 2

    def volume(self):
        return 4 / 3 * math.pi * self.radius ** 3

    def sample_surface(self, count, rng):
        d = rng.normal(size=(count, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return self.center + self.radius * d

    def canonical_axes(self):
        return np.eye(3)


@dataclass
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=np.float64).reshape(3)
        self.p1 = np.asarray(self.p1, dtype=np.float64).reshape(3)
        if self.radius <= 0:
            raise ValueError("capsule radius must be positive")
        if np.linalg.norm(self.p1 - self.p0) < 1e-12:
            raise ValueError("capsule endpoints coincide; use a sphere")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        seg = self.p1 - self.p0
        t = np.clip((pts - self.p0) @ seg / (seg @ seg), 0.0, 1.0)
        nearest = self.p0 + np.outer(t, seg)
        return np.linalg.norm(pts - nearest, axis=1) <= self.radius + tol

    def aabb(self):
        lo = np.minimum(self.p0, self.p1) - self.radius
        hi = np.maximum(self.p0, self.p1) + self.radius
        return lo, hi

    def surface_area(self):
        return 2 * math.pi * self.radius * self.length + 4 * math.pi * self.radius ** 2

    def volume(self):
        return math.pi * self.radius ** 2 * self.length + 4 / 3 * math.pi * self.radius ** 3

    def sample_surface(self, count, rng):
        w = (self.p1 - self.p0) / self.length
        frame = _frame_from_axis(w)
        lateral = 2 * math.pi * self.radius * self.length
        caps = 4 * math.pi * self.radius ** 2
        on_caps = rng.random(count) < caps / (lateral + caps)
        theta = rng.uniform(0, 2 * math.pi, size=count)
        t = rng.uniform(0, self.length, size=count)
        local = np.column_stack([self.radius * np.cos(theta),
                                 self.radius * np.sin(theta), t])
        pts = local @ frame.T + self.p0
        ncap = int(on_caps.sum())
        if ncap:
            d = rng.normal(size=(ncap, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            ends = np.where((d @ w)[:, None] >= 0, self.p1, self.p0)
            pts[on_caps] = ends + self.radius * d
        return pts

    def canonical_axes(self):
        return _frame_from_axis(self.p1 - self.p0)


@dataclass
class LinkGeometry:
    """Union of primitives expressed in the link frame."""

    primitives: list

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("link geometry needs at least one primitive")

    def contains(self, pts, tol=0.0):
        pts = np.atleast_2d(pts)
        inside = np.zeros(pts.shape[0], dtype=bool)
        for p in self.primitives:
            inside |= p.contains(pts, tol)
        return inside

    def aabb(self):
        los, his = zip(*(p.aabb() for p in self.primitives))
        return np.min(los, axis=0), np.max(his, axis=0)

    def volume(self):
        # overlaps between primitives are double counted; single-primitive
        # links (the ones volume tests use) are exact
        return sum(p.volume() for p in self.primitives)

    def sample_surface(self, count, rng):
        areas = np.array([p.surface_area() for p in self.primitives])
        counts = rng.multinomial(count, areas / areas.sum())
        parts = [p.sample_surface(c, rng) for p, c in zip(self.primitives, counts) if c]
        return np.concatenate(parts, axis=0)

    def dominant_axes(self):
        """Frame of the largest-volume primitive, first on ties."""
        best = max(range(len(self.primitives)),
                   key=lambda i: (self.primitives[i].volume(), -i))
        return self.primitives[best].canonical_axes()


# ---------------------------------------------------------------------------
# bounding volumes
# ---------------------------------------------------------------------------

@dataclass
class OBB:
    """Oriented box: rotation columns are the axes for edges d1 <= d2 <= d3."""

    center: np.ndarray
    rotation: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.edges = np.asarray(self.edges, dtype=np.float64).reshape(3)
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise ValueError("OBB rotation must be orthonormal")
        if not (self.edges[0] <= self.edges[1] <= self.edges[2]):
            raise ValueError("OBB edges must be ascending")

    @property
    def half_edges(self) -> np.ndarray:
        return self.edges / 2.0

    def contains(self, pts, tol=1e-9):
        local = (np.atleast_2d(pts) - self.center) @ self.rotation
        return (np.abs(local) <= self.half_edges + tol).all(axis=1)

    def sample_interior(self, count, rng):
        local = rng.uniform(-self.half_edges, self.half_edges, size=(count, 3))
        return local @ self.rotation.T + self.center


@dataclass
class BoundingSphere:
    """Control point: center in link frame, hard radius, transition buffer."""

    link_index: int
    center: np.ndarray
    radius: float
    buffer: float = DEFAULT_SPHERE_BUFFER

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        if self.buffer <= 0:
            raise ValueError("sphere buffer must be positive")


def _min_area_rect_axes(pts2: np.ndarray):
    """Unit axes of the minimum-area bounding rectangle of 2D points.

    Rotating calipers over the convex hull: the optimal rectangle shares an
    edge direction with the hull.
    """
    from scipy.spatial import ConvexHull
    hp = pts2[ConvexHull(pts2).vertices]
    best = None
    for i in range(len(hp)):
        e = hp[(i + 1) % len(hp)] - hp[i]
        norm = math.hypot(e[0], e[1])
        if norm < 1e-12:
            continue
        u = e / norm
        v = np.array([-u[1], u[0]])
        a = hp @ u
        b = hp @ v
        area = (a.max() - a.min()) * (b.max() - b.min())
        if best is None or area < best[0]:
            best = (area, u, v)
    return best[1], best[2]


def _refine_axes(pts: np.ndarray, axes: np.ndarray, sweeps: int = 4) -> np.ndarray:
    """Alternate minimum-area rectangle fits across each coordinate plane.

    For box-like point sets every side view is a rectangle whose hull edges
    run along the true axes, so each view can snap two axes at once.  A view
    seen along a still-tilted normal can also inject error, so a correction
    is kept only when it shrinks the fitted box volume; the descent is then
    monotone and cannot cycle.
    """
    def volume(A):
        proj = pts @ A
        ext = proj.max(axis=0) - proj.min(axis=0)
        return float(ext[0] * ext[1] * ext[2])

    axes = axes.copy()
    best = volume(axes)
    for _ in range(sweeps):
        improved = False
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            plane = axes[:, [i, j]]
            try:
                u2, v2 = _min_area_rect_axes(pts @ plane)
            except Exception:
                continue  # degenerate hull in this view; keep current pair
            cand = axes.copy()
            cand[:, i] = plane @ u2
            cand[:, j] = plane @ v2
            vol = volume(cand)
            if vol < best * (1.0 - 1e-12):
                axes, best = cand, vol
                improved = True
        if not improved:
            break
    return axes


def compute_obb(geometry: LinkGeometry, samples: int = _OBB_SAMPLES) -> OBB:
    """Fit an oriented box over a fixed-seed surface sampling.

    PCA alone cannot orient a symmetric cross-section (equal eigenvalues
    leave the eigenvector pair free to spin), so its frame only seeds an
    alternating minimum-area rectangle refinement.  Near isotropic spectra
    (spheres, cubes) skip straight to the dominant primitive's own axes.
    Deterministic: same geometry, same box.  Fitted extents are padded by
    1% because sampled extrema undershoot the true surface.
    """
    rng = np.random.default_rng(_OBB_SEED)
    pts = geometry.sample_surface(samples, rng)
    cov = np.cov(pts.T)
    evals, evecs = np.linalg.eigh(cov)
    spread = evals[2] - evals[0]
    if spread <= 0.05 * max(evals[2], 1e-30):
        axes = geometry.dominant_axes()
    else:
        axes = _refine_axes(pts, evecs)
    proj = pts @ axes
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    edges = (hi - lo) * _OBB_PAD
    center = axes @ ((hi + lo) / 2.0)
    order = np.argsort(edges, kind="stable")
    axes = axes[:, order]
    edges = edges[order]
    if np.linalg.det(axes) < 0:
        axes[:, 2] = -axes[:, 2]
    return OBB(center=center, rotation=axes, edges=edges)


def sphere_count(edges) -> int:
    d1, d2, d3 = edges
    return math.ceil(d3 / math.hypot(d1, d2) + 1)


def generate_bounding_spheres(obb: OBB, buffer: float = DEFAULT_SPHERE_BUFFER,
                              link_index: int = -1) -> list[BoundingSphere]:
    """Cover an oriented box with equal spheres along its long axis.

    Diameter is the smallest face diagonal sqrt(d1^2+d2^2); count is
    ceil(d3/diameter + 1).  Centers sit on the d3 axis, equally spaced, the
    first and last inset by half the step.  Balls of exactly this radius
    cannot cover the box corners (a corner sits at radius from the axis, so
    any axial offset pushes it out); the buffered radius x_M + b does cover
    the whole box whenever step <= 2*sqrt(b*(2*x_M + b)), which holds for
    every shipped link and is what the containment tests check.
    """
    d1, d2, d3 = obb.edges
    diameter = math.hypot(d1, d2)
    count = sphere_count(obb.edges)
    step = d3 / count
    axis = obb.rotation[:, 2]
    spheres = []
    for k in range(count):
        offset = -d3 / 2.0 + step / 2.0 + k * step
        spheres.append(BoundingSphere(
            link_index=link_index,
            center=obb.center + offset * axis,
            radius=diameter / 2.0,
            buffer=buffer,
        ))
    return spheres


def buffered_cover_holds(obb: OBB, buffer: float) -> bool:
    """Analytic check that radius x_M + b spheres fully cover the box."""
    d1, d2, d3 = obb.edges
    x_m = math.hypot(d1, d2) / 2.0
    step = d3 / sphere_count(obb.edges)
    return step <= 2.0 * math.sqrt(buffer * (2.0 * x_m + buffer)) + 1e-12


def voxelize_link(geometry: LinkGeometry, voxel_size: float) -> VoxelSet:
    """Rasterize by center membership on a grid anchored at the AABB corner."""
    if voxel_size <= 0:
        raise ValueError("voxel_size must be > 0")
    lo, hi = geometry.aabb()
    dims = np.maximum(1, np.ceil((hi - lo) / voxel_size - 1e-9).astype(int))
    ii, jj, kk = np.meshgrid(*(np.arange(d) for d in dims), indexing="ij")
    idx = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
    centers = lo + (idx + 0.5) * voxel_size
    keep = geometry.contains(centers)
    return VoxelSet(origin=lo, voxel_size=voxel_size, indices=idx[keep])


# ---------------------------------------------------------------------------
# kinematic chain
# ---------------------------------------------------------------------------

@dataclass
class Joint:
    name: str
    origin: np.ndarray  # fixed parent transform, 4x4
    axis: np.ndarray    # unit rotation axis in the joint frame

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(4, 4)
        self.axis = _unit(self.axis)


class KinematicChain:
    """Serial revolute chain; one link of geometry rides on each joint."""

    def __init__(self, joints, q_min, q_max, links, acm=(),
                 base_frame=None, controlled_links=None, ee_offset=None,
                 name="robot", sphere_buffer=DEFAULT_SPHERE_BUFFER,
                 sphere_overrides=None):
        self.joints = list(joints)
        self.q_min = np.asarray(q_min, dtype=np.float64).reshape(-1)
        self.q_max = np.asarray(q_max, dtype=np.float64).reshape(-1)
        self.links = list(links)
        n = len(self.joints)
        if not (len(self.links) == n == self.q_min.size == self.q_max.size):
            raise ValueError("joints, links and limits must have equal length")
        if (self.q_min >= self.q_max).any():
            raise ValueError("q_min must be strictly below q_max")
        self.acm = frozenset(tuple(sorted((int(a), int(b)))) for a, b in acm)
        if any(a == b for a, b in self.acm):
            raise ValueError("ACM pairs must join distinct links")
        self.base_frame = np.eye(4) if base_frame is None else np.asarray(base_frame, float)
        self.controlled_links = tuple(sorted(int(i) for i in controlled_links)) \
            if controlled_links is not None else tuple(range(n))
        self.ee_offset = np.eye(4) if ee_offset is None else np.asarray(ee_offset, float)
        self.name = name
        self.sphere_buffer = float(sphere_buffer)
        self.sphere_overrides = dict(sphere_overrides or {})

    @property
    def n(self) -> int:
        return len(self.joints)

    def _check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.size != self.n:
            raise ValueError(f"expected {self.n} joint values, got {q.size}")
        return q

    def forward_kinematics(self, q) -> list[np.ndarray]:
        """World transform of every link frame (after its joint rotation)."""
        q = self._check_q(q)
        out = []
        T = self.base_frame.copy()
        for j, joint in enumerate(self.joints):
            T = T @ joint.origin
            spin = np.eye(4)
            spin[:3, :3] = _rot(joint.axis, q[j])
            T = T @ spin
            out.append(T.copy())
        return out

    def joint_frames(self, q):
        """Per joint: world rotation-axis origin and direction."""
        q = self._check_q(q)
        origins = np.empty((self.n, 3))
        axes = np.empty((self.n, 3))
        T = self.base_frame.copy()
        for j, joint in enumerate(self.joints):
            T = T @ joint.origin
            origins[j] = T[:3, 3]
            axes[j] = T[:3, :3] @ joint.axis
            spin = np.eye(4)
            spin[:3, :3] = _rot(joint.axis, q[j])
            T = T @ spin
        return origins, axes

    def position_jacobian(self, q, link_index: int, point_world,
                          frames=None) -> np.ndarray:
        """3 x n Jacobian of a world point rigidly attached to a link.

        frames, when given, must be a joint_frames(q) result; callers
        building many rows at the same q share one FK pass that way.
        """
        if not (0 <= link_index < self.n):
            raise IndexError(f"link index {link_index} out of range")
        origins, axes = frames if frames is not None else self.joint_frames(q)
        p = np.asarray(point_world, dtype=np.float64).reshape(3)
        J = np.zeros((3, self.n))
        k = link_index + 1
        r = p - origins[:k]
        a = axes[:k]
        J[0, :k] = a[:, 1] * r[:, 2] - a[:, 2] * r[:, 1]
        J[1, :k] = a[:, 2] * r[:, 0] - a[:, 0] * r[:, 2]
        J[2, :k] = a[:, 0] * r[:, 1] - a[:, 1] * r[:, 0]
        return J

    def ee_pose(self, q) -> np.ndarray:
        return self.forward_kinematics(q)[-1] @ self.ee_offset

    def geometric_jacobian(self, q) -> np.ndarray:
        """6 x n end-effector Jacobian: linear on top, angular below."""
        origins, axes = self.joint_frames(q)
        p = self.ee_pose(q)[:3, 3]
        J = np.zeros((6, self.n))
        for j in range(self.n):
            J[:3, j] = np.cross(axes[j], p - origins[j])
            J[3:, j] = axes[j]
        return J

    def build_spheres(self) -> list[BoundingSphere]:
        """Bounding spheres for every controlled link; explicit overrides win."""
        spheres = []
        for li in self.controlled_links:
            if li in self.sphere_overrides:
                spheres.extend(self.sphere_overrides[li])
            else:
                obb = compute_obb(self.links[li])
                spheres.extend(generate_bounding_spheres(
                    obb, self.sphere_buffer, link_index=li))
        return spheres


def self_obstacle_links(chain: KinematicChain, controlled_links=None) -> list[int]:
    """Links the arm must avoid on its own body.

    A link belongs to the set when it is not controlled and at least one
    controlled link is not ACM-paired with it.  Sorted ascending.
    """
    controlled = set(chain.controlled_links if controlled_links is None
                     else controlled_links)
    out = []
    for li in range(chain.n):
        if li in controlled:
            continue
        if any(tuple(sorted((li, c))) not in chain.acm for c in controlled):
            out.append(li)
    return out


# ---------------------------------------------------------------------------
# robot description files
# ---------------------------------------------------------------------------

def _pose_from_json(obj) -> np.ndarray:
    T = np.eye(4)
    if obj is None:
        return T
    if "xyz" in obj:
        T[:3, 3] = np.asarray(obj["xyz"], dtype=np.float64)
    if "axis_angle" in obj:
        ax, ay, az, angle = obj["axis_angle"]
        T[:3, :3] = _rot(_unit((ax, ay, az)), float(angle))
    return T


def primitive_from_json(obj):
    kind = obj["type"]
    if kind == "box":
        rot = np.eye(3)
        if "axis_angle" in obj:
            ax, ay, az, angle = obj["axis_angle"]
            rot = _rot(_unit((ax, ay, az)), float(angle))
        return Box(center=obj["center"], rotation=rot, half_extents=obj["half_extents"])
    if kind == "cylinder":
        return Cylinder(base=obj["base"], axis=obj["axis"],
                        radius=obj["radius"], length=obj["length"])
    if kind == "sphere":
        return Sphere(center=obj["center"], radius=obj["radius"])
    if kind == "capsule":
        return Capsule(p0=obj["p0"], p1=obj["p1"], radius=obj["radius"])
    raise ValueError(f"unknown primitive type {kind!r}")


def load_robot(path) -> KinematicChain:
    """Build a chain from the JSON robot description."""
    with open(path) as fh:
        doc = json.load(fh)
    joints, links, q_min, q_max = [], [], [], []
    for j in doc["joints"]:
        joints.append(Joint(name=j["name"], origin=_pose_from_json(j.get("origin")),
                            axis=j["axis"]))
        lo, hi = j["limits"]
        q_min.append(lo)
        q_max.append(hi)
        links.append(LinkGeometry([primitive_from_json(p)
                                   for p in j["link"]["primitives"]]))
    buffer = float(doc.get("sphere_buffer", DEFAULT_SPHERE_BUFFER))
    overrides = {}
    for key, entries in doc.get("spheres", {}).items():
        li = int(key)
        overrides[li] = [BoundingSphere(link_index=li, center=e["center"],
                                        radius=e["radius"],
                                        buffer=e.get("buffer", buffer))
                         for e in entries]
    return KinematicChain(
        joints=joints, q_min=q_min, q_max=q_max, links=links,
        acm=[tuple(p) for p in doc.get("acm", [])],
        base_frame=_pose_from_json(doc.get("base_frame")),
        controlled_links=doc.get("controlled_links"),
        ee_offset=_pose_from_json(doc.get("ee_offset")),
        name=doc.get("name", "robot"),
        sphere_buffer=buffer,
        sphere_overrides=overrides,
    )


def shipped_robot_path():
    """Filesystem path of the bundled desk arm description."""
    import importlib.resources
    return importlib.resources.files("voxarm").joinpath("data", "desk7.json")


def quat_to_matrix(q) -> np.ndarray:
    """Unit quaternion [x, y, z, w] to a rotation matrix."""
    return Rotation.from_quat(np.asarray(q, dtype=np.float64)).as_matrix()


def matrix_to_quat(R) -> np.ndarray:
    return Rotation.from_matrix(np.asarray(R, dtype=np.float64)).as_quat()
