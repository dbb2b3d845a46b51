"""Synthetic obstacles: parameterized motion plus deterministic cloud sampling.

Each mover owns a fixed bank of surface samples in its local frame, drawn once
at construction from a seed derived from (scenario seed, obstacle id).  The
cloud at time t is that bank translated by the mover's position, so a static
obstacle produces bit-identical clouds at every t and insertion order of the
obstacle list never changes what any one obstacle emits.
"""

from __future__ import annotations

import numpy as np

from .robot import Box, Sphere, primitive_from_json

DEFAULT_WALKER_SPEED = 1.4  # m/s, unhurried human


class ObstacleMover:
    """Base: local-frame sample bank plus a position(t) trajectory.

    A manually pinned position (interactive dragging) overrides the
    trajectory until cleared with pin(None).
    """

    def __init__(self, obstacle_id: int, shape, points: int, noise_std: float,
                 seed: int):
        if points < 1:
            raise ValueError("points per obstacle must be >= 1")
        if noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        self.obstacle_id = int(obstacle_id)
        self.shape = shape
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, self.obstacle_id])
        base = shape.sample_surface(points, rng)
        if noise_std > 0:
            base = base + rng.normal(0.0, noise_std, base.shape)
        self._base = base
        self._pinned: np.ndarray | None = None

    def nominal_position(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def pin(self, position) -> None:
        self._pinned = None if position is None \
            else np.asarray(position, dtype=np.float64).reshape(3).copy()

    def position(self, t: float) -> np.ndarray:
        if self._pinned is not None:
            return self._pinned.copy()
        return self.nominal_position(t)

    def cloud_points(self, t: float) -> np.ndarray:
        return self._base + self.position(t)


class StaticMover(ObstacleMover):
    def __init__(self, obstacle_id, shape, points, noise_std, seed, position):
        super().__init__(obstacle_id, shape, points, noise_std, seed)
        self._position = np.asarray(position, dtype=np.float64).reshape(3)

    def nominal_position(self, t: float) -> np.ndarray:
        return self._position.copy()


class OscillatingMover(ObstacleMover):
    """Sinusoid along a fixed axis: center + axis * amplitude * sin(2*pi*t/T)."""

    def __init__(self, obstacle_id, shape, points, noise_std, seed,
                 center, axis, amplitude, period):
        super().__init__(obstacle_id, shape, points, noise_std, seed)
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        axis = np.asarray(axis, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(axis))
        if norm == 0.0:
            raise ValueError("oscillation axis must be nonzero")
        self.axis = axis / norm
        if period <= 0:
            raise ValueError("oscillation period must be > 0")
        if amplitude < 0:
            raise ValueError("oscillation amplitude must be >= 0")
        self.amplitude = float(amplitude)
        self.period = float(period)

    def nominal_position(self, t: float) -> np.ndarray:
        phase = float(np.sin(2.0 * np.pi * t / self.period))
        return self.center + self.axis * (self.amplitude * phase)


class WaypointMover(ObstacleMover):
    """Piecewise-linear walk through waypoints at constant speed; parks at the
    last waypoint once the path is exhausted."""

    def __init__(self, obstacle_id, shape, points, noise_std, seed,
                 waypoints, speed=DEFAULT_WALKER_SPEED):
        super().__init__(obstacle_id, shape, points, noise_std, seed)
        wp = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
        if wp.shape[0] < 1:
            raise ValueError("walker needs at least one waypoint")
        if speed <= 0:
            raise ValueError("walker speed must be > 0")
        self.waypoints = wp
        self.speed = float(speed)
        seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        self._arclen = np.concatenate([[0.0], np.cumsum(seg)])

    def nominal_position(self, t: float) -> np.ndarray:
        total = self._arclen[-1]
        if total == 0.0:
            return self.waypoints[-1].copy()
        s = min(max(self.speed * t, 0.0), total)
        out = np.array([np.interp(s, self._arclen, self.waypoints[:, d])
                        for d in range(3)])
        return out


_DEFAULT_SHAPES = {
    "static": {"type": "box", "center": [0, 0, 0],
               "half_extents": [0.1, 0.1, 0.1]},
    "oscillating": {"type": "sphere", "center": [0, 0, 0], "radius": 0.1},
    "walker": {"type": "box", "center": [0, 0, 0],
               "half_extents": [0.1, 0.1, 0.6]},
}


def make_mover(spec: dict, points: int, noise_std: float,
               seed: int) -> ObstacleMover:
    """Build one mover from its scenario entry.

    The shape is given in the obstacle's local frame (normally centered at
    the origin) and defaults per mover type to a box, a sphere, and a
    person-sized box respectively.
    """
    kind = spec.get("type")
    if kind not in _DEFAULT_SHAPES:
        raise ValueError(f"unknown obstacle type {kind!r}")
    oid = spec["id"]
    shape = primitive_from_json(spec.get("shape", _DEFAULT_SHAPES[kind]))
    if kind == "static":
        return StaticMover(oid, shape, points, noise_std, seed,
                           position=spec["position"])
    if kind == "oscillating":
        return OscillatingMover(oid, shape, points, noise_std, seed,
                                center=spec["center"], axis=spec["axis"],
                                amplitude=spec["amplitude"],
                                period=spec["period"])
    return WaypointMover(oid, shape, points, noise_std, seed,
                         waypoints=spec["waypoints"],
                         speed=spec.get("speed", DEFAULT_WALKER_SPEED))
