"""Per-cycle task construction: collision avoidance, joint limits, EE pose.

Every inequality-style task is a scalar distance with the same shape: a hard
boundary x_M, a transition buffer b above it, a cosine activation that ramps
1 -> 0 across [x_M, x_M + b], and a reference velocity pulling the value
toward a rest point x* outside the band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

log = logging.getLogger(__name__)


def activation_sigmoid(x: float, x_m: float, b: float) -> float:
    """1 when at or below the boundary, 0 past the buffer, cosine between.

    Continuous and monotone non-increasing; the steepest slope is pi/(2b).
    """
    if b <= 0:
        raise ValueError("buffer b must be > 0")
    if x <= x_m:
        return 1.0
    if x >= x_m + b:
        return 0.0
    return 0.5 * (math.cos((x - x_m) * math.pi / b) + 1.0)


@dataclass
class TaskLevel:
    """One priority level: rows of J, diagonal activation, references."""

    name: str
    J: np.ndarray
    activation: np.ndarray
    xdot_ref: np.ndarray
    task_values: np.ndarray

    def __post_init__(self):
        self.J = np.atleast_2d(np.asarray(self.J, dtype=np.float64))
        self.activation = np.asarray(self.activation, dtype=np.float64).reshape(-1)
        self.xdot_ref = np.asarray(self.xdot_ref, dtype=np.float64).reshape(-1)
        self.task_values = np.asarray(self.task_values, dtype=np.float64).reshape(-1)
        m = self.J.shape[0]
        if not (self.activation.size == self.xdot_ref.size == self.task_values.size == m):
            raise ValueError("row count mismatch across task level fields")
        if ((self.activation < 0) | (self.activation > 1)).any():
            raise ValueError("activation entries must lie in [0, 1]")

    @property
    def rows(self) -> int:
        return self.J.shape[0]


@dataclass
class AvoidanceConfig:
    """Gain and rest-point offset for distance tasks.

    x* = x_M + x_star_offset; None means 2b per sphere, which parks the rest
    point just outside the transition band so an undisturbed task switches
    itself off.
    """

    kappa: float = 2.0
    x_star_offset: float | None = None

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.x_star_offset is not None and self.x_star_offset <= 0:
            raise ValueError("x_star_offset must be > 0")


@dataclass
class CollisionTaskState:
    """Carries the last valid push direction per (level, sphere) across
    cycles, for the zero-distance corner case."""

    last_directions: dict = field(default_factory=dict)


def _distance_rows(chain, q, spheres, centers_world, sites_world, cfg,
                   state, label, frames=None):
    n = chain.n
    m = len(spheres)
    if frames is None:
        frames = chain.joint_frames(q)
    J = np.zeros((m, n))
    act = np.zeros(m)
    ref = np.zeros(m)
    values = np.full(m, np.inf)
    for i, (sph, center) in enumerate(zip(spheres, centers_world)):
        site = sites_world[i]
        if site is None:
            continue  # inert row: activation 0, zero Jacobian
        d = np.asarray(site, dtype=np.float64) - center
        x = float(np.linalg.norm(d))
        values[i] = x
        act[i] = activation_sigmoid(x, sph.radius, sph.buffer)
        offset = cfg.x_star_offset if cfg.x_star_offset is not None else 2.0 * sph.buffer
        ref[i] = cfg.kappa * (sph.radius + offset - x)
        if x > 1e-12:
            direction = -d / x
            if state is not None:
                state.last_directions[(label, i)] = direction
        else:
            held = state.last_directions.get((label, i)) if state is not None else None
            act[i] = 1.0
            if held is None:
                log.warning("%s sphere %d coincides with its obstacle and has "
                            "no held direction; row zeroed", label, i)
                continue
            direction = held
        J[i] = direction @ chain.position_jacobian(q, sph.link_index, center,
                                                    frames=frames)
    return TaskLevel(name=label, J=J, activation=act, xdot_ref=ref,
                     task_values=values)


def update_collision_tasks(chain, q, spheres, centers_world, env_sites,
                           self_sites, cfg: AvoidanceConfig,
                           state: CollisionTaskState | None = None):
    """Build the obstacle and self-collision levels for one cycle.

    centers_world holds each sphere center at the current q; env_sites and
    self_sites hold the matching nearest obstacle coordinate from each map
    (None where the map had no site).  Per sphere: x = |O - C|, the row is
    the unit direction away from the obstacle projected through the sphere's
    point Jacobian, and the reference velocity kappa*(x* - x) opens the gap.
    Both levels run through the same row builder.
    """
    frames = chain.joint_frames(q)
    env = _distance_rows(chain, q, spheres, centers_world, env_sites, cfg,
                         state, "obstacle_avoidance", frames=frames)
    own = _distance_rows(chain, q, spheres, centers_world, self_sites, cfg,
                         state, "self_avoidance", frames=frames)
    return env, own


@dataclass
class JointLimitConfig:
    margin: float = 0.05
    buffer: float = 0.05
    kappa: float = 2.0
    x_star_offset: float | None = None  # None -> 2 * buffer

    def __post_init__(self):
        if self.margin <= 0 or self.buffer <= 0 or self.kappa <= 0:
            raise ValueError("joint limit margin, buffer and kappa must be > 0")


def joint_limit_tasks(q, q_min, q_max, cfg: JointLimitConfig | None = None) -> TaskLevel:
    """2n rows keeping every joint a margin away from its limits.

    Row pairs per joint: distance to the upper limit with J = -e_j, then to
    the lower limit with J = +e_j.  Activation/reference shape matches the
    collision tasks so the solver treats them identically.
    """
    cfg = cfg or JointLimitConfig()
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    q_min = np.asarray(q_min, dtype=np.float64).reshape(-1)
    q_max = np.asarray(q_max, dtype=np.float64).reshape(-1)
    if (q_min >= q_max).any():
        raise ValueError("q_min must be strictly below q_max")
    n = q.size
    offset = cfg.x_star_offset if cfg.x_star_offset is not None else 2.0 * cfg.buffer
    x_star = cfg.margin + offset
    J = np.zeros((2 * n, n))
    act = np.zeros(2 * n)
    ref = np.zeros(2 * n)
    values = np.zeros(2 * n)
    for j in range(n):
        for row, (dist, sign) in enumerate(
                (((q_max[j] - q[j]), -1.0), ((q[j] - q_min[j]), 1.0))):
            r = 2 * j + row
            J[r, j] = sign
            values[r] = dist
            act[r] = activation_sigmoid(dist, cfg.margin, cfg.buffer)
            ref[r] = cfg.kappa * (x_star - dist)
    return TaskLevel(name="joint_limits", J=J, activation=act,
                     xdot_ref=ref, task_values=values)


@dataclass
class EEPoseGains:
    linear: float = 1.0
    angular: float = 1.0


def ee_pose_task(chain, q, target_pose: np.ndarray,
                 gains: EEPoseGains | None = None) -> TaskLevel:
    """Always-active 6-row end-effector servo toward a world target pose.

    Reference: k_p*(p_target - p) stacked over k_o*axis_angle(R_target R^T);
    the Jacobian is the chain's geometric Jacobian, so both parts live in
    the world frame.
    """
    gains = gains or EEPoseGains()
    target = np.asarray(target_pose, dtype=np.float64).reshape(4, 4)
    pose = chain.ee_pose(q)
    p_err = target[:3, 3] - pose[:3, 3]
    r_err = Rotation.from_matrix(target[:3, :3] @ pose[:3, :3].T).as_rotvec()
    ref = np.concatenate([gains.linear * p_err, gains.angular * r_err])
    err = np.concatenate([p_err, r_err])
    return TaskLevel(name="ee_pose", J=chain.geometric_jacobian(q),
                     activation=np.ones(6), xdot_ref=ref, task_values=err)
