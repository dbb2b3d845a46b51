"""Task level construction: activation shape, collision rows, limits, EE servo."""

import logging
import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from voxarm import (
    AvoidanceConfig,
    BoundingSphere,
    Capsule,
    CollisionTaskState,
    EEPoseGains,
    Joint,
    JointLimitConfig,
    KinematicChain,
    LinkGeometry,
    TaskLevel,
    activation_sigmoid,
    ee_pose_task,
    joint_limit_tasks,
    update_collision_tasks,
)


def _pose(xyz=(0, 0, 0)):
    T = np.eye(4)
    T[:3, 3] = xyz
    return T


def _link():
    return LinkGeometry([Capsule(p0=(0, 0, 0), p1=(0.1, 0, 0), radius=0.02)])


def _single_joint_chain(axis=(0, 1, 0)):
    return KinematicChain(joints=[Joint("j0", np.eye(4), axis)],
                          q_min=[-3.0], q_max=[3.0], links=[_link()])


def _chain3():
    joints = [
        Joint("a", _pose((0, 0, 0.2)), (0, 0, 1)),
        Joint("b", _pose((0.15, 0, 0)), (0, 1, 0)),
        Joint("c", _pose((0.2, 0, 0)), (0, 1, 0)),
    ]
    return KinematicChain(joints=joints, q_min=[-3] * 3, q_max=[3] * 3,
                          links=[_link() for _ in range(3)])


def _centers(chain, q, spheres):
    frames = chain.forward_kinematics(q)
    return [frames[s.link_index][:3, :3] @ s.center + frames[s.link_index][:3, 3]
            for s in spheres]


# ---------------------------------------------------------------------------
# activation
# ---------------------------------------------------------------------------

def test_sigmoid_boundary_values():
    assert activation_sigmoid(0.2, 0.2, 0.1) == 1.0
    assert activation_sigmoid(0.3, 0.2, 0.1) == 0.0
    assert activation_sigmoid(0.25, 0.2, 0.1) == pytest.approx(0.5, abs=1e-12)
    assert activation_sigmoid(0.05, 0.2, 0.1) == 1.0
    assert activation_sigmoid(9.0, 0.2, 0.1) == 0.0


def test_sigmoid_rejects_bad_buffer():
    with pytest.raises(ValueError):
        activation_sigmoid(0.1, 0.2, 0.0)


def test_sigmoid_monotone_and_lipschitz():
    x_m, b = 0.1, 0.07
    xs = np.linspace(0.0, 0.3, 1501)
    vals = np.array([activation_sigmoid(x, x_m, b) for x in xs])
    assert (np.diff(vals) <= 1e-15).all()
    slope = np.abs(np.diff(vals)) / np.diff(xs)
    assert slope.max() <= math.pi / (2 * b) + 1e-6


# ---------------------------------------------------------------------------
# collision rows
# ---------------------------------------------------------------------------

def test_collision_row_axis_aligned_example():
    chain = _single_joint_chain()
    sphere = BoundingSphere(link_index=0, center=(0, 0, 1), radius=0.25, buffer=0.1)
    cfg = AvoidanceConfig(kappa=2.0)
    env, own = update_collision_tasks(
        chain, [0.0], [sphere], _centers(chain, [0.0], [sphere]),
        env_sites=[np.array([0.0, 0.0, 1.3])], self_sites=[None], cfg=cfg)
    assert env.task_values[0] == pytest.approx(0.3, abs=1e-12)
    assert env.activation[0] == pytest.approx(0.5, abs=1e-12)
    # x* = x_M + 2b = 0.45, so the reference opens the gap by kappa*(0.45-0.3)
    assert env.xdot_ref[0] == pytest.approx(2.0 * 0.15, abs=1e-12)
    assert own.activation[0] == 0.0
    assert own.task_values[0] == np.inf


def test_collision_row_direction_through_jacobian():
    # y-axis joint at the origin, sphere center at (1,0,0): the point Jacobian
    # column is (0,0,-1), and an obstacle straight above pushes with direction
    # (0,0,-1), so the row contracts to +1
    chain = _single_joint_chain(axis=(0, 1, 0))
    sphere = BoundingSphere(link_index=0, center=(1, 0, 0), radius=0.25, buffer=0.1)
    env, _ = update_collision_tasks(
        chain, [0.0], [sphere], _centers(chain, [0.0], [sphere]),
        env_sites=[np.array([1.0, 0.0, 0.3])], self_sites=[None],
        cfg=AvoidanceConfig())
    np.testing.assert_allclose(env.J, [[1.0]], atol=1e-12)


def test_collision_all_no_site_is_inert():
    chain = _chain3()
    spheres = [BoundingSphere(link_index=i, center=(0.05, 0, 0), radius=0.05)
               for i in range(3)]
    env, own = update_collision_tasks(
        chain, [0.1, -0.2, 0.3], spheres,
        _centers(chain, [0.1, -0.2, 0.3], spheres),
        env_sites=[None] * 3, self_sites=[None] * 3, cfg=AvoidanceConfig())
    for level in (env, own):
        assert (level.activation == 0).all()
        assert (level.J == 0).all()
        assert (level.xdot_ref == 0).all()
        assert (level.task_values == np.inf).all()


def test_collision_row_matches_distance_gradient():
    """J_i must be the exact gradient of x_c w.r.t. q for a frozen obstacle."""
    rng = np.random.default_rng(11)
    chain = _chain3()
    eps = 1e-5
    for _ in range(40):
        q = rng.uniform(-1.5, 1.5, size=3)
        li = int(rng.integers(0, 3))
        sphere = BoundingSphere(link_index=li,
                                center=rng.uniform(-0.1, 0.1, size=3),
                                radius=0.06, buffer=0.03)
        site = rng.uniform(-0.8, 0.8, size=3)

        def distance(qv):
            c = _centers(chain, qv, [sphere])[0]
            return np.linalg.norm(site - c)

        if distance(q) < 1e-3:
            continue
        env, _ = update_collision_tasks(
            chain, q, [sphere], _centers(chain, q, [sphere]),
            env_sites=[site], self_sites=[None], cfg=AvoidanceConfig())
        fd = np.empty(3)
        for j in range(3):
            dq = np.zeros(3)
            dq[j] = eps
            fd[j] = (distance(q + dq) - distance(q - dq)) / (2 * eps)
        assert np.abs(env.J[0] - fd).max() <= 1e-5


def test_env_and_self_levels_share_the_row_builder():
    chain = _chain3()
    q = [0.4, -0.3, 0.7]
    spheres = [BoundingSphere(link_index=i, center=(0.05, 0, 0),
                              radius=0.06, buffer=0.03) for i in range(3)]
    sites = [np.array([0.3, 0.1, 0.4]), None, np.array([-0.2, 0.2, 0.1])]
    env, own = update_collision_tasks(
        chain, q, spheres, _centers(chain, q, spheres),
        env_sites=sites, self_sites=sites, cfg=AvoidanceConfig())
    assert np.array_equal(env.J, own.J)
    assert np.array_equal(env.activation, own.activation)
    assert np.array_equal(env.xdot_ref, own.xdot_ref)
    assert np.array_equal(env.task_values, own.task_values)
    assert env.name != own.name


def test_zero_distance_holds_last_direction():
    chain = _single_joint_chain(axis=(0, 1, 0))
    sphere = BoundingSphere(link_index=0, center=(1, 0, 0), radius=0.25, buffer=0.1)
    state = CollisionTaskState()
    c = _centers(chain, [0.0], [sphere])
    update_collision_tasks(chain, [0.0], [sphere], c,
                           env_sites=[np.array([1.0, 0.0, 0.3])],
                           self_sites=[None], cfg=AvoidanceConfig(), state=state)
    env, _ = update_collision_tasks(chain, [0.0], [sphere], c,
                                    env_sites=[np.array([1.0, 0.0, 0.0])],
                                    self_sites=[None], cfg=AvoidanceConfig(),
                                    state=state)
    assert env.task_values[0] == 0.0
    assert env.activation[0] == 1.0
    np.testing.assert_allclose(env.J, [[1.0]], atol=1e-12)


def test_zero_distance_without_history_zeroes_row(caplog):
    chain = _single_joint_chain(axis=(0, 1, 0))
    sphere = BoundingSphere(link_index=0, center=(1, 0, 0), radius=0.25, buffer=0.1)
    c = _centers(chain, [0.0], [sphere])
    with caplog.at_level(logging.WARNING, logger="voxarm.tasks"):
        env, _ = update_collision_tasks(chain, [0.0], [sphere], c,
                                        env_sites=[np.array([1.0, 0.0, 0.0])],
                                        self_sites=[None], cfg=AvoidanceConfig())
    assert env.activation[0] == 1.0
    assert (env.J == 0).all()
    assert any("coincides" in r.message for r in caplog.records)


def test_avoidance_config_validation():
    with pytest.raises(ValueError):
        AvoidanceConfig(kappa=0.0)
    with pytest.raises(ValueError):
        AvoidanceConfig(x_star_offset=-0.1)


# ---------------------------------------------------------------------------
# joint limits
# ---------------------------------------------------------------------------

def test_joint_limits_quiet_at_midrange():
    level = joint_limit_tasks([0.0, 0.1], [-2.0, -2.0], [2.0, 2.0])
    assert level.rows == 4
    assert (level.activation == 0).all()


def test_joint_limit_upper_boundary_active():
    cfg = JointLimitConfig(margin=0.05, buffer=0.05)
    level = joint_limit_tasks([2.0 - 0.05], [-2.0], [2.0], cfg)
    assert level.activation[0] == 1.0   # upper row
    assert level.activation[1] == 0.0   # lower row far away
    assert level.J[0, 0] == -1.0
    assert level.J[1, 0] == 1.0


def test_joint_limit_violation_pushes_back_inside():
    cfg = JointLimitConfig(margin=0.05, buffer=0.05, kappa=2.0)
    level = joint_limit_tasks([2.01], [-2.0], [2.0], cfg)
    # upper distance is negative; activation saturates and the commanded task
    # velocity is positive along J = -e_j, i.e. qdot_j < 0
    assert level.activation[0] == 1.0
    assert level.xdot_ref[0] > 0.0
    assert level.J[0, 0] == -1.0
    assert level.task_values[0] == pytest.approx(-0.01)


def test_joint_limit_validation():
    with pytest.raises(ValueError):
        joint_limit_tasks([0.0], [1.0], [-1.0])
    with pytest.raises(ValueError):
        JointLimitConfig(margin=0.0)


# ---------------------------------------------------------------------------
# end-effector servo
# ---------------------------------------------------------------------------

def test_ee_task_zero_at_target():
    chain = _chain3()
    q = [0.3, -0.4, 0.6]
    level = ee_pose_task(chain, q, chain.ee_pose(q))
    assert level.rows == 6
    assert (level.activation == 1.0).all()
    np.testing.assert_allclose(level.xdot_ref, np.zeros(6), atol=1e-12)


def test_ee_task_pure_translation():
    chain = _chain3()
    q = [0.0, 0.5, -0.2]
    target = chain.ee_pose(q).copy()
    target[2, 3] += 0.1
    level = ee_pose_task(chain, q, target, EEPoseGains(linear=1.0, angular=1.0))
    np.testing.assert_allclose(level.xdot_ref, [0, 0, 0.1, 0, 0, 0], atol=1e-12)


def test_ee_task_pure_rotation():
    chain = _chain3()
    q = [0.2, -0.1, 0.4]
    pose = chain.ee_pose(q)
    target = pose.copy()
    target[:3, :3] = Rotation.from_rotvec([0, 0, math.pi / 2]).as_matrix() @ pose[:3, :3]
    level = ee_pose_task(chain, q, target)
    np.testing.assert_allclose(level.xdot_ref[:3], np.zeros(3), atol=1e-12)
    np.testing.assert_allclose(level.xdot_ref[3:], [0, 0, math.pi / 2], atol=1e-10)


def test_ee_task_gains_scale_reference():
    chain = _chain3()
    q = [0.0, 0.5, -0.2]
    target = chain.ee_pose(q).copy()
    target[0, 3] += 0.2
    level = ee_pose_task(chain, q, target, EEPoseGains(linear=2.5, angular=1.0))
    assert level.xdot_ref[0] == pytest.approx(0.5, abs=1e-12)
    # task_values keeps the raw error regardless of gains
    assert level.task_values[0] == pytest.approx(0.2, abs=1e-12)


# ---------------------------------------------------------------------------
# task level container
# ---------------------------------------------------------------------------

def test_task_level_row_consistency():
    with pytest.raises(ValueError):
        TaskLevel(name="x", J=np.zeros((2, 3)), activation=np.zeros(3),
                  xdot_ref=np.zeros(2), task_values=np.zeros(2))
    with pytest.raises(ValueError):
        TaskLevel(name="x", J=np.zeros((1, 3)), activation=[1.5],
                  xdot_ref=[0.0], task_values=[0.0])
    level = TaskLevel(name="ok", J=np.zeros((2, 4)), activation=[0.0, 1.0],
                      xdot_ref=[0.0, 0.0], task_values=[1.0, 2.0])
    assert level.rows == 2
