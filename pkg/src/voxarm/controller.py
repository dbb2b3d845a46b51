"""Regularized task-priority resolution.

Each level solves a weighted least-squares problem whose activation matrix
smoothly admits rows, with a singular-value-keyed penalty that keeps the
solution bounded while tasks enter or leave their transition bands.  Levels
compose through a damped null-space projector, folded lowest priority first
so the top level is applied last and dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tasks import TaskLevel

DEFAULT_RTOL = 1e-8
DEFAULT_QDOT_MAX = 1.5


@dataclass
class RegularizationConfig:
    """Bell penalty on small singular values of J^T A J.

    p(sigma) peaks at p_lambda for sigma = 0 and decays as a Gaussian with
    scale sigma_threshold.
    """

    p_lambda: float = 0.1
    sigma_threshold: float = 0.05
    rtol: float = DEFAULT_RTOL

    def __post_init__(self):
        if self.p_lambda <= 0 or self.sigma_threshold <= 0 or self.rtol <= 0:
            raise ValueError("regularization parameters must be > 0")


def bell_regularizer(singular_values, cfg: RegularizationConfig) -> np.ndarray:
    s = np.asarray(singular_values, dtype=np.float64)
    return cfg.p_lambda * np.exp(-(s * s) / (2.0 * cfg.sigma_threshold ** 2))


@dataclass
class PriorityStack:
    """Ordered task levels, highest priority first."""

    levels: list[TaskLevel]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("priority stack must hold at least one level")
        n = self.levels[0].J.shape[1]
        if any(lv.J.shape[1] != n for lv in self.levels):
            raise ValueError("all levels must share the joint dimension")


def solve_level(level: TaskLevel, qdot_lower: np.ndarray,
                reg_cfg: RegularizationConfig | None) -> np.ndarray:
    """One level of the hierarchy on top of a lower-priority velocity.

    q_dot = M+ J^T A A xr + (I - M+ J^T A A J) q_dot_lower, where
    M = J^T A J + V P V^T, V from the SVD of J^T A J, and P carries the bell
    penalty on singular values where one exists (zero beyond min(m, n)).
    reg_cfg None drops the penalty term entirely.  A fully deactivated level
    returns qdot_lower bit-unchanged.
    """
    J = level.J
    a = level.activation
    xr = level.xdot_ref
    qdot_lower = np.asarray(qdot_lower, dtype=np.float64).reshape(-1)
    n = J.shape[1]
    if qdot_lower.size != n:
        raise ValueError("qdot_lower dimension mismatch")
    for arr in (J, a, xr, qdot_lower):
        if not np.isfinite(arr).all():
            raise ValueError("non-finite input to solve_level")
    if not a.any():
        return qdot_lower.copy()
    m = J.shape[0]
    jt_a = J.T * a
    jtaj = jt_a @ J
    rtol = reg_cfg.rtol if reg_cfg is not None else DEFAULT_RTOL
    if reg_cfg is not None:
        _, sing, vt = np.linalg.svd(jtaj, hermitian=True)
        p = bell_regularizer(sing, reg_cfg)
        p[min(m, n):] = 0.0
        M = jtaj + (vt.T * p) @ vt
    else:
        M = jtaj
    m_pinv = np.linalg.pinv(M, rcond=rtol, hermitian=True)
    jt_aa = J.T * (a * a)
    qdot = m_pinv @ (jt_aa @ xr)
    qdot += qdot_lower - m_pinv @ (jt_aa @ (J @ qdot_lower))
    return qdot


def solve_priority_stack(stack, reg_cfg: RegularizationConfig | None) -> np.ndarray:
    """Fold the hierarchy from the lowest level up, starting at rest."""
    levels = stack.levels if isinstance(stack, PriorityStack) else list(stack)
    if not levels:
        raise ValueError("empty priority stack")
    n = levels[0].J.shape[1]
    if any(lv.J.shape[1] != n for lv in levels):
        raise ValueError("all levels must share the joint dimension")
    qdot = np.zeros(n)
    for level in reversed(levels):
        qdot = solve_level(level, qdot, reg_cfg)
    return qdot


def scale_to_velocity_limit(qdot: np.ndarray,
                            qdot_max: float = DEFAULT_QDOT_MAX) -> np.ndarray:
    """Uniform scale-down so every joint obeys |qdot_j| <= qdot_max.

    Kept outside the level solver on purpose: scaling inside would bend the
    exact-priority guarantees the solver provides.
    """
    if qdot_max <= 0:
        raise ValueError("qdot_max must be > 0")
    peak = np.abs(qdot).max() if qdot.size else 0.0
    if peak <= qdot_max:
        return qdot.copy()
    return qdot * (qdot_max / peak)
