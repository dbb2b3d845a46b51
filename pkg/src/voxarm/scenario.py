"""Scenario files: everything one simulated run needs, as plain JSON.

A scenario names a robot description, a voxel grid, a list of obstacle
movers, a timed end-effector target schedule and the controller knobs.  All
fields beyond `name` have defaults, and unknown keys are rejected so typos
fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .controller import RegularizationConfig
from .robot import quat_to_matrix, shipped_robot_path
from .tasks import AvoidanceConfig, EEPoseGains, JointLimitConfig

DEFAULT_DT = 0.005
DEFAULT_CAMERA_HZ = 30.0
DEFAULT_QDOT_MAX = 1.5


@dataclass
class GridSpec:
    dims: tuple[int, int, int] = (96, 96, 96)
    voxel_size: float = 0.02
    origin: tuple[float, float, float] = (-0.96, -0.96, -0.24)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.origin = tuple(float(v) for v in self.origin)
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError("grid dims must be three positive integers")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be > 0")


@dataclass
class CloudConfig:
    points_per_obstacle: int = 500
    noise_std: float = 0.0
    k_neighbors: int = 8
    std_multiplier: float = 1.0

    def __post_init__(self):
        if self.points_per_obstacle < 1:
            raise ValueError("points_per_obstacle must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass
class TimedTarget:
    """EE pose that becomes active at time t; the schedule is a step
    function, the latest entry with t <= now wins."""

    t: float
    position: np.ndarray
    quaternion: np.ndarray  # xyzw

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(q))
        if not 0.9 < norm < 1.1:
            raise ValueError("target quaternion is far from unit length")
        self.quaternion = q / norm

    def pose(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = quat_to_matrix(self.quaternion)
        T[:3, 3] = self.position
        return T


@dataclass
class Scenario:
    name: str
    robot_path: Path
    grid: GridSpec = field(default_factory=GridSpec)
    duration: float = 5.0
    dt: float = DEFAULT_DT
    seed: int = 0
    q0: np.ndarray | None = None
    ee_targets: list[TimedTarget] = field(default_factory=list)
    obstacles: list[dict] = field(default_factory=list)
    cloud: CloudConfig = field(default_factory=CloudConfig)
    camera_hz: float = DEFAULT_CAMERA_HZ
    regularization: bool = True
    self_collision: bool = True
    workers: int = 1
    qdot_max: float = DEFAULT_QDOT_MAX
    avoidance: AvoidanceConfig = field(default_factory=AvoidanceConfig)
    joint_limits: JointLimitConfig = field(default_factory=JointLimitConfig)
    ee_gains: EEPoseGains = field(default_factory=EEPoseGains)
    reg: RegularizationConfig = field(default_factory=RegularizationConfig)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if self.camera_hz <= 0:
            raise ValueError("camera_hz must be > 0")
        if self.q0 is not None:
            self.q0 = np.asarray(self.q0, dtype=np.float64).reshape(-1)
        ids = [o["id"] for o in self.obstacles]
        if len(ids) != len(set(ids)):
            raise ValueError("obstacle ids must be unique")
        self.ee_targets = sorted(self.ee_targets, key=lambda tt: tt.t)


_TOP_KEYS = {
    "name", "robot", "grid", "duration", "dt", "seed", "q0", "ee_targets",
    "obstacles", "cloud", "camera_hz", "regularization", "self_collision",
    "workers", "controller", "avoidance", "joint_limits", "ee_gains",
}


def _resolve_robot(ref: str, base_dir: Path) -> Path:
    p = Path(ref)
    if p.is_absolute() and p.exists():
        return p
    local = base_dir / p
    if local.exists():
        return local
    if ref == "desk7" or ref == "desk7.json":
        return shipped_robot_path()
    raise FileNotFoundError(f"robot description {ref!r} not found")


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    if "name" not in doc:
        raise ValueError("scenario needs a name")

    grid = GridSpec(**doc.get("grid", {}))
    cloud = CloudConfig(**doc.get("cloud", {}))
    targets = [TimedTarget(t=e.get("t", 0.0), position=e["position"],
                           quaternion=e.get("quaternion", [0, 0, 0, 1]))
               for e in doc.get("ee_targets", [])]
    obstacles = []
    for i, ob in enumerate(doc.get("obstacles", [])):
        ob = dict(ob)
        ob.setdefault("id", i)
        obstacles.append(ob)

    ctrl = doc.get("controller", {})
    reg = RegularizationConfig(
        p_lambda=ctrl.get("p_lambda", 0.1),
        sigma_threshold=ctrl.get("sigma_threshold", 0.05))
    qdot_max = ctrl.get("qdot_max", DEFAULT_QDOT_MAX)

    av = doc.get("avoidance", {})
    avoidance = AvoidanceConfig(kappa=av.get("kappa", 2.0),
                                x_star_offset=av.get("x_star_offset"))
    jl = doc.get("joint_limits", {})
    joint_limits = JointLimitConfig(
        margin=jl.get("margin", 0.05), buffer=jl.get("buffer", 0.05),
        kappa=jl.get("kappa", 2.0), x_star_offset=jl.get("x_star_offset"))
    eg = doc.get("ee_gains", {})
    ee_gains = EEPoseGains(linear=eg.get("linear", 1.0),
                           angular=eg.get("angular", 1.0))

    return Scenario(
        name=doc["name"],
        robot_path=_resolve_robot(doc.get("robot", "desk7"), path.parent),
        grid=grid,
        duration=doc.get("duration", 5.0),
        dt=doc.get("dt", DEFAULT_DT),
        seed=doc.get("seed", 0),
        q0=doc.get("q0"),
        ee_targets=targets,
        obstacles=obstacles,
        cloud=cloud,
        camera_hz=doc.get("camera_hz", DEFAULT_CAMERA_HZ),
        regularization=doc.get("regularization", True),
        self_collision=doc.get("self_collision", True),
        workers=doc.get("workers", 1),
        qdot_max=qdot_max,
        avoidance=avoidance,
        joint_limits=joint_limits,
        ee_gains=ee_gains,
        reg=reg,
    )


def shipped_scenario_path(name: str) -> Path:
    """Path of a bundled scenario, by bare name or file name."""
    if not name.endswith(".json"):
        name = name + ".json"
    root = resources.files("voxarm").joinpath("data", "scenarios", name)
    with resources.as_file(root) as p:
        if not p.exists():
            raise FileNotFoundError(f"no bundled scenario named {name!r}")
        return Path(p)


def shipped_scenario_names() -> list[str]:
    root = resources.files("voxarm").joinpath("data", "scenarios")
    with resources.as_file(root) as p:
        return sorted(f.stem for f in Path(p).glob("*.json"))
