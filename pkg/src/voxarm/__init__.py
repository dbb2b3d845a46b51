"""Reactive collision avoidance for a desk-scale arm, without sensors.

The stack: probabilistic voxel maps fed by synthetic point clouds, an exact
banded Euclidean distance transform over those maps, a sphere-approximated
robot body, and a set-based task-priority velocity controller that keeps the
spheres away from whatever the maps contain.
"""

import os

# The EDT kernels accept a worker count up to 8 regardless of core count;
# numba fixes its pool size at first launch, so raise the ceiling before
# numba is ever imported.  Harmless if the env var is already set.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))

from .grids import (  # noqa: E402
    FilterConfig,
    InsertStats,
    PointCloud,
    VoxelGrid,
    VoxelSet,
    load_point_cloud,
    new_grid,
    statistical_outlier_filter,
)
from .edt import (  # noqa: E402
    NO_SITE,
    BandConfig,
    DistanceField,
    ProximateStack,
    brute_force_edt,
    default_band_config,
    line_nearest_sites,
    pba_edt,
    proximate_sites_1d,
    query_nearest_site,
)
from .robot import (  # noqa: E402
    OBB,
    Box,
    BoundingSphere,
    Capsule,
    Cylinder,
    Joint,
    KinematicChain,
    LinkGeometry,
    Sphere,
    buffered_cover_holds,
    compute_obb,
    generate_bounding_spheres,
    load_robot,
    matrix_to_quat,
    quat_to_matrix,
    self_obstacle_links,
    shipped_robot_path,
    sphere_count,
    voxelize_link,
)
from .tasks import (  # noqa: E402
    AvoidanceConfig,
    CollisionTaskState,
    EEPoseGains,
    JointLimitConfig,
    TaskLevel,
    activation_sigmoid,
    ee_pose_task,
    joint_limit_tasks,
    update_collision_tasks,
)
from .controller import (  # noqa: E402
    PriorityStack,
    RegularizationConfig,
    bell_regularizer,
    scale_to_velocity_limit,
    solve_level,
    solve_priority_stack,
)
from .movers import (  # noqa: E402
    ObstacleMover,
    OscillatingMover,
    StaticMover,
    WaypointMover,
    make_mover,
)
from .scenario import (  # noqa: E402
    CloudConfig,
    GridSpec,
    Scenario,
    TimedTarget,
    load_scenario,
    shipped_scenario_names,
    shipped_scenario_path,
)
from .engine import (  # noqa: E402
    RunLog,
    SimEngine,
    StageFault,
    TickRecord,
    run_scenario,
)

__all__ = [
    "FilterConfig", "InsertStats", "PointCloud", "VoxelGrid", "VoxelSet",
    "load_point_cloud", "new_grid", "statistical_outlier_filter",
    "NO_SITE", "BandConfig", "DistanceField", "ProximateStack",
    "brute_force_edt", "default_band_config", "line_nearest_sites",
    "pba_edt", "proximate_sites_1d", "query_nearest_site",
    "OBB", "Box", "BoundingSphere", "Capsule", "Cylinder", "Joint",
    "KinematicChain", "LinkGeometry", "Sphere", "buffered_cover_holds",
    "compute_obb", "generate_bounding_spheres", "load_robot",
    "matrix_to_quat", "quat_to_matrix", "self_obstacle_links",
    "shipped_robot_path", "sphere_count", "voxelize_link",
    "AvoidanceConfig", "CollisionTaskState", "EEPoseGains",
    "JointLimitConfig", "TaskLevel", "activation_sigmoid", "ee_pose_task",
    "joint_limit_tasks", "update_collision_tasks",
    "PriorityStack", "RegularizationConfig", "bell_regularizer",
    "scale_to_velocity_limit", "solve_level", "solve_priority_stack",
    "ObstacleMover", "OscillatingMover", "StaticMover", "WaypointMover",
    "make_mover",
    "CloudConfig", "GridSpec", "Scenario", "TimedTarget", "load_scenario",
    "shipped_scenario_names", "shipped_scenario_path",
    "RunLog", "SimEngine", "StageFault", "TickRecord", "run_scenario",
]

__version__ = "0.1.0"
