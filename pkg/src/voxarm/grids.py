"""Dense log-odds voxel maps.

Two maps with identical machinery: an environment map filled from point
clouds, and a self-obstacle map filled from voxelized robot links.  Both are
cleared every control cycle, so there is no free-space (miss) model; decay
happens by clearing, not ray casting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

# Log-odds clamp range and the default evidence step for one point hit.
L_MIN = -2.0
L_MAX = 3.5
DEFAULT_HIT_LOGODDS = 0.85
DEFAULT_OCCUPANCY_THRESHOLD = 0.5


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass
class FilterConfig:
    """Insertion parameters: outlier rejection plus the occupancy model.

    k_neighbors=0 disables the statistical outlier filter.  miss_logodds is
    carried for symmetry but never applied; maps are cleared each cycle
    instead of carving free space.
    """

    k_neighbors: int = 8
    std_multiplier: float = 1.0
    hit_logodds: float = DEFAULT_HIT_LOGODDS
    miss_logodds: float = 0.0
    occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD

    def __post_init__(self) -> None:
        if self.k_neighbors < 0:
            raise ValueError("k_neighbors must be >= 0")
        if self.std_multiplier <= 0.0:
            raise ValueError("std_multiplier must be > 0")
        if not (0.0 < self.occupancy_threshold < 1.0):
            raise ValueError("occupancy_threshold must lie in (0, 1)")


@dataclass
class PointCloud:
    """Points in sensor frame plus the rigid sensor-to-world transform."""

    points: np.ndarray
    sensor_pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.sensor_pose = np.asarray(self.sensor_pose, dtype=np.float64)
        if self.sensor_pose.shape != (4, 4):
            raise ValueError("sensor_pose must be a 4x4 transform")
        if self.points.size and not np.isfinite(self.points).all():
            raise ValueError("point cloud contains non-finite coordinates")

    def world_points(self) -> np.ndarray:
        R = self.sensor_pose[:3, :3]
        t = self.sensor_pose[:3, 3]
        return self.points @ R.T + t


@dataclass
class VoxelSet:
    """Voxel indices in a local frame: origin is the corner of cell (0,0,0)."""

    origin: np.ndarray
    voxel_size: float
    indices: np.ndarray  # (K, 3) int32

    def __post_init__(self) -> None:
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.indices = np.asarray(self.indices, dtype=np.int32).reshape(-1, 3)
        if self.voxel_size <= 0.0:
            raise ValueError("voxel_size must be > 0")

    def centers(self) -> np.ndarray:
        return self.origin + (self.indices.astype(np.float64) + 0.5) * self.voxel_size


@dataclass
class InsertStats:
    inserted: int = 0
    outliers_removed: int = 0
    robot_skipped: int = 0
    out_of_bounds: int = 0


class VoxelGrid:
    """Dense 3D grid of clamped occupancy log-odds.

    origin is the world coordinate of the lower corner of voxel (0,0,0).
    Fresh cells sit at log-odds 0 (probability 0.5); only cells strictly
    above the occupancy threshold count as occupied.
    """

    def __init__(self, dims, voxel_size: float, origin=(0.0, 0.0, 0.0)):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {dims}")
        if voxel_size <= 0.0:
            raise ValueError("voxel_size must be > 0")
        if dims[0] * dims[1] * dims[2] >= 2**31:
            raise ValueError("grid too large for 32-bit voxel addressing")
        self.dims = dims
        self.voxel_size = float(voxel_size)
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3)
        self.cells = np.zeros(dims, dtype=np.float32)

    # -- geometry ---------------------------------------------------------

    def world_to_voxel(self, point) -> tuple[int, int, int] | None:
        """Discretize one world point; None when outside the grid.

        Floor convention: a point exactly on a voxel boundary belongs to the
        higher index.
        """
        idx = np.floor((np.asarray(point, dtype=np.float64) - self.origin)
                       / self.voxel_size).astype(np.int64)
        if (idx < 0).any() or (idx >= self.dims).any():
            return None
        return int(idx[0]), int(idx[1]), int(idx[2])

    def world_to_voxel_many(self, points: np.ndarray):
        """Vectorized discretization: (indices (N,3) int64, in_bounds (N,) bool)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        idx = np.floor((pts - self.origin) / self.voxel_size).astype(np.int64)
        ok = ((idx >= 0) & (idx < np.asarray(self.dims))).all(axis=1)
        return idx, ok

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=np.float64) + 0.5) * self.voxel_size

    # -- mutation ---------------------------------------------------------

    def clear(self) -> None:
        self.cells.fill(0.0)

    def insert_point_cloud(self, cloud: PointCloud, cfg: FilterConfig,
                           robot_mask: "VoxelGrid | None" = None) -> InsertStats:
        """Bayesian point insertion with outlier and robot-point exclusion.

        Every surviving in-bounds point adds hit_logodds to its voxel
        (duplicates in one cloud accumulate), clamped to [L_MIN, L_MAX].
        Points landing in robot_mask-occupied voxels are skipped and counted;
        out-of-bounds points are dropped and counted, never clamped into the
        border.
        """
        if robot_mask is not None and not self.same_geometry(robot_mask):
            raise ValueError("robot_mask geometry does not match this grid")
        stats = InsertStats()
        pts = cloud.world_points()
        if pts.shape[0] == 0:
            return stats

        if cfg.k_neighbors > 0:
            kept = statistical_outlier_filter(pts, cfg.k_neighbors, cfg.std_multiplier)
            stats.outliers_removed = pts.shape[0] - kept.shape[0]
            pts = kept
        idx, ok = self.world_to_voxel_many(pts)
        stats.out_of_bounds = int((~ok).sum())
        idx = idx[ok]
        if idx.shape[0] == 0:
            return stats

        nx, ny, nz = self.dims
        lin = (idx[:, 0] * ny + idx[:, 1]) * nz + idx[:, 2]
        if robot_mask is not None:
            thr = logit(cfg.occupancy_threshold)
            masked = robot_mask.cells.reshape(-1)[lin] > thr
            stats.robot_skipped = int(masked.sum())
            lin = lin[~masked]
        stats.inserted = int(lin.shape[0])
        if lin.shape[0]:
            hits = np.bincount(lin, minlength=nx * ny * nz).astype(np.float32)
            flat = self.cells.reshape(-1)
            np.clip(flat + hits * cfg.hit_logodds, L_MIN, L_MAX, out=flat)
        return stats

    def insert_voxel_set(self, vset: VoxelSet, transform: np.ndarray | None = None) -> int:
        """Stamp known geometry: transformed voxel centers are rediscretized
        and set to L_MAX outright (links are not sensor evidence).  Returns
        the count of centers that fell outside the grid.
        """
        centers = vset.centers()
        if transform is not None:
            T = np.asarray(transform, dtype=np.float64)
            centers = centers @ T[:3, :3].T + T[:3, 3]
        idx, ok = self.world_to_voxel_many(centers)
        idx = idx[ok]
        if idx.shape[0]:
            self.cells[idx[:, 0], idx[:, 1], idx[:, 2]] = L_MAX
        return int((~ok).sum())

    # -- queries ----------------------------------------------------------

    def occupancy_mask(self, threshold: float = DEFAULT_OCCUPANCY_THRESHOLD) -> np.ndarray:
        return self.cells > logit(threshold)

    def occupied_voxels(self, threshold: float = DEFAULT_OCCUPANCY_THRESHOLD) -> np.ndarray:
        """Occupied indices as an (K,3) int array in lexicographic order."""
        return np.argwhere(self.occupancy_mask(threshold))

    def same_geometry(self, other: "VoxelGrid") -> bool:
        return (self.dims == other.dims
                and self.voxel_size == other.voxel_size
                and np.array_equal(self.origin, other.origin))


def new_grid(dims, voxel_size: float, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    return VoxelGrid(dims, voxel_size, origin)


def statistical_outlier_filter(points: np.ndarray, k_neighbors: int,
                               std_multiplier: float) -> np.ndarray:
    """Drop points whose mean k-nearest-neighbor distance is anomalous.

    A point survives iff its mean distance to its k nearest neighbors is at
    most the global mean of that statistic plus std_multiplier times its
    standard deviation.  Clouds with at most k points pass through unchanged.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] <= k_neighbors or pts.shape[0] == 0:
        return pts
    tree = cKDTree(pts)
    # k+1 because each point is its own nearest neighbor at distance 0.
    dists, _ = tree.query(pts, k=k_neighbors + 1)
    mean_knn = dists[:, 1:].mean(axis=1)
    cutoff = mean_knn.mean() + std_multiplier * mean_knn.std()
    return pts[mean_knn <= cutoff]


def load_point_cloud(path) -> PointCloud:
    """Read a text cloud: one "x y z" per line, '#' comments ignored."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"bad point line: {line!r}")
            rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    return PointCloud(points=pts)
