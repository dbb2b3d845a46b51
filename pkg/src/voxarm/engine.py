"""Closed-loop scenario engine.

One control tick runs at dt (default 5 ms).  Map work (clearing both voxel
grids, inserting the body proxy and the synthetic obstacle cloud, and the
distance transforms) runs at camera cadence (default 30 Hz); every tick
queries the freshest fields, builds the task levels and integrates.  Stage
timings are measured where the stage ran and reported as 0 on ticks where it
did not.

Distance fields are memoized on a digest of the occupancy grid: when the
occupied voxel set did not change between refreshes (a static body proxy, an
empty environment) the previous field is reused.  The reuse is observationally
pure, the field is a function of occupancy alone.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from .controller import scale_to_velocity_limit, solve_priority_stack
from .edt import pba_edt
from .grids import FilterConfig, PointCloud, VoxelGrid
from .movers import make_mover
from .robot import (load_robot, matrix_to_quat, quat_to_matrix,
                    self_obstacle_links, voxelize_link)
from .scenario import Scenario
from .tasks import (CollisionTaskState, TaskLevel, ee_pose_task,
                    joint_limit_tasks, update_collision_tasks)


class StageFault(RuntimeError):
    """A pipeline stage failed; the tick is aborted and the run flagged."""

    def __init__(self, stage: str, detail: str):
        super().__init__(f"{stage}: {detail}")
        self.stage = stage
        self.detail = detail


@dataclass
class TickRecord:
    t: float
    q: np.ndarray
    qdot: np.ndarray
    centers: np.ndarray          # sphere centers, world, (m, 3)
    x_env: np.ndarray            # per-sphere obstacle distance, inf if none
    x_self: np.ndarray
    a_env: np.ndarray
    a_self: np.ndarray
    ee_pos_err: float
    ee_rot_err: float
    timings: dict


@dataclass
class RunLog:
    scenario_name: str
    n_joints: int
    n_spheres: int
    radii: np.ndarray
    buffers: np.ndarray
    records: list[TickRecord] = field(default_factory=list)
    faulted: bool = False
    fault_stage: str | None = None
    fault_detail: str | None = None
    wall_time_s: float = 0.0

    def header(self) -> list[str]:
        n, m = self.n_joints, self.n_spheres
        cols = ["t"]
        cols += [f"q{j}" for j in range(n)]
        cols += [f"qd{j}" for j in range(n)]
        cols += [f"xc{i}" for i in range(m)]
        cols += [f"xs{i}" for i in range(m)]
        cols += [f"aenv{i}" for i in range(m)]
        cols += [f"aself{i}" for i in range(m)]
        cols += ["ee_pos_err", "ee_rot_err",
                 "t_clear_ms", "t_insert_ms", "t_edt_ms", "t_solve_ms"]
        return cols

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for r in self.records:
                row = [r.t, *r.q, *r.qdot, *r.x_env, *r.x_self,
                       *r.a_env, *r.a_self, r.ee_pos_err, r.ee_rot_err,
                       r.timings["clear"], r.timings["insert"],
                       r.timings["edt"], r.timings["solve"]]
                w.writerow(format(float(v), ".17g") for v in row)

    def summary(self) -> dict:
        env_margin = np.inf
        self_margin = np.inf
        max_step = 0.0
        hard = self.radii - self.buffers
        prev_qdot = None
        for r in self.records:
            env_margin = min(env_margin, float(np.min(r.x_env - hard)))
            self_margin = min(self_margin, float(np.min(r.x_self - hard)))
            if prev_qdot is not None:
                max_step = max(max_step,
                               float(np.linalg.norm(r.qdot - prev_qdot)))
            prev_qdot = r.qdot
        last = self.records[-1] if self.records else None
        return {
            "ticks": len(self.records),
            "faulted": self.faulted,
            "fault_stage": self.fault_stage,
            "min_env_margin": env_margin,
            "min_self_margin": self_margin,
            "max_qdot_step": max_step,
            "final_ee_pos_err": last.ee_pos_err if last else np.nan,
            "final_ee_rot_err": last.ee_rot_err if last else np.nan,
            "wall_time_s": self.wall_time_s,
        }


def _stack_levels(name: str, levels) -> TaskLevel:
    return TaskLevel(
        name,
        J=np.vstack([lv.J for lv in levels]),
        activation=np.concatenate([lv.activation for lv in levels]),
        xdot_ref=np.concatenate([lv.xdot_ref for lv in levels]),
        task_values=np.concatenate([lv.task_values for lv in levels]))


class SimEngine:
    """Owns all mutable run state; single-threaded by design."""

    def __init__(self, scenario: Scenario, regularization: bool | None = None):
        self.sc = scenario
        self.chain = load_robot(scenario.robot_path)
        self.spheres = self.chain.build_spheres()
        self.radii = np.array([s.radius for s in self.spheres])
        self.buffers = np.array([s.buffer for s in self.spheres])

        g = scenario.grid
        self.env_grid = VoxelGrid(g.dims, g.voxel_size, g.origin)
        self.self_grid = VoxelGrid(g.dims, g.voxel_size, g.origin)
        self._mask_grid = VoxelGrid(g.dims, g.voxel_size, g.origin)
        self._origin = np.asarray(g.origin, dtype=np.float64)
        self._dims = np.asarray(g.dims, dtype=np.int64)

        self.link_voxels = [voxelize_link(link, g.voxel_size)
                            for link in self.chain.links]
        self.o_links = self_obstacle_links(self.chain)
        self.movers = [make_mover(spec, scenario.cloud.points_per_obstacle,
                                  scenario.cloud.noise_std, scenario.seed)
                       for spec in scenario.obstacles]
        self.filter_cfg = FilterConfig(
            k_neighbors=scenario.cloud.k_neighbors,
            std_multiplier=scenario.cloud.std_multiplier)

        if scenario.q0 is not None:
            if scenario.q0.size != self.chain.n:
                raise ValueError("q0 length does not match the robot")
            self.q = np.clip(scenario.q0, self.chain.q_min, self.chain.q_max)
        else:
            self.q = np.clip(np.zeros(self.chain.n),
                             self.chain.q_min, self.chain.q_max)

        self.reg_enabled = (scenario.regularization
                            if regularization is None else regularization)
        self.state = CollisionTaskState()
        self.tick = 0
        self.t = 0.0
        self._cam_count = 0
        self._fields = {"env": None, "self": None}
        self._digests = {}
        self._manual_target: tuple[np.ndarray, np.ndarray] | None = None
        self._hold_pose = self.chain.ee_pose(self.q)
        self.last_record: TickRecord | None = None

    # -- steering (used by the interactive bridge) --------------------------

    def set_obstacle(self, obstacle_id: int, position) -> bool:
        for m in self.movers:
            if m.obstacle_id == obstacle_id:
                m.pin(position)
                return True
        return False

    def set_target(self, position, quaternion) -> None:
        p = np.asarray(position, dtype=np.float64).reshape(3)
        quat = np.asarray(quaternion, dtype=np.float64).reshape(4)
        self._manual_target = (p, quat / np.linalg.norm(quat))

    def set_regularization(self, enabled: bool) -> None:
        self.reg_enabled = bool(enabled)

    # -- queries -------------------------------------------------------------

    def target_pose(self, t: float) -> np.ndarray:
        if self._manual_target is not None:
            p, quat = self._manual_target
            T = np.eye(4)
            T[:3, :3] = quat_to_matrix(quat)
            T[:3, 3] = p
            return T
        active = None
        for tt in self.sc.ee_targets:
            if tt.t <= t + 1e-12:
                active = tt
        return active.pose() if active is not None else self._hold_pose

    def _site_world(self, key: str, center: np.ndarray):
        fld = self._fields[key]
        if fld is None:
            return None
        idx = np.floor((center - self._origin) / self.sc.grid.voxel_size)
        idx = np.clip(idx.astype(np.int64), 0, self._dims - 1)
        site = fld.site_index(tuple(int(v) for v in idx))
        if site is None:
            return None
        return self._origin + (np.asarray(site) + 0.5) * self.sc.grid.voxel_size

    # -- the pipeline ---------------------------------------------------------

    def step(self) -> TickRecord:
        timings = {"clear": 0.0, "insert": 0.0, "edt": 0.0, "solve": 0.0}
        stage = "fk"
        try:
            if not np.isfinite(self.q).all():
                raise ValueError("non-finite joint position")
            frames = self.chain.forward_kinematics(self.q)

            if self.t + 1e-9 >= self._cam_count / self.sc.camera_hz:
                stage = "clear"
                t0 = time.perf_counter()
                self.env_grid.clear()
                self.self_grid.clear()
                self._mask_grid.clear()
                timings["clear"] = (time.perf_counter() - t0) * 1e3

                stage = "insert"
                t0 = time.perf_counter()
                for li in self.o_links:
                    self.self_grid.insert_voxel_set(self.link_voxels[li],
                                                    frames[li])
                for li in range(self.chain.n):
                    self._mask_grid.insert_voxel_set(self.link_voxels[li],
                                                     frames[li])
                clouds = [m.cloud_points(self.t) for m in self.movers]
                pts = (np.concatenate(clouds) if clouds
                       else np.empty((0, 3)))
                self.env_grid.insert_point_cloud(PointCloud(pts),
                                                 self.filter_cfg,
                                                 robot_mask=self._mask_grid)
                timings["insert"] = (time.perf_counter() - t0) * 1e3

                stage = "edt"
                t0 = time.perf_counter()
                for key, grid in (("env", self.env_grid),
                                  ("self", self.self_grid)):
                    occ = grid.occupancy_mask()
                    dig = hashlib.blake2b(occ.tobytes(),
                                          digest_size=16).digest()
                    if self._digests.get(key) != dig:
                        self._fields[key] = pba_edt(
                            occ, voxel_size=self.sc.grid.voxel_size,
                            workers=self.sc.workers)
                        self._digests[key] = dig
                timings["edt"] = (time.perf_counter() - t0) * 1e3
                self._cam_count += 1

            stage = "sites"
            centers = np.array([
                frames[s.link_index][:3, :3] @ s.center
                + frames[s.link_index][:3, 3] for s in self.spheres])
            env_sites = [self._site_world("env", c) for c in centers]
            if self.sc.self_collision:
                self_sites = [self._site_world("self", c) for c in centers]
            else:
                self_sites = [None] * len(self.spheres)

            stage = "tasks"
            jl = joint_limit_tasks(self.q, self.chain.q_min, self.chain.q_max,
                                   self.sc.joint_limits)
            env_lv, self_lv = update_collision_tasks(
                self.chain, self.q, self.spheres, centers, env_sites,
                self_sites, self.sc.avoidance, self.state)
            ca = _stack_levels("collision_avoidance", [env_lv, self_lv])
            ee = ee_pose_task(self.chain, self.q, self.target_pose(self.t),
                              self.sc.ee_gains)

            stage = "solve"
            t0 = time.perf_counter()
            qdot = solve_priority_stack(
                [jl, ca, ee], self.sc.reg if self.reg_enabled else None)
            qdot = scale_to_velocity_limit(qdot, self.sc.qdot_max)
            timings["solve"] = (time.perf_counter() - t0) * 1e3

            stage = "integrate"
            if not np.isfinite(qdot).all():
                raise ValueError("non-finite joint velocity")
            record = TickRecord(
                t=self.t, q=self.q.copy(), qdot=qdot.copy(), centers=centers,
                x_env=env_lv.task_values.copy(),
                x_self=self_lv.task_values.copy(),
                a_env=env_lv.activation.copy(),
                a_self=self_lv.activation.copy(),
                ee_pos_err=float(np.linalg.norm(ee.task_values[:3])),
                ee_rot_err=float(np.linalg.norm(ee.task_values[3:])),
                timings=timings)
            self.q = np.clip(self.q + qdot * self.sc.dt,
                             self.chain.q_min, self.chain.q_max)
            if not np.isfinite(self.q).all():
                raise ValueError("non-finite joint position")
            self.tick += 1
            self.t = self.tick * self.sc.dt
            self.last_record = record
            return record
        except StageFault:
            raise
        except Exception as exc:
            raise StageFault(stage, str(exc)) from exc

    def run(self, ticks: int | None = None, csv_path=None) -> RunLog:
        if ticks is None:
            ticks = int(round(self.sc.duration / self.sc.dt))
        log = RunLog(scenario_name=self.sc.name, n_joints=self.chain.n,
                     n_spheres=len(self.spheres), radii=self.radii,
                     buffers=self.buffers)
        t0 = time.perf_counter()
        for _ in range(ticks):
            try:
                log.records.append(self.step())
            except StageFault as f:
                log.faulted = True
                log.fault_stage = f.stage
                log.fault_detail = f.detail
                break
        log.wall_time_s = time.perf_counter() - t0
        if csv_path is not None:
            log.write_csv(csv_path)
        return log

    # -- wire format for the interactive bridge ------------------------------

    def snapshot(self) -> dict | None:
        """Immutable JSON-ready view of the last completed tick."""
        rec = self.last_record
        if rec is None:
            return None

        def wire(x: float) -> float:
            return float(x) if np.isfinite(x) else -1.0

        spheres = []
        for i, s in enumerate(self.spheres):
            spheres.append({
                "c": [float(v) for v in rec.centers[i]],
                "r": float(s.radius),
                "xc": wire(rec.x_env[i]),
                "xs": wire(rec.x_self[i]),
                "a": float(max(rec.a_env[i], rec.a_self[i])),
            })
        pose = self.chain.ee_pose(rec.q)
        target = self.target_pose(rec.t)

        def pose7(T: np.ndarray) -> list[float]:
            return [float(v) for v in T[:3, 3]] + \
                   [float(v) for v in matrix_to_quat(T[:3, :3])]

        return {
            "type": "snapshot",
            "t": float(rec.t),
            "q": [float(v) for v in rec.q],
            "spheres": spheres,
            "obstacles": [{"id": m.obstacle_id,
                           "position": [float(v) for v in m.position(rec.t)]}
                          for m in self.movers],
            "ee": {"pose": pose7(pose), "target": pose7(target)},
            "timings": {"clear": rec.timings["clear"],
                        "insert": rec.timings["insert"],
                        "edt": rec.timings["edt"],
                        "solve": rec.timings["solve"]},
        }


def run_scenario(scenario: Scenario, ticks: int | None = None,
                 csv_path=None, regularization: bool | None = None) -> RunLog:
    return SimEngine(scenario, regularization=regularization).run(
        ticks=ticks, csv_path=csv_path)
