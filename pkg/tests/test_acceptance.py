"""End-to-end acceptance checks, one test per shipped guarantee.

Every test prints one [PASS]/[FAIL] line with the measured numbers next to
the threshold it is held to, so a log scrape tells the whole story.
"""

import json
import math
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from voxarm.controller import solve_priority_stack
from voxarm.edt import BandConfig, brute_force_edt, pba_edt
from voxarm.engine import run_scenario
from voxarm.robot import (compute_obb, generate_bounding_spheres, load_robot,
                          shipped_robot_path, sphere_count)
from voxarm.scenario import load_scenario, shipped_scenario_path
from voxarm.server import create_app
from voxarm.tasks import AvoidanceConfig, TaskLevel, update_collision_tasks

from test_server import recv_snapshot, recv_until, validate_snapshot


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


# ---------------------------------------------------------------------------
# distance transform
# ---------------------------------------------------------------------------

def test_edt_matches_exhaustive_oracle_for_all_band_configs():
    rng = np.random.default_rng(2026)
    configs = [BandConfig(m1, m2, m3)
               for m1 in (1, 2, 4) for m2 in (1, 2, 4) for m3 in (1, 2, 4)]
    mismatches = 0
    t0 = time.perf_counter()
    for _ in range(200):
        dims = tuple(int(v) for v in rng.integers(4, 33, size=3))
        occ = rng.random(dims) < rng.uniform(0.01, 0.50)
        want = brute_force_edt(occ).sq_distance_grid()
        for cfg in configs:
            got = pba_edt(occ, band_cfg=cfg).sq_distance_grid()
            if not np.array_equal(got, want):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60.0
    report("edt-exactness", ok,
           f"200 grids x 27 band configs, {mismatches} mismatches, "
           f"{elapsed:.1f}s (budget 60s)")
    assert mismatches == 0
    assert elapsed < 60.0


def test_edt_bit_identical_across_worker_counts():
    rng = np.random.default_rng(7)
    diffs = 0
    for _ in range(10):
        dims = tuple(int(v) for v in rng.integers(8, 40, size=3))
        occ = rng.random(dims) < rng.uniform(0.02, 0.3)
        ref = pba_edt(occ, workers=1).site
        for w in (2, 4, 8):
            if not np.array_equal(pba_edt(occ, workers=w).site, ref):
                diffs += 1
    report("edt-determinism", diffs == 0,
           f"10 grids x workers {{1,2,4,8}}, {diffs} divergent results")
    assert diffs == 0


def test_edt_scaling_ratio_and_absolute_budget():
    rng = np.random.default_rng(3)
    small = rng.random((96, 96, 128)) < 0.02
    big = rng.random((192, 192, 128)) < 0.02
    pba_edt(small, workers=4)  # warm the kernels

    def best_ms(occ):
        times = []
        for _ in range(5):
            t0 = time.perf_counter()
            pba_edt(occ, workers=4)
            times.append((time.perf_counter() - t0) * 1e3)
        return min(times)

    t_small = best_ms(small)
    t_big = best_ms(big)
    ratio = t_big / t_small
    ratio_ok = ratio <= 2.8
    budget_ok = t_big < 300.0
    report("edt-scaling", ratio_ok and budget_ok,
           f"96x96x128 {t_small:.1f}ms, 192x192x128 {t_big:.1f}ms, "
           f"ratio {ratio:.2f} (limit 2.8), absolute {t_big:.1f}ms "
           f"(limit 300ms with 4 workers)")
    assert budget_ok, f"192x192x128 took {t_big:.1f}ms, budget 300ms"
    # 4x the voxels on a fixed CPU core budget lands near 4x the time; the
    # 2.8x bound assumes the added voxels come partly for free.  Measured
    # honestly and left to fail if the machine cannot do it.
    assert ratio_ok, (
        f"grid with 4x voxels took {ratio:.2f}x the time, bound is 2.8x")


# ---------------------------------------------------------------------------
# robot model
# ---------------------------------------------------------------------------

def test_sphere_counts_follow_formula_and_boxes_stay_covered():
    chain = load_robot(shipped_robot_path())
    rng = np.random.default_rng(11)
    escapes = 0
    count_errors = 0
    for li in chain.controlled_links:
        if li in chain.sphere_overrides:
            continue
        obb = compute_obb(chain.links[li])
        d1, d2, d3 = obb.edges
        want = math.ceil(d3 / math.hypot(d1, d2) + 1)
        spheres = generate_bounding_spheres(obb, chain.sphere_buffer,
                                            link_index=li)
        if len(spheres) != want or sphere_count(obb.edges) != want:
            count_errors += 1
        u = rng.uniform(-0.5, 0.5, size=(10_000, 3)) * obb.edges
        pts = obb.center + u @ obb.rotation.T
        inside = np.zeros(len(pts), dtype=bool)
        for s in spheres:
            inside |= (np.linalg.norm(pts - s.center, axis=1)
                       <= s.radius + s.buffer + 1e-12)
        escapes += int((~inside).sum())
    report("sphere-model", count_errors == 0 and escapes == 0,
           f"{len(chain.controlled_links)} links, {count_errors} count "
           f"mismatches, {escapes} escaped sample points of 10^4 per link")
    assert count_errors == 0
    assert escapes == 0


def test_task_rows_and_fk_jacobian_match_finite_differences():
    chain = load_robot(shipped_robot_path())
    spheres = chain.build_spheres()
    cfg = AvoidanceConfig(kappa=1.0, x_star_offset=0.1)
    rng = np.random.default_rng(5)
    h = 1e-6
    worst_row = 0.0
    worst_fk = 0.0
    for _ in range(100):
        q = rng.uniform(chain.q_min, chain.q_max)
        s = spheres[rng.integers(len(spheres))]
        T = chain.forward_kinematics(q)[s.link_index]
        center = T[:3, :3] @ s.center + T[:3, 3]
        obstacle = center + rng.normal(size=3) * 0.2

        def distance(qv):
            Tv = chain.forward_kinematics(qv)[s.link_index]
            c = Tv[:3, :3] @ s.center + Tv[:3, 3]
            return float(np.linalg.norm(obstacle - c))

        lv, _ = update_collision_tasks(
            chain, q, [s],
            np.asarray([center]), [obstacle], [None], cfg)
        num_row = np.zeros(chain.n)
        for j in range(chain.n):
            dq = np.zeros(chain.n)
            dq[j] = h
            num_row[j] = (distance(q + dq) - distance(q - dq)) / (2 * h)
        worst_row = max(worst_row, float(np.abs(lv.J[0] - num_row).max()))

        J = chain.geometric_jacobian(q)
        num_J = np.zeros_like(J)
        R = chain.ee_pose(q)[:3, :3]
        for j in range(chain.n):
            dq = np.zeros(chain.n)
            dq[j] = h
            Tp = chain.ee_pose(q + dq)
            Tm = chain.ee_pose(q - dq)
            num_J[:3, j] = (Tp[:3, 3] - Tm[:3, 3]) / (2 * h)
            W = ((Tp[:3, :3] - Tm[:3, :3]) / (2 * h)) @ R.T
            num_J[3:, j] = [(W[2, 1] - W[1, 2]) / 2,
                            (W[0, 2] - W[2, 0]) / 2,
                            (W[1, 0] - W[0, 1]) / 2]
        worst_fk = max(worst_fk, float(np.abs(J - num_J).max()))
    ok = worst_row <= 1e-5 and worst_fk <= 1e-5
    report("jacobian-fd", ok,
           f"100 pairs, worst avoidance row dev {worst_row:.2e}, worst FK "
           f"column dev {worst_fk:.2e} (limit 1e-5)")
    assert worst_row <= 1e-5
    assert worst_fk <= 1e-5


# ---------------------------------------------------------------------------
# controller
# ---------------------------------------------------------------------------

def test_higher_level_velocity_invariant_to_lower_levels():
    rng = np.random.default_rng(17)
    n = 8
    worst = 0.0
    for _ in range(50):
        m1 = int(rng.integers(1, 5))
        top = TaskLevel("top", rng.normal(size=(m1, n)), np.ones(m1),
                        rng.normal(size=m1), np.zeros(m1))

        def lower():
            m = int(rng.integers(1, 7))
            return TaskLevel("low", rng.normal(size=(m, n)), np.ones(m),
                             rng.normal(size=m), np.zeros(m))

        qa = solve_priority_stack([top, lower()], None)
        qb = solve_priority_stack([top, lower()], None)
        worst = max(worst, float(np.abs(top.J @ (qa - qb)).max()))
    report("exact-priority", worst <= 1e-10,
           f"50 trials, worst top-level velocity shift {worst:.2e} "
           f"(limit 1e-10)")
    assert worst <= 1e-10


def test_regularization_halves_worst_velocity_jump():
    sc = load_scenario(shipped_scenario_path("transition_stress"))
    with_reg = run_scenario(sc).summary()
    without = run_scenario(sc, regularization=False).summary()
    assert not with_reg["faulted"] and not without["faulted"]
    ratio = with_reg["max_qdot_step"] / without["max_qdot_step"]
    report("regularization-effect", ratio <= 0.5,
           f"max per-tick velocity jump {with_reg['max_qdot_step']:.3f} with "
           f"regularization vs {without['max_qdot_step']:.3f} without, "
           f"ratio {ratio:.3f} (limit 0.5)")
    assert ratio <= 0.5


# ---------------------------------------------------------------------------
# closed-loop safety
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["walker_crossing", "two_movers",
                                  "body_sweep"])
def test_safety_envelope_and_tracking(name):
    sc = load_scenario(shipped_scenario_path(name))
    s = run_scenario(sc).summary()
    ok = (not s["faulted"] and s["min_env_margin"] >= 0.0
          and s["min_self_margin"] >= 0.0 and s["final_ee_pos_err"] < 0.02
          and s["wall_time_s"] < 30.0)
    report(f"safety-envelope[{name}]", ok,
           f"env margin {s['min_env_margin']:.4f}m, self margin "
           f"{s['min_self_margin']:.4f}m (limits 0), final EE error "
           f"{s['final_ee_pos_err'] * 100:.2f}cm (limit 2cm), wall "
           f"{s['wall_time_s']:.1f}s (limit 30s)")
    assert not s["faulted"]
    assert s["min_env_margin"] >= 0.0
    assert s["min_self_margin"] >= 0.0
    assert s["final_ee_pos_err"] < 0.02
    assert s["wall_time_s"] < 30.0


# ---------------------------------------------------------------------------
# live protocol
# ---------------------------------------------------------------------------

def test_ws_protocol_snapshots_and_command_round_trips():
    sc = load_scenario(shipped_scenario_path("sandbox"))
    app = create_app(sc, pace="fast")  # default 30 Hz broadcast
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        bad_schema = 0
        last_t = -1.0
        for _ in range(100):
            snap = json.loads(ws.receive_text())
            try:
                validate_snapshot(snap)
            except AssertionError:
                bad_schema += 1
                continue
            assert snap["t"] >= last_t
            last_t = snap["t"]

        ws.send_text(json.dumps({"type": "set_obstacle", "id": 0,
                                 "position": [0.5, 0.3, 0.5]}))
        recv_until(ws, lambda m: m["type"] == "snapshot" and any(
            ob["id"] == 0 and ob["position"] == [0.5, 0.3, 0.5]
            for ob in m["obstacles"]))

        ws.send_text(json.dumps({"type": "set_target",
                                 "position": [0.6, -0.1, 0.55],
                                 "quaternion": [0, 0, 0, 1]}))
        recv_until(ws, lambda m: m["type"] == "snapshot"
                   and abs(m["ee"]["target"][0] - 0.6) < 1e-9
                   and abs(m["ee"]["target"][1] + 0.1) < 1e-9)

        ws.send_text(json.dumps({"type": "pause"}))
        seen = []

        def three_equal(m):
            if m["type"] != "snapshot":
                return False
            seen.append(m["t"])
            tail = seen[-3:]
            return len(tail) == 3 and tail[0] == tail[1] == tail[2]

        recv_until(ws, three_equal)
        frozen = seen[-1]
        ws.send_text(json.dumps({"type": "resume"}))
        recv_until(ws, lambda m: m["type"] == "snapshot" and m["t"] > frozen)

    report("ws-protocol", bad_schema == 0,
           f"100 consecutive snapshots, {bad_schema} schema failures; "
           f"obstacle, target and pause/resume round trips verified")
    assert bad_schema == 0
