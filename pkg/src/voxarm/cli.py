"""Command line front door: run scenarios, benchmark the EDT, self-check.

voxarm run <scenario> [--csv out.csv] [--ticks N] [--no-regularization]
voxarm run <scenario> --serve 8000
voxarm bench edt --dims 96,96,96 --voxel 0.02 --density 0.02 --workers 1,2,4
voxarm verify
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .edt import BandConfig, brute_force_edt, pba_edt
from .engine import run_scenario
from .robot import (buffered_cover_holds, compute_obb, load_robot,
                    shipped_robot_path)
from .scenario import (GridSpec, Scenario, load_scenario,
                       shipped_scenario_names, shipped_scenario_path)


def _resolve_scenario(ref: str):
    p = Path(ref)
    if p.is_file():
        return load_scenario(p)
    try:
        return load_scenario(shipped_scenario_path(ref))
    except FileNotFoundError:
        names = ", ".join(shipped_scenario_names())
        raise SystemExit(f"no scenario file {ref!r}; shipped names: {names}")


def _cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.serve is not None:
        from .server import serve

        print(f"serving scenario {scenario.name!r} on "
              f"ws://{args.host}:{args.serve}/ws")
        serve(scenario, host=args.host, port=args.serve)
        return 0

    log = run_scenario(scenario, ticks=args.ticks, csv_path=args.csv,
                       regularization=False if args.no_regularization else None)
    s = log.summary()
    print(f"scenario {scenario.name}: {s['ticks']} ticks, "
          f"wall {s['wall_time_s']:.2f} s")
    print(f"  min env margin   {s['min_env_margin']:.4f} m")
    print(f"  min self margin  {s['min_self_margin']:.4f} m")
    print(f"  final EE error   {s['final_ee_pos_err']:.4f} m / "
          f"{s['final_ee_rot_err']:.4f} rad")
    if args.csv:
        print(f"  log written to   {args.csv}")
    if s["faulted"]:
        print(f"  FAULT in stage {s['fault_stage']}: {log.fault_detail}")
        return 1
    return 0


def _cmd_bench(args) -> int:
    if args.what != "edt":
        raise SystemExit(f"unknown bench target {args.what!r}")
    dims = tuple(int(v) for v in args.dims.split(","))
    if len(dims) != 3 or min(dims) < 1:
        raise SystemExit("--dims needs three positive integers")
    bands = None
    if args.bands:
        parts = [int(v) for v in args.bands.split(",")]
        if len(parts) != 3:
            raise SystemExit("--bands needs three integers")
        bands = BandConfig(*parts)
    workers = [int(v) for v in args.workers.split(",")]

    rng = np.random.default_rng(args.seed)
    occ = rng.random(dims) < args.density
    occupied = int(occ.sum())
    print(f"dims {dims[0]}x{dims[1]}x{dims[2]}  voxel {args.voxel} m  "
          f"density {100 * args.density:.1f}% ({occupied} voxels)  "
          f"bands {bands or 'auto'}")
    pba_edt(occ, band_cfg=bands, voxel_size=args.voxel, workers=workers[0])
    print(f"{'workers':>8} {'best ms':>10} {'mean ms':>10}")
    for w in workers:
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            pba_edt(occ, band_cfg=bands, voxel_size=args.voxel, workers=w)
            times.append((time.perf_counter() - t0) * 1e3)
        print(f"{w:>8} {min(times):>10.2f} {np.mean(times):>10.2f}")
    return 0


# ---------------------------------------------------------------------------
# verify: quick self-checks against first-principles oracles
# ---------------------------------------------------------------------------

def _check_edt_exact(rng) -> str | None:
    for trial in range(12):
        dims = tuple(rng.integers(6, 22, size=3))
        occ = rng.random(dims) < rng.uniform(0.02, 0.35)
        got = pba_edt(occ).sq_distance_grid()
        want = brute_force_edt(occ).sq_distance_grid()
        if not np.array_equal(got, want):
            return f"mismatch on trial {trial} dims {dims}"
    return None


def _check_edt_workers(rng) -> str | None:
    for trial in range(2):
        occ = rng.random((24, 20, 28)) < 0.08
        ref = pba_edt(occ, workers=1).site
        for w in (2, 4):
            if not np.array_equal(pba_edt(occ, workers=w).site, ref):
                return f"workers={w} differs on trial {trial}"
    return None


def _check_sphere_cover(rng) -> str | None:
    chain = load_robot(shipped_robot_path())
    for li in chain.controlled_links:
        if li in chain.sphere_overrides:
            continue
        obb = compute_obb(chain.links[li])
        if not buffered_cover_holds(obb, chain.sphere_buffer):
            return f"link {li}: analytic cover bound fails"
        spheres = chain.build_spheres()
        mine = [s for s in spheres if s.link_index == li]
        u = rng.uniform(-0.5, 0.5, size=(2000, 3)) * obb.edges
        pts = obb.center + u @ obb.rotation.T
        d = np.stack([np.linalg.norm(pts - s.center, axis=1)
                      - (s.radius + s.buffer) for s in mine])
        worst = d.min(axis=0).max()
        if worst > 1e-9:
            return f"link {li}: box point escapes by {worst:.2e} m"
    return None


def _check_jacobian_fd(rng) -> str | None:
    chain = load_robot(shipped_robot_path())
    spheres = chain.build_spheres()
    h = 1e-6
    for trial in range(10):
        q = rng.uniform(chain.q_min, chain.q_max)
        s = spheres[rng.integers(len(spheres))]

        def center(qv):
            T = chain.forward_kinematics(qv)[s.link_index]
            return T[:3, :3] @ s.center + T[:3, 3]

        J = chain.position_jacobian(q, s.link_index, center(q))
        num = np.zeros((3, chain.n))
        for j in range(chain.n):
            dq = np.zeros(chain.n)
            dq[j] = h
            num[:, j] = (center(q + dq) - center(q - dq)) / (2 * h)
        err = np.abs(J - num).max()
        if err > 1e-5:
            return f"trial {trial}: max deviation {err:.2e}"
    return None


def _check_priority_exact(rng) -> str | None:
    from .controller import solve_priority_stack
    from .tasks import TaskLevel

    for trial in range(10):
        n = 8
        m1, m2 = rng.integers(1, 4), rng.integers(1, 5)
        top = TaskLevel("top", rng.normal(size=(m1, n)), np.ones(m1),
                        rng.normal(size=m1), np.zeros(m1))
        low = TaskLevel("low", rng.normal(size=(m2, n)), np.ones(m2),
                        rng.normal(size=m2), np.zeros(m2))
        qdot = solve_priority_stack([top, low], None)
        resid = np.abs(top.J @ qdot - top.xdot_ref).max()
        if resid > 1e-10:
            return f"trial {trial}: top-level residual {resid:.2e}"
    return None


def _check_sim_envelope(rng) -> str | None:
    sc = Scenario(
        name="verify", robot_path=shipped_robot_path(),
        grid=GridSpec(dims=(48, 48, 48), voxel_size=0.04,
                      origin=(-0.96, -0.96, -0.24)),
        duration=0.5, q0=[0, 0, 0.2, 0, 0.5, 0, 0.3, 0],
        obstacles=[{"id": 0, "type": "static", "position": [0.85, 0.0, 0.45]}])
    s = run_scenario(sc).summary()
    if s["faulted"]:
        return f"faulted in stage {s['fault_stage']}"
    if s["min_env_margin"] < 0 or s["min_self_margin"] < 0:
        return (f"margin violated: env {s['min_env_margin']:.4f}, "
                f"self {s['min_self_margin']:.4f}")
    return None


def _cmd_verify(args) -> int:
    checks = [
        ("edt-exact", _check_edt_exact),
        ("edt-workers", _check_edt_workers),
        ("sphere-cover", _check_sphere_cover),
        ("jacobian-fd", _check_jacobian_fd),
        ("priority-exact", _check_priority_exact),
        ("sim-envelope", _check_sim_envelope),
    ]
    failures = 0
    for name, fn in checks:
        t0 = time.perf_counter()
        detail = fn(np.random.default_rng(args.seed))
        ms = (time.perf_counter() - t0) * 1e3
        if detail is None:
            print(f"PASS {name} ({ms:.0f} ms)")
        else:
            print(f"FAIL {name}: {detail}")
            failures += 1
    return 1 if failures else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="voxarm")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and print a summary")
    run.add_argument("scenario", help="scenario file or shipped name")
    run.add_argument("--csv", default=None, help="write the tick log here")
    run.add_argument("--ticks", type=int, default=None,
                     help="override tick count from the scenario duration")
    run.add_argument("--no-regularization", action="store_true")
    run.add_argument("--serve", type=int, default=None, metavar="PORT",
                     help="expose the scenario as a live sandbox instead")
    run.add_argument("--host", default="127.0.0.1")
    run.set_defaults(fn=_cmd_run)

    bench = sub.add_parser("bench", help="micro-benchmarks")
    bench.add_argument("what", choices=["edt"])
    bench.add_argument("--dims", default="96,96,96")
    bench.add_argument("--voxel", type=float, default=0.02)
    bench.add_argument("--density", type=float, default=0.02)
    bench.add_argument("--bands", default=None, help="m1,m2,m3")
    bench.add_argument("--repeat", type=int, default=5)
    bench.add_argument("--workers", default="1,2,4,8")
    bench.add_argument("--seed", type=int, default=0)
    bench.set_defaults(fn=_cmd_bench)

    ver = sub.add_parser("verify", help="fast oracle self-checks")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(fn=_cmd_verify)

    args = ap.parse_args(argv)
    if args.command == "run" and args.serve is not None and (
            args.csv or args.ticks):
        ap.error("--serve cannot be combined with --csv or --ticks")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
