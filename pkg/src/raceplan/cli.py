"""Command-line front end: plan trajectories and verify exported ones.

Exit codes: 0 ok, 1 validation/check failure, 2 solver failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import trackio
from .cost import PenaltyWeights, SamplingConfig
from .errors import ParseError, RaceplanError, ValidationError
from .gates import BallGate, contains
from .optimizer import OptimizerConfig, solve
from .spline import BoundaryCondition

CSV_HEADER = "# raceplan trajectory v1"
CSV_COLUMNS = (
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,f1,f2,f3,f4"
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3


def _write_csv(path: Path, times, states, controls):
    rows = np.hstack([times[:, None], states, controls])
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(CSV_COLUMNS + "\n")
        for row in rows:
            fh.write(",".join(format(x, ".12g") for x in row) + "\n")


def _read_csv(path: Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValidationError(f"{path}: unrecognized trajectory header")
        columns = fh.readline().strip()
        if columns != CSV_COLUMNS:
            raise ValidationError(f"{path}: unexpected column layout")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != 18:
        raise ValidationError(f"{path}: expected 18 columns")
    return data


def _gate_outline(gate) -> dict:
    if isinstance(gate, BallGate):
        return {"type": "ball", "center": list(map(float, gate.center)),
                "radius": float(gate.radius)}
    return {"type": "polytope",
            "vertices": [list(map(float, v)) for v in gate.vertices]}


def cmd_plan(args) -> int:
    try:
        track = trackio.parse(args.track, strict=args.strict)
        seq = trackio.build_sequence(
            track, mode=args.mode, margin=args.margin, laps=args.laps
        )
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    bc0 = BoundaryCondition.hover(track.start)
    bcf = BoundaryCondition.hover(track.finish)
    opt_cfg = OptimizerConfig(restarts=args.restarts, seed=args.seed)
    try:
        result = solve(
            seq, track.quad, bc0, bcf, opt_cfg=opt_cfg,
            sampling=SamplingConfig(), weights=PenaltyWeights(),
            sample_dt=args.dt,
        )
    except RaceplanError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "trajectory.csv", result.sample_times,
                   result.states, result.controls)
        positions = result.states[:, :3]
        path_length = float(
            np.sum(np.linalg.norm(np.diff(positions, axis=0), axis=1))
        )
        summary = {
            "total_time": result.total_time,
            "gate_times": [float(t) for t in result.gate_times],
            "path_length": path_length,
            "min_rotor_thrust": float(result.controls.min()),
            "max_rotor_thrust": float(result.controls.max()),
            "max_body_rate": float(np.abs(result.states[:, 10:13]).max()),
            "penalty": result.penalty,
            "max_violation": result.max_violation,
            "solver": {
                "iterations": result.diagnostics.iterations,
                "function_evals": result.diagnostics.function_evals,
                "termination": result.diagnostics.termination,
                "final_grad_norm": result.diagnostics.final_grad_norm,
                "wall_time": result.diagnostics.wall_time,
                "seed": result.diagnostics.seed,
            },
        }
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2)
        if args.plot_data:
            plot = {
                "position": [list(map(float, p)) for p in positions],
                "gates": [_gate_outline(g) for g in seq.gates],
            }
            with open(out_dir / "plot.json", "w") as fh:
                json.dump(plot, fh)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"total time: {result.total_time:.4f} s "
          f"({result.diagnostics.termination}, "
          f"{result.diagnostics.iterations} iterations)")
    return EXIT_OK


def _hermite(p0, v0, p1, v1, dt, lam):
    """Cubic Hermite position at fraction ``lam`` of a sample interval."""
    h00 = 2 * lam**3 - 3 * lam**2 + 1
    h10 = lam**3 - 2 * lam**2 + lam
    h01 = -2 * lam**3 + 3 * lam**2
    h11 = lam**3 - lam**2
    return h00 * p0 + h10 * dt * v0 + h01 * p1 + h11 * dt * v1


def _best_traversal(gate, times, positions, velocities, start):
    """Smallest containment residual at or after sample ``start``.

    Returns (residual, sample index).  Samples rarely land exactly on a
    planar gate, so the crossing of the gate plane is reconstructed between
    adjacent samples with cubic Hermite interpolation (the optimum often
    grazes the gate boundary, so chord-level accuracy is not enough); ball
    gates get the closest approach on each linear path segment.
    """
    pts = positions[start:]
    if len(pts) == 0:
        return np.inf, start
    if isinstance(gate, BallGate):
        a, b = pts[:-1], pts[1:]
        seg = b - a
        denom = np.einsum("ij,ij->i", seg, seg)
        lam = np.zeros(len(seg))
        np.divide(np.einsum("ij,ij->i", gate.center - a, seg), denom,
                  out=lam, where=denom > 0)
        lam = np.clip(lam, 0.0, 1.0)
        closest = a + lam[:, None] * seg
        dist = np.linalg.norm(closest - gate.center, axis=1)
        dist = np.append(dist, np.linalg.norm(pts[-1] - gate.center))
        k = int(np.argmin(dist))
        return float(dist[k] - gate.radius), start + k
    if gate.is_planar:
        normal, offset = gate.plane
        vel = velocities[start:]
        ts = times[start:]
        side = pts @ normal - offset
        best, best_k = np.inf, 0
        for k in np.flatnonzero(side[:-1] * side[1:] <= 0):
            dt = ts[k + 1] - ts[k]
            gap = side[k] - side[k + 1]
            lam = side[k] / gap if gap != 0 else 0.0
            # Bisect the Hermite reconstruction onto the gate plane.
            lo, hi = (0.0, 1.0) if side[k] <= 0 else (1.0, 0.0)
            for _ in range(50):
                point = _hermite(pts[k], vel[k], pts[k + 1], vel[k + 1], dt, lam)
                if point @ normal - offset <= 0:
                    lo = lam
                else:
                    hi = lam
                lam = 0.5 * (lo + hi)
            res = contains(gate, point)
            if res < best:
                best, best_k = res, int(k)
        if np.isfinite(best):
            return float(best), start + best_k
        k = int(np.argmin(np.abs(side)))
        return float(contains(gate, pts[k])), start + k
    res = np.array([contains(gate, p) for p in pts])
    k = int(np.argmin(res))
    return float(res[k]), start + k


def cmd_check(args) -> int:
    try:
        track = trackio.parse(args.track, strict=args.strict)
        seq = trackio.build_sequence(
            track, mode=args.mode, margin=args.margin, laps=args.laps
        )
        data = _read_csv(Path(args.trajectory))
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    times = data[:, 0]
    positions = data[:, 1:4]
    velocities = data[:, 8:11]
    quats = data[:, 4:8]
    rates = data[:, 11:14]
    thrusts = data[:, 14:18]
    quad = track.quad
    ok = True

    def report(name, passed, detail=""):
        nonlocal ok
        ok &= passed
        status = "pass" if passed else "FAIL"
        print(f"{status}: {name}" + (f" ({detail})" if detail else ""))

    # Gate containment and traversal order in one ordered sweep.
    idx = 0
    order_ok = True
    containment_ok = True
    for gate in seq.gates:
        res_any, _ = _best_traversal(gate, times, positions, velocities, 0)
        res_after, at = _best_traversal(gate, times, positions, velocities, idx)
        if res_any > 1e-6:
            containment_ok = False
        elif res_after > 1e-6:
            order_ok = False
        else:
            idx = at
    report("gate containment", containment_ok)
    report("traversal order", order_ok)

    f_range = quad.f_max - quad.f_min
    report(
        "rotor thrust bounds",
        bool(np.all(thrusts >= quad.f_min - 0.01 * f_range)
             and np.all(thrusts <= quad.f_max + 0.01 * f_range)),
        f"range [{thrusts.min():.3f}, {thrusts.max():.3f}] N",
    )
    report(
        "body rate bounds",
        bool(np.all(np.abs(rates) <= quad.omega_max[None, :] * 1.01)),
        f"max {np.abs(rates).max():.3f} rad/s",
    )
    norms = np.linalg.norm(quats, axis=1)
    report("quaternion norms", bool(np.all(np.abs(norms - 1) < 1e-6)))
    report("monotone timestamps", bool(np.all(np.diff(times) > 0)))

    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raceplan",
        description="Plan and verify time-optimal trajectories through "
                    "spatial racing gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--mode", choices=["togt", "togt-wp"], default=None,
                       help="gate-region or waypoint-ball planning mode")
        p.add_argument("--laps", type=int, default=None)
        p.add_argument("--margin", type=float, default=None)
        p.add_argument("--strict", action="store_true",
                       help="reject unknown keys in the track file")

    plan = sub.add_parser("plan", help="optimize a trajectory for a track")
    plan.add_argument("track")
    common(plan)
    plan.add_argument("--dt", type=float, default=0.01,
                      help="CSV sampling period, s")
    plan.add_argument("--seed", type=int, default=0)
    plan.add_argument("--restarts", type=int, default=0)
    plan.add_argument("--out-dir", default="out")
    plan.add_argument("--plot-data", action="store_true",
                      help="also write plot.json with path and gate outlines")
    plan.set_defaults(func=cmd_plan)

    check = sub.add_parser("check", help="verify an exported trajectory CSV")
    check.add_argument("trajectory")
    check.add_argument("track")
    common(check)
    check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
