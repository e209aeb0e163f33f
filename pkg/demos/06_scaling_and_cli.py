"""Solver scaling with gate count, and the file-based CLI workflow.

Planning cost grows roughly linearly with the number of gates because the
spline solve is banded and the penalty is sampled per segment.  The same
planner is exposed through the `raceplan` command-line tool; this script
round-trips a track through `plan` and validates the exported trajectory
with `check`.
"""

import json
import tempfile
import time
from pathlib import Path

import numpy as np

from raceplan import BoundaryCondition, build_sequence, serialize, solve
from raceplan.cli import main as raceplan_cli
from raceplan.tracks import loop_track


def main():
    track = loop_track()
    bc0 = BoundaryCondition.hover(track.start)
    bcf = BoundaryCondition.hover(track.finish)

    print("scaling with gate count (the same loop flown 1..4 times):")
    sizes, walls = [], []
    for laps in (1, 2, 4):
        seq = build_sequence(track, laps=laps)
        tic = time.perf_counter()
        result = solve(seq, track.quad, bc0, bcf)
        wall = time.perf_counter() - tic
        sizes.append(len(seq))
        walls.append(wall)
        print(f"  {len(seq):2d} gates: {wall:5.1f} s wall, "
              f"flight time {result.total_time:.2f} s")
    exponent = np.polyfit(np.log(sizes), np.log(walls), 1)[0]
    print(f"  empirical scaling exponent: {exponent:.2f}")

    print("\nCLI round trip:")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        track_path = tmp / "loop.yaml"
        track_path.write_text(serialize(track))
        out = tmp / "out"
        code = raceplan_cli(["plan", str(track_path), "--out-dir", str(out)])
        print(f"  raceplan plan  -> exit {code}")
        summary = json.loads((out / "summary.json").read_text())
        print(f"  summary: total_time {summary['total_time']:.3f} s, "
              f"path_length {summary['path_length']:.1f} m")
        code = raceplan_cli(
            ["check", str(out / "trajectory.csv"), str(track_path)]
        )
        print(f"  raceplan check -> exit {code}")


if __name__ == "__main__":
    main()
