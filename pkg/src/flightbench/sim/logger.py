"""Trajectory CSV logger (stands in for a visualiser)."""

from __future__ import annotations

import csv
from typing import IO

COLUMNS = (
    ["t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"]
    + [f"delta{i}" for i in range(10)]
    + [f"u{i}" for i in range(6)]
)


def _fmt(x: float) -> str:
    return repr(float(x))


class TrajectoryLogger:
    def __init__(self, stream: IO[str]):
        self.stream = stream
        self.writer = csv.writer(stream, lineterminator="\n")
        self.writer.writerow(COLUMNS)
        self.rows = 0

    def log(self, t, state, delta, u) -> None:
        row = [t, *state.p, *state.v, *state.q, *state.w, *delta, *u]
        self.writer.writerow([_fmt(x) for x in row])
        self.rows += 1
