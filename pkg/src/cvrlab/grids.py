"""Uniform time grids and sampled real processes.

Every process lives on a uniform grid over [0, T] and is prolongated by
constant continuation outside the horizon: X_t = X_0 for t <= 0 and
X_t = X_T for t >= T. Off-node evaluation inside [0, T] is linear
interpolation; the regularization estimators only ever read node-aligned
times, so interpolation exists for plotting and window resampling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

__all__ = [
    "TimeGrid",
    "Path",
    "make_grid",
    "eval_extended",
    "write_path_csv",
    "read_path_csv",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i*T/N, i = 0..N."""

    T: float
    N: int

    def __post_init__(self) -> None:
        if not (self.T > 0.0 and np.isfinite(self.T)):
            raise ValueError(f"horizon must be a finite positive time, got {self.T}")
        if self.N < 2:
            raise ValueError(f"need at least 2 steps, got {self.N}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def step_of(self, eps: float) -> int:
        """Return m such that eps = m*dt, or raise if eps is off the grid."""
        m = eps / self.dt
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > 1e-9 * max(1.0, m):
            raise ValueError(f"eps={eps} is not a positive node multiple of dt={self.dt}")
        if mi >= self.N:
            raise ValueError(f"eps={eps} must stay below the horizon ({self.N} steps)")
        return mi


def make_grid(T: float, N: int) -> TimeGrid:
    return TimeGrid(float(T), int(N))


@dataclass(frozen=True, eq=False)
class Path:
    """One real process sampled on a grid; immutable after creation."""

    grid: TimeGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N + 1,):
            raise ValueError(f"expected {self.grid.N + 1} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, t) -> np.ndarray | float:
        return eval_extended(self, t)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])

    def extended_values(self, m_left: int, m_right: int = 0) -> np.ndarray:
        """Node values on the grid extended by m_left nodes before 0 and
        m_right after T, via the constant continuation."""
        v = self.values
        return np.concatenate(
            [np.full(m_left, v[0]), v, np.full(m_right, v[-1])]
        )


def eval_extended(path: Path, t) -> np.ndarray | float:
    """Evaluate with constant continuation outside [0, T] and linear
    interpolation between nodes. Accepts scalars or arrays."""
    out = np.interp(t, path.grid.times, path.values)
    return float(out) if np.isscalar(t) else out


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_path_csv(path: Path, dest, meta: dict | None = None) -> None:
    """Dump a path as `t,value` rows (17 significant digits) plus an optional
    sidecar `<dest>.meta.json` with spec/seed/grid metadata."""
    dest = FsPath(dest)
    with dest.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in zip(path.grid.times, path.values):
            w.writerow([_fmt(t), _fmt(v)])
    if meta is not None:
        record = {"grid": {"T": path.grid.T, "N": path.grid.N}, "label": path.label}
        record.update(meta)
        dest.with_suffix(dest.suffix + ".meta.json").write_text(
            json.dumps(record, sort_keys=True) + "\n"
        )


def read_path_csv(src, label: str = "") -> Path:
    src = FsPath(src)
    with src.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["t", "value"]:
        raise ValueError(f"unexpected header {rows[0]!r} in {src}")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    t, v = data[:, 0], data[:, 1]
    grid = TimeGrid(float(t[-1]), len(t) - 1)
    if not np.allclose(t, grid.times, rtol=0, atol=1e-12 * max(1.0, grid.T)):
        raise ValueError(f"{src} does not hold a uniform grid")
    return Path(grid, v, label=label)
