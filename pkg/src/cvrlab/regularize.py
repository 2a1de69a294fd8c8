"""Epsilon-regularized forward integrals and covariations for real processes.

The defining limits are

    int_0^t Y_s dX_s   = lim_{eps->0+} int_0^t Y_s (X_{s+eps} - X_s)/eps ds
    [X, Y]_t           = lim_{eps->0+} (1/eps) int_0^t (X_{s+eps}-X_s)(Y_{s+eps}-Y_s) ds

taken in probability (resp. ucp). With eps restricted to node multiples of
the mesh, the left-endpoint Riemann sum makes every estimator an exact
finite sum; the extension convention reads X beyond the horizon. The
``converge`` harness turns "in probability" into a falsifiable verdict:
quantiles of the error statistic over replicated draws must be small at the
finest eps and decay monotonically (with slack) along a ladder of eps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grids import Path, TimeGrid

__all__ = [
    "GridMismatchError",
    "EpsilonLadder",
    "default_ladder",
    "ConvergenceReport",
    "forward_integral_eps",
    "improper_value",
    "covariation_eps",
    "mutual_covariations",
    "converge",
]

MONOTONE_SLACK = 1.2  # 20% slack absorbs Monte Carlo noise in the decay rule


class GridMismatchError(ValueError):
    pass


def _common_grid(*paths: Path) -> TimeGrid:
    grid = paths[0].grid
    for p in paths[1:]:
        if p.grid != grid:
            raise GridMismatchError(f"paths live on different grids: {p.grid} vs {grid}")
    return grid


def _shifted(values: np.ndarray, m: int) -> np.ndarray:
    """values read m nodes ahead through the constant extension."""
    return np.concatenate([values[m:], np.full(m, values[-1])])


def forward_integral_eps(Y: Path, X: Path, eps: float) -> Path:
    """Regularized forward integral of Y against X at fixed eps.

    Returns the path t_i -> dt * sum_{j<i} Y_{t_j} (X_{t_j+eps} - X_{t_j})/eps.
    """
    grid = _common_grid(Y, X)
    m = grid.step_of(eps)
    dq = (_shifted(X.values, m) - X.values) / (m * grid.dt)
    a = Y.values[:-1] * dq[:-1]
    out = np.concatenate([[0.0], np.cumsum(a) * grid.dt])
    return Path(grid, out, label=f"fwd[{Y.label};{X.label};eps={eps:g}]")


def improper_value(integral: Path, eps: float) -> float:
    """Extrapolated value at T of a forward-integral path, read off the last
    two nodes at or below T - eps. Boundary nodes above T - eps are damped
    by the extension, so the improper limit at T is flagged separately."""
    grid = integral.grid
    m = grid.step_of(eps)
    i = grid.N - m
    v = integral.values
    return float(v[i] + (v[i] - v[i - 1]) * m)


def covariation_eps(X: Path, Y: Path, eps: float) -> Path:
    """Regularized covariation [X, Y] at fixed eps (left-endpoint sums)."""
    grid = _common_grid(X, Y)
    m = grid.step_of(eps)
    dx = _shifted(X.values, m) - X.values
    dy = _shifted(Y.values, m) - Y.values
    a = dx[:-1] * dy[:-1]
    out = np.concatenate([[0.0], np.cumsum(a) * (grid.dt / (m * grid.dt))])
    return Path(grid, out, label=f"cov[{X.label},{Y.label};eps={eps:g}]")


def mutual_covariations(components: Sequence[Path], eps: float) -> list[list[Path]]:
    """Matrix of pairwise eps-covariations; symmetric by construction."""
    n = len(components)
    _common_grid(*components)
    out: list[list[Path | None]] = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            c = covariation_eps(components[i], components[j], eps)
            out[i][j] = c
            out[j][i] = c
    return out  # type: ignore[return-value]


# ------------------------------------------------------------------ harness


@dataclass(frozen=True)
class EpsilonLadder:
    """Decreasing eps values (node multiples of the mesh) plus a replica count."""

    values: tuple[float, ...]
    replicas: int = 100

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ValueError("ladder needs at least one eps")
        if any(b >= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"ladder must be strictly decreasing, got {self.values}")
        if self.replicas < 1:
            raise ValueError("need at least one replica")

    def validate(self, grid: TimeGrid, tau: float | None = None) -> None:
        for eps in self.values:
            grid.step_of(eps)  # raises unless a node multiple in [dt, T)
            if tau is not None and eps >= tau:
                raise ValueError(f"eps={eps} must stay below the window lag {tau}")

    def steps(self, grid: TimeGrid) -> tuple[int, ...]:
        return tuple(grid.step_of(eps) for eps in self.values)


DEFAULT_LADDER_STEPS = (64, 32, 16, 8)


def default_ladder(grid: TimeGrid, replicas: int = 100,
                   steps: Sequence[int] = DEFAULT_LADDER_STEPS) -> EpsilonLadder:
    return EpsilonLadder(tuple(s * grid.dt for s in steps), replicas)


@dataclass(frozen=True)
class ConvergenceReport:
    """Quantiles of the estimator error along an eps ladder.

    ``statistic`` is "sup" (sup over grid times, the ucp surrogate) or
    "terminal" (deviation at T, the fixed-time surrogate). The verdict
    passes iff the median at the smallest eps is below tolerance and the
    medians are nonincreasing along the ladder up to 20% slack.
    """

    rows: tuple[tuple[float, float, float], ...]  # (eps, median, q90), eps decreasing
    statistic: str
    tolerance: float
    verdict: str  # "pass" | "fail" | "informational"
    reference: str = ""

    @property
    def medians(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _error_stat(est: Path, target: Path, statistic: str) -> float:
    if statistic == "sup":
        return float(np.max(np.abs(est.values - target.values)))
    if statistic == "terminal":
        return float(abs(est.values[-1] - target.values[-1]))
    raise ValueError(f"unknown statistic {statistic!r}")


def _verdict(rows: Sequence[tuple[float, float, float]], tolerance: float) -> str:
    medians = [r[1] for r in rows]
    ok = medians[-1] < tolerance
    for prev, nxt in zip(medians, medians[1:]):
        if nxt > MONOTONE_SLACK * prev:
            ok = False
    return "pass" if ok else "fail"


def converge(
    estimate: Callable[[int, float], Path],
    target: Callable[[int], Path],
    ladder: EpsilonLadder,
    tolerance: float,
    base_seed: int = 0,
    statistic: str = "sup",
    workers: int = 1,
) -> ConvergenceReport:
    """Certify convergence of ``estimate(seed, eps)`` to ``target(seed)``.

    Replica r draws with seed ``base_seed + r``. Tasks over (eps, replica)
    are pure, so they may run on a thread pool; the report is assembled
    from sorted keys and does not depend on scheduling.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    seeds = [base_seed + r for r in range(ladder.replicas)]

    def one(eps: float, seed: int) -> float:
        return _error_stat(estimate(seed, eps), target(seed), statistic)

    errors: dict[tuple[float, int], float] = {}
    jobs = [(eps, seed) for eps in ladder.values for seed in seeds]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for (eps, seed), err in zip(jobs, pool.map(lambda j: one(*j), jobs)):
                errors[(eps, seed)] = err
    else:
        for eps, seed in jobs:
            errors[(eps, seed)] = one(eps, seed)

    rows = []
    for eps in ladder.values:
        errs = np.array([errors[(eps, s)] for s in seeds])
        rows.append((eps, float(np.median(errs)), float(np.quantile(errs, 0.9))))
    return ConvergenceReport(
        rows=tuple(rows),
        statistic=statistic,
        tolerance=tolerance,
        verdict=_verdict(rows, tolerance),
    )
