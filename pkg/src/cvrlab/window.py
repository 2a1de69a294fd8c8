"""Window processes, signed measures on the lag interval, and their pairings.

The window of a real process X at time t with memory tau is the segment
eta(u) = X_{t+u}, u in [-tau, 0], read through the constant extension of X.
Finite signed measures on [-tau, 0] are represented as node-located atoms
plus a density sampled on the lag nodes; every pairing is then an exact
finite sum (atoms) plus a trapezoidal quadrature (density). Atoms off the
lag lattice are rejected rather than snapped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grids import Path, eval_extended

__all__ = [
    "LagMismatchError",
    "WindowSegment",
    "SignedMeasure",
    "dirac",
    "lebesgue",
    "zero_measure",
    "window_at",
    "pair_measure",
    "sup_norm",
    "measure_process",
    "banach_forward_integral_eps",
    "random_segment",
    "lag_count",
    "trapezoid_weights",
]


class LagMismatchError(ValueError):
    pass


def lag_count(tau: float, dt: float) -> int:
    """Number of lag steps m with tau = m*dt, or raise if off-grid."""
    m = tau / dt
    mi = int(round(m))
    if mi < 1 or abs(m - mi) > 1e-9 * max(1.0, m):
        raise ValueError(f"lag tau={tau} is not a positive node multiple of dt={dt}")
    return mi


def trapezoid_weights(n_nodes: int, dt: float) -> np.ndarray:
    w = np.full(n_nodes, dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True, eq=False)
class WindowSegment:
    """Lag view eta(u_k) at u_k = -tau + k*dt, k = 0..tau/dt."""

    tau: float
    dt: float
    values: np.ndarray
    ref_time: float = 0.0

    def __post_init__(self) -> None:
        m = lag_count(self.tau, self.dt)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (m + 1,):
            raise ValueError(f"expected {m + 1} lag samples, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def lags(self) -> np.ndarray:
        return np.linspace(-self.tau, 0.0, len(self.values))

    @property
    def at_zero(self) -> float:
        return float(self.values[-1])

    def _check_compatible(self, other: "WindowSegment") -> None:
        if len(self.values) != len(other.values) or abs(self.tau - other.tau) > 1e-12:
            raise LagMismatchError("segments live on different lag intervals")

    def __add__(self, other: "WindowSegment") -> "WindowSegment":
        self._check_compatible(other)
        return WindowSegment(self.tau, self.dt, self.values + other.values, self.ref_time)

    def __sub__(self, other: "WindowSegment") -> "WindowSegment":
        self._check_compatible(other)
        return WindowSegment(self.tau, self.dt, self.values - other.values, self.ref_time)

    def __mul__(self, c: float) -> "WindowSegment":
        return WindowSegment(self.tau, self.dt, c * self.values, self.ref_time)

    __rmul__ = __mul__


def window_at(path: Path, t: float, tau: float) -> WindowSegment:
    """Window segment of a path at reference time t with memory tau."""
    dt = path.grid.dt
    m = lag_count(tau, dt)
    if tau > path.grid.T + 1e-12:
        raise ValueError(f"lag tau={tau} exceeds the horizon T={path.grid.T}")
    lags = np.linspace(-tau, 0.0, m + 1)
    return WindowSegment(tau, dt, eval_extended(path, t + lags), ref_time=float(t))


def sup_norm(eta: WindowSegment) -> float:
    """Sup norm of the segment over the lag nodes."""
    return float(np.max(np.abs(eta.values)))


# ----------------------------------------------------------------- measures


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """Finite signed measure on [-tau, 0]: node-located atoms + L2 density."""

    tau: float
    dt: float
    atoms: tuple[tuple[float, float], ...] = ()
    density: np.ndarray | None = None

    def __post_init__(self) -> None:
        m = lag_count(self.tau, self.dt)
        for loc, _ in self.atoms:
            if loc < -self.tau - 1e-12 or loc > 1e-12:
                raise ValueError(f"atom location {loc} outside [-{self.tau}, 0]")
            k = (loc + self.tau) / self.dt
            if abs(k - round(k)) > 1e-6:
                raise ValueError(f"atom at {loc} does not sit on a lag node (dt={self.dt})")
        if self.density is not None:
            d = np.asarray(self.density, dtype=float)
            if d.shape != (m + 1,):
                raise ValueError(f"density needs {m + 1} lag samples, got shape {d.shape}")
            object.__setattr__(self, "density", d)
        tv = sum(abs(w) for _, w in self.atoms)
        if self.density is not None:
            w = trapezoid_weights(len(self.density), self.dt)
            tv += float(np.sum(w * np.abs(self.density)))
        object.__setattr__(self, "_tv", float(tv))
        if not np.isfinite(tv):
            raise ValueError("measure has non-finite total variation")

    @property
    def total_variation(self) -> float:
        return self._tv

    def atom_indices(self) -> list[tuple[int, float]]:
        return [(int(round((loc + self.tau) / self.dt)), w) for loc, w in self.atoms]

    def to_dict(self) -> dict:
        return {
            "atoms": [{"loc": loc, "weight": w} for loc, w in self.atoms],
            "density": [] if self.density is None else list(map(float, self.density)),
            "tau": self.tau,
        }


def dirac(loc: float, weight: float, tau: float, dt: float) -> SignedMeasure:
    return SignedMeasure(tau, dt, atoms=((float(loc), float(weight)),))


def lebesgue(density, tau: float, dt: float) -> SignedMeasure:
    """Density measure; ``density`` may be a scalar, an array on the lag
    nodes, or a callable of the lag u in [-tau, 0]."""
    m = lag_count(tau, dt)
    u = np.linspace(-tau, 0.0, m + 1)
    if callable(density):
        d = np.asarray(density(u), dtype=float)
        if d.shape == ():
            d = np.full(m + 1, float(d))
    else:
        d = np.asarray(density, dtype=float)
        if d.ndim == 0:
            d = np.full(m + 1, float(d))
    return SignedMeasure(tau, dt, density=d)


def zero_measure(tau: float, dt: float) -> SignedMeasure:
    return SignedMeasure(tau, dt)


def pair_measure(mu: SignedMeasure, eta: WindowSegment) -> float:
    """Duality pairing <mu, eta> = sum_j w_j eta(a_j) + int density*eta."""
    if len(eta.values) - 1 != lag_count(mu.tau, mu.dt) or abs(mu.tau - eta.tau) > 1e-12:
        raise LagMismatchError("measure and segment live on different lag intervals")
    out = 0.0
    for k, w in mu.atom_indices():
        out += w * eta.values[k]
    if mu.density is not None:
        tw = trapezoid_weights(len(eta.values), eta.dt)
        out += float(np.sum(tw * mu.density * eta.values))
    return float(out)


def measure_process(path: Path, mu: SignedMeasure, tau: float) -> Path:
    """Real process t -> <mu, window_at(path, t, tau)> on the grid.

    This is how window processes induce real ones; e.g. mu = delta_0 +
    delta_{-tau/2} on a Brownian path yields W_t + W_{t-tau/2}.
    """
    grid = path.grid
    m_tau = lag_count(tau, grid.dt)
    ext = path.extended_values(m_tau)  # index j+k <-> time t_j + u_k
    out = np.zeros(grid.N + 1)
    for k, w in mu.atom_indices():
        out += w * ext[k : k + grid.N + 1]
    if mu.density is not None:
        tw = trapezoid_weights(m_tau + 1, grid.dt)
        c = tw * mu.density
        out += np.convolve(ext, c[::-1], mode="valid")
    return Path(grid, out, label=f"<mu,{path.label}(.)>")


# --------------------------------------------- Banach-valued forward integral


def banach_forward_integral_eps(
    Ymu: Callable[[float], SignedMeasure] | Sequence[SignedMeasure],
    X: Path,
    tau: float,
    eps: float,
) -> Path:
    """Forward integral of a measure-valued integrand against the window
    process of X at fixed eps:

        t_i -> dt * sum_{j<i} < Y(t_j), (X_{t_j+eps}(.) - X_{t_j}(.)) / eps >.
    """
    grid = X.grid
    m = grid.step_of(eps)
    m_tau = lag_count(tau, grid.dt)
    if eps >= tau:
        raise ValueError(f"eps={eps} must stay below the window lag {tau}")
    times = grid.times
    if callable(Ymu):
        measures = [Ymu(t) for t in times]
    else:
        measures = list(Ymu)
        if len(measures) != grid.N + 1:
            raise ValueError(f"need one measure per grid node ({grid.N + 1})")
    tvs = [mu.total_variation for mu in measures]
    if not np.all(np.isfinite(tvs)):
        raise ValueError("integrand has unbounded total variation across time")

    ext = X.extended_values(m_tau, m)
    D = ext[m:] - ext[: len(ext) - m]  # increment on nodes -tau .. T
    p = np.empty(grid.N + 1)
    for j in range(grid.N + 1):
        seg = WindowSegment(tau, grid.dt, D[j : j + m_tau + 1], ref_time=times[j])
        p[j] = pair_measure(measures[j], seg) / eps
    out = np.concatenate([[0.0], np.cumsum(p[:-1]) * grid.dt])
    return Path(grid, out, label=f"banach-fwd[{X.label};eps={eps:g}]")


def random_segment(tau: float, dt: float, seed: int, pinned: bool = True) -> WindowSegment:
    """Brownian-bridge-like segment for derivative checks; deterministic in seed."""
    m = lag_count(tau, dt)
    rng = np.random.default_rng(seed)
    w = np.concatenate([[0.0], np.cumsum(np.sqrt(dt) * rng.standard_normal(m))])
    if pinned:
        w = w - np.linspace(0.0, 1.0, m + 1) * w[-1]
    return WindowSegment(tau, dt, w)
