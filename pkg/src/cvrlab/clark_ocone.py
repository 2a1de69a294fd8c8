"""Replication of payoffs on processes with Brownian-like quadratic variation.

For a terminal payoff h = f(X_T) on a process with X_0 = 0 and [X]_t = t,
the representation h = H_0 + int_0^T xi_t dX_t holds with H_0 = v(0, 0)
and xi_t = dv/dx (t, X_t), where v solves the backward heat equation

    dv/dt + 1/2 d2v/dx2 = 0,    v(T, .) = f.

Nothing about the law of X enters: only the quadratic variation. The value
function is built by Gaussian smoothing of the payoff via Gauss-Hermite
quadrature; hedging discretizes the forward integral as the
non-anticipating left-point sum on the grid. A certification gate refuses
paths whose realized quadratic variation is off the hypothesis (override
with ``force=True`` when the process family has been certified upstream).

Wiener-functional payoffs h = f(int phi^1 dX, ..., int phi^n dX) are
handled in two modes: ``zero-qv`` (explicit strategy, needs a zero-QV
path) and ``brownian-qv`` (n = 1, value function with time-changed
variance int_t^T phi^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .grids import Path
from .ito_check import UnsupportedCombinationError
from .regularize import covariation_eps

__all__ = [
    "QVCertificationError",
    "QuadratureError",
    "Payoff",
    "make_payoff",
    "PAYOFF_NAMES",
    "ValueFunction",
    "solve_vanilla",
    "pde_residual",
    "gh_doubling_gap",
    "HedgeResult",
    "hedge_vanilla",
    "hedge_wiener_functional",
]

QV_GATE_REL_TOL = 0.1  # refuse hedging when realized [X]_T is off by more than 10%


class QVCertificationError(RuntimeError):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Payoff:
    """Terminal payoff with derivatives (d2f may be None for kinked payoffs)."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray] | None = None


def make_payoff(name: str) -> Payoff:
    """Registry lookup: ``linear``, ``square``, ``cos``, ``call:<strike>``.
    Payoffs are named, never parsed from expressions."""
    if name == "linear":
        return Payoff("linear", lambda x: x, lambda x: np.ones_like(np.asarray(x, float)),
                      lambda x: np.zeros_like(np.asarray(x, float)))
    if name == "square":
        return Payoff("square", lambda x: x ** 2, lambda x: 2.0 * x,
                      lambda x: np.full_like(np.asarray(x, float), 2.0))
    if name == "cos":
        return Payoff("cos", np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))
    kind, _, arg = name.partition(":")
    if kind == "call" and arg:
        strike = float(arg)
        return Payoff(
            name,
            lambda x: np.maximum(x - strike, 0.0),
            lambda x: (np.asarray(x, float) > strike).astype(float),
            None,
        )
    raise ValueError(f"unknown payoff {name!r}; known: {PAYOFF_NAMES}")


PAYOFF_NAMES = ("linear", "square", "cos", "call:<strike>")


@lru_cache(maxsize=8)
def _gh_nodes(Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights turning Gauss-Hermite into a standard-normal expectation."""
    x, w = hermgauss(Q)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


@dataclass(frozen=True)
class ValueFunction:
    """Gaussian smoothing of a terminal payoff.

    v(t, x) = E[f(x + G * sqrt(s(t)))] with G standard normal and s(t) the
    variance still to accrue (T - t for the unit-QV case). Derivatives come
    from differentiated quadrature; without a second payoff derivative,
    d2v/dx2 falls back to the Gaussian integration-by-parts identity
    E[f'(x + G sqrt(s)) G] / sqrt(s).
    """

    payoff: Payoff
    T: float
    Q: int = 64
    variance_to_go: Callable[[float], float] | None = None  # default T - t
    diffusion: Callable[[float], float] | None = None  # sigma^2(t), default 1

    def _s(self, t: float) -> float:
        s = (self.T - t) if self.variance_to_go is None else self.variance_to_go(t)
        return max(float(s), 0.0)

    def sigma2(self, t: float) -> float:
        return 1.0 if self.diffusion is None else float(self.diffusion(t))

    def _smear(self, fn, t: float, x) -> np.ndarray | float:
        s = self._s(t)
        xa = np.asarray(x, dtype=float)
        if s == 0.0:
            return fn(xa)
        z, w = _gh_nodes(self.Q)
        vals = fn(xa[..., None] + np.sqrt(s) * z)
        return vals @ w

    def value(self, t: float, x) -> np.ndarray | float:
        return self._smear(self.payoff.f, t, x)

    def dx(self, t: float, x) -> np.ndarray | float:
        return self._smear(self.payoff.df, t, x)

    def dxx(self, t: float, x) -> np.ndarray | float:
        if self.payoff.d2f is not None:
            return self._smear(self.payoff.d2f, t, x)
        s = self._s(t)
        if s == 0.0:
            raise QuadratureError(
                f"payoff {self.payoff.name} has no second derivative at s=0")
        z, w = _gh_nodes(self.Q)
        xa = np.asarray(x, dtype=float)
        vals = self.payoff.df(xa[..., None] + np.sqrt(s) * z)
        return (vals * z) @ w / np.sqrt(s)


def solve_vanilla(payoff: Payoff, T: float, Q: int = 64,
                  check_quadrature: bool = False, stability_tol: float = 1e-8) -> ValueFunction:
    """Value function for a vanilla terminal payoff under unit quadratic
    variation. With ``check_quadrature`` the construction fails unless
    doubling Q moves probe values by less than ``stability_tol`` relative."""
    v = ValueFunction(payoff, float(T), Q)
    if check_quadrature:
        ts = np.linspace(0.0, 0.9 * T, 7)
        xs = np.linspace(-2.0, 2.0, 9)
        gap = gh_doubling_gap(payoff, T, Q, ts, xs)
        if gap > stability_tol:
            raise QuadratureError(
                f"Gauss-Hermite not converged at Q={Q}: doubling moves values by {gap:.3e}")
    return v


def gh_doubling_gap(payoff: Payoff, T: float, Q: int, ts, xs) -> float:
    """Max relative change of v over probe points when Q doubles."""
    v1 = ValueFunction(payoff, float(T), Q)
    v2 = ValueFunction(payoff, float(T), 2 * Q)
    gap = 0.0
    for t in np.atleast_1d(ts):
        a = np.asarray(v1.value(float(t), xs), dtype=float)
        b = np.asarray(v2.value(float(t), xs), dtype=float)
        gap = max(gap, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0))))
    return gap


def pde_residual(v: ValueFunction, ts, xs, ht: float | None = None) -> float:
    """Max over the probe lattice of |dv/dt + 1/2 sigma^2(t) d2v/dx2|, the
    time derivative by central difference. Probes must keep t +- ht inside
    [0, T]."""
    ht = 1e-4 * max(v.T, 1.0) if ht is None else ht
    worst = 0.0
    xs = np.asarray(xs, dtype=float)
    for t in np.atleast_1d(ts):
        t = float(t)
        if t - ht < 0.0 or t + ht > v.T:
            raise ValueError(f"probe t={t} too close to the boundary for step {ht}")
        dvdt = (np.asarray(v.value(t + ht, xs)) - np.asarray(v.value(t - ht, xs))) / (2 * ht)
        resid = dvdt + 0.5 * v.sigma2(t) * np.asarray(v.dxx(t, xs))
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


# ------------------------------------------------------------------- hedging


@dataclass(frozen=True)
class HedgeResult:
    h0: float
    xi: np.ndarray  # strategy at grid nodes
    integral: float  # non-anticipating left-point sum of xi against dX
    payoff: float
    error: float
    N: int
    label: str = ""


def _realized_qv_terminal(X: Path) -> float:
    return float(covariation_eps(X, X, X.grid.dt).values[-1])


def _gate(X: Path, target: float, force: bool, what: str) -> None:
    if force:
        return
    qv_T = _realized_qv_terminal(X)
    scale = max(X.grid.T, 1e-12)
    if abs(qv_T - target) > QV_GATE_REL_TOL * scale:
        raise QVCertificationError(
            f"{what}: realized [X]_T = {qv_T:.4f} deviates from {target:.4f} "
            f"by more than {QV_GATE_REL_TOL:.0%} of T; pass force=True only if "
            f"the family was certified upstream"
        )


def hedge_vanilla(v: ValueFunction, X: Path, force: bool = False) -> HedgeResult:
    """Replicate f(X_T) along one path via xi_t = dv/dx(t, X_t)."""
    if abs(X.values[0]) > 0.0:
        raise ValueError("hedging requires X_0 = 0")
    _gate(X, X.grid.T, force, "hedge_vanilla")
    grid = X.grid
    times = grid.times
    xi = np.array([v.dx(float(t), float(x)) for t, x in zip(times, X.values)])
    integral = float(np.sum(xi[:-1] * np.diff(X.values)))
    h0 = float(v.value(0.0, 0.0))
    payoff = float(v.payoff.f(X.values[-1]))
    return HedgeResult(h0=h0, xi=xi, integral=integral, payoff=payoff,
                       error=abs(payoff - h0 - integral), N=grid.N, label=X.label)


def hedge_wiener_functional(
    f: Callable[[np.ndarray], np.ndarray],
    grad_f: Callable[[np.ndarray], np.ndarray],
    phis: Sequence[Callable[[np.ndarray], np.ndarray]],
    X: Path,
    mode: str,
    Q: int = 64,
    force: bool = False,
) -> HedgeResult:
    """Replicate h = f(int phi^1 dX, ..., int phi^n dX).

    ``f`` maps arrays whose first axis indexes the n coordinates to scalars
    (vectorized over trailing axes); ``grad_f`` returns the gradient with
    the same convention. ``zero-qv`` implements the explicit strategy
    xi_t = sum_i d_i f(Y_t) phi^i(t) valid for zero-QV integrators;
    ``brownian-qv`` (n = 1 only) goes through the value function with
    variance to go int_t^T phi^2.
    """
    grid = X.grid
    times = grid.times
    n = len(phis)
    phi_vals = np.stack([np.asarray(p(times), dtype=float) for p in phis])
    dX = np.diff(X.values)
    # running integrals Y^i_t, non-anticipating left-point sums
    Y = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(phi_vals[:, :-1] * dX[None, :], axis=1)], axis=1)
    payoff = float(f(Y[:, -1]))

    if mode == "zero-qv":
        _gate(X, 0.0, force, "hedge_wiener_functional[zero-qv]")
        h0 = float(f(np.zeros(n)))
        grads = np.asarray(grad_f(Y), dtype=float)  # (n, N+1)
        xi = np.sum(grads * phi_vals, axis=0)
    elif mode == "brownian-qv":
        if n != 1:
            raise UnsupportedCombinationError(
                "brownian-qv mode supports a single Wiener integral (n = 1)")
        _gate(X, grid.T, force, "hedge_wiener_functional[brownian-qv]")
        # variance still to accrue: trapezoidal tail integral of phi^2
        p2 = phi_vals[0] ** 2
        cum = np.concatenate([[0.0], np.cumsum((p2[1:] + p2[:-1]) * 0.5 * grid.dt)])
        tail = cum[-1] - cum
        v = ValueFunction(
            Payoff("wiener:" + getattr(f, "__name__", "f"),
                   f=lambda x: f(np.asarray(x, float)[None, ...]),
                   df=lambda x: grad_f(np.asarray(x, float)[None, ...])[0]),
            T=grid.T, Q=Q,
            variance_to_go=lambda t: float(np.interp(t, times, tail)),
            diffusion=lambda t: float(np.interp(t, times, p2)),
        )
        h0 = float(v.value(0.0, 0.0))
        xi = np.array([v.dx(float(t), float(y)) for t, y in zip(times, Y[0])]) * phi_vals[0]
    else:
        raise ValueError(f"unknown mode {mode!r}; use 'zero-qv' or 'brownian-qv'")

    integral = float(np.sum(xi[:-1] * dX))
    return HedgeResult(h0=h0, xi=xi, integral=integral, payoff=payoff,
                       error=abs(payoff - h0 - integral), N=grid.N,
                       label=f"{mode};{X.label}")
