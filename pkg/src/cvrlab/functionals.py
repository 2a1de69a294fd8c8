"""Path functionals on the window space with closed-form Frechet derivatives.

Three families cover the chi variants used downstream:

endpoint(f)        H(eta) = f(eta(0))          D2H = f''(eta(0)) delta_(0,0)
integral_squared   H(eta) = (int eta)^2        D2H = 2 on the square
energy             H(eta) = int eta^2          D2H = 2 on the diagonal

First derivatives are signed measures on the lag interval, second
derivatives land in the declared chi-subspace; ``fd_check`` verifies both
against central finite differences along supplied directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chi_qv import Atomic00, ChiElement, DiagKernel, L2Kernel, pair_chi
from .window import (
    SignedMeasure,
    WindowSegment,
    dirac,
    lebesgue,
    pair_measure,
    trapezoid_weights,
)

__all__ = [
    "Functional",
    "endpoint_functional",
    "integral_squared_functional",
    "energy_functional",
    "make_functional",
    "FUNCTIONAL_NAMES",
    "FDReport",
    "fd_check",
]


@dataclass(frozen=True)
class Functional:
    """Twice Frechet-differentiable functional of a window segment.

    ``d2`` must always return the variant named by ``chi_tag``;
    ``d2_constant`` marks functionals whose second derivative does not
    depend on the state, letting integrators evaluate it once. A
    time-dependent extension supplies ``dt_term`` (defaults to absent,
    meaning the time derivative vanishes).
    """

    name: str
    eval_fn: Callable[[WindowSegment], float]
    d1_fn: Callable[[WindowSegment], SignedMeasure]
    d2_fn: Callable[[WindowSegment], ChiElement]
    chi_tag: str
    d2_constant: bool = False
    dt_term: Callable[[float, WindowSegment], float] | None = None

    def __call__(self, eta: WindowSegment) -> float:
        return float(self.eval_fn(eta))

    def d1(self, eta: WindowSegment) -> SignedMeasure:
        return self.d1_fn(eta)

    def d2(self, eta: WindowSegment) -> ChiElement:
        phi = self.d2_fn(eta)
        if phi.chi_tag != self.chi_tag:
            raise AssertionError(
                f"functional {self.name}: d2 returned {phi.chi_tag}, declared {self.chi_tag}"
            )
        return phi


def _integral(eta: WindowSegment) -> float:
    tw = trapezoid_weights(len(eta.values), eta.dt)
    return float(np.sum(tw * eta.values))


def endpoint_functional(
    f: Callable, df: Callable, d2f: Callable, name: str = "endpoint"
) -> Functional:
    """H(eta) = f(eta(0)) for a C^2 real function f."""
    return Functional(
        name=name,
        eval_fn=lambda eta: float(f(eta.at_zero)),
        d1_fn=lambda eta: dirac(0.0, float(df(eta.at_zero)), eta.tau, eta.dt),
        d2_fn=lambda eta: Atomic00(float(d2f(eta.at_zero))),
        chi_tag="atomic00",
    )


def integral_squared_functional() -> Functional:
    """H(eta) = (int eta)^2; second derivative is the constant kernel 2."""
    return Functional(
        name="integral-squared",
        eval_fn=lambda eta: _integral(eta) ** 2,
        d1_fn=lambda eta: lebesgue(2.0 * _integral(eta), eta.tau, eta.dt),
        d2_fn=lambda eta: L2Kernel(eta.tau, eta.dt, 2.0),
        chi_tag="l2",
        d2_constant=True,
    )


def energy_functional() -> Functional:
    """H(eta) = int eta^2; second derivative is 2 on the diagonal."""
    return Functional(
        name="energy",
        eval_fn=lambda eta: float(np.sum(
            trapezoid_weights(len(eta.values), eta.dt) * eta.values ** 2)),
        d1_fn=lambda eta: lebesgue(2.0 * eta.values, eta.tau, eta.dt),
        d2_fn=lambda eta: DiagKernel(eta.tau, eta.dt, 2.0),
        chi_tag="diag",
        d2_constant=True,
    )


_ENDPOINT_FNS: dict[str, tuple[Callable, Callable, Callable]] = {
    "square": (lambda x: x ** 2, lambda x: 2.0 * x, lambda x: 2.0 + 0.0 * x),
    "linear": (lambda x: x, lambda x: 1.0 + 0.0 * x, lambda x: 0.0 * x),
    "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
}

FUNCTIONAL_NAMES = tuple(
    [f"endpoint:{k}" for k in _ENDPOINT_FNS] + ["integral-squared", "energy"]
)


def make_functional(name: str) -> Functional:
    """Registry lookup: ``endpoint:square|linear|cos``, ``integral-squared``,
    ``energy``."""
    if name == "integral-squared":
        return integral_squared_functional()
    if name == "energy":
        return energy_functional()
    kind, _, arg = name.partition(":")
    if kind == "endpoint" and arg in _ENDPOINT_FNS:
        return endpoint_functional(*_ENDPOINT_FNS[arg], name=name)
    raise ValueError(f"unknown functional {name!r}; known: {FUNCTIONAL_NAMES}")


# ---------------------------------------------------------- derivative check


@dataclass(frozen=True)
class FDReport:
    """Worst relative deviation of the derivative pairings from central
    differences (relative to the pairing magnitude, floored at 1)."""

    first_order: float
    second_order: float

    def passes(self, tol: float) -> bool:
        return self.first_order < tol and self.second_order < tol


def fd_check(
    F: Functional,
    eta: WindowSegment,
    directions: list[WindowSegment],
    h: float = 1e-4,
) -> FDReport:
    """Compare <DF(eta), psi> with (F(eta+h psi) - F(eta-h psi)) / 2h and
    <D2F(eta), psi (x) psi> with the symmetric second difference."""
    if h <= 0:
        raise ValueError("step h must be positive")
    e1 = e2 = 0.0
    mu = F.d1(eta)
    phi = F.d2(eta)
    f0 = F(eta)
    for psi in directions:
        up, dn = F(eta + h * psi), F(eta - h * psi)
        fd1 = (up - dn) / (2.0 * h)
        fd2 = (up + dn - 2.0 * f0) / h ** 2
        an1 = pair_measure(mu, psi)
        an2 = pair_chi(phi, psi)
        e1 = max(e1, abs(fd1 - an1) / max(abs(an1), 1.0))
        e2 = max(e2, abs(fd2 - an2) / max(abs(an2), 1.0))
    return FDReport(first_order=e1, second_order=e2)
