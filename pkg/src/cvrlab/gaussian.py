"""Exact Gaussian path generators for the process families under study.

Families
--------
brownian            standard Brownian motion, R(s,t) = min(s,t)
fbm(H)              fractional Brownian motion, R(s,t) = (s^2H + t^2H - |t-s|^2H)/2
bifractional(H,K)   R(s,t) = 2^-K ((s^2H + t^2H)^K - |t-s|^2HK), H in (0,1), K in (0,1]
scaled(base, c)     c times a base draw
mixed(c1, ..., cn)  sum of independent component draws

Sampling factorizes the covariance of the *increments* (the second
difference of the level covariance) and cumulative-sums the factored draw;
this is algebraically the same exact draw as factorizing the level
covariance but far better conditioned. Brownian motion short-circuits to
the closed-form factor sqrt(dt)*I. Draws are deterministic in
(spec, grid, seed); mixed components draw with seeds
``seed + (i+1)*COMPONENT_SEED_STRIDE`` so each component path can be
reproduced standalone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack

from .grids import Path, TimeGrid

__all__ = [
    "GaussianSpec",
    "CovarianceNotPSDError",
    "brownian",
    "fbm",
    "bifractional",
    "scaled",
    "mixed",
    "covariance_matrix",
    "sample",
    "reference_qv",
    "component_seed",
    "COMPONENT_SEED_STRIDE",
]

log = logging.getLogger(__name__)

# Wide deterministic stride separating component streams from the
# replica streams (seed + replica index) used by the Monte Carlo harness.
COMPONENT_SEED_STRIDE = 1_000_003

_JITTER_REL = 1e-12
_MAX_JITTER_TRIES = 3


class CovarianceNotPSDError(RuntimeError):
    """Covariance factorization failed even after jitter regularization."""

    def __init__(self, minor: int, label: str):
        self.minor = minor
        super().__init__(
            f"increment covariance of {label} is not positive definite: "
            f"leading minor of order {minor} failed"
        )


@dataclass(frozen=True)
class GaussianSpec:
    """Tagged description of a centred Gaussian process with X_0 = 0."""

    family: str
    H: float | None = None
    K: float | None = None
    scale: float | None = None
    base: "GaussianSpec | None" = None
    components: tuple["GaussianSpec", ...] = ()

    def __post_init__(self) -> None:
        fam = self.family
        if fam == "brownian":
            pass
        elif fam == "fbm":
            if self.H is None or not (0.0 < self.H < 1.0):
                raise ValueError(f"fbm needs H in (0,1), got {self.H}")
        elif fam == "bifractional":
            if self.H is None or not (0.0 < self.H < 1.0):
                raise ValueError(f"bifractional needs H in (0,1), got {self.H}")
            if self.K is None or not (0.0 < self.K <= 1.0):
                raise ValueError(f"bifractional needs K in (0,1], got {self.K}")
        elif fam == "scaled":
            if self.base is None or self.scale is None:
                raise ValueError("scaled needs a base spec and a scale")
        elif fam == "mixed":
            if len(self.components) < 1:
                raise ValueError("mixed needs at least one component")
        else:
            raise ValueError(f"unknown family {fam!r}")

    @property
    def label(self) -> str:
        if self.family == "brownian":
            return "brownian"
        if self.family == "fbm":
            return f"fbm(H={self.H:g})"
        if self.family == "bifractional":
            return f"bifractional(H={self.H:g},K={self.K:g})"
        if self.family == "scaled":
            return f"scaled({self.base.label},c={self.scale:g})"
        return "mixed(" + "+".join(c.label for c in self.components) + ")"

    def to_dict(self) -> dict:
        d: dict = {"family": self.family}
        if self.H is not None:
            d["H"] = self.H
        if self.K is not None:
            d["K"] = self.K
        if self.family == "scaled":
            d["scale"] = self.scale
            d["base"] = self.base.to_dict()
        if self.family == "mixed":
            d["components"] = [c.to_dict() for c in self.components]
        return d

    @staticmethod
    def from_dict(d: dict) -> "GaussianSpec":
        fam = d["family"]
        if fam == "scaled":
            return scaled(GaussianSpec.from_dict(d["base"]), d["scale"])
        if fam == "mixed":
            return mixed(*[GaussianSpec.from_dict(c) for c in d["components"]])
        return GaussianSpec(fam, H=d.get("H"), K=d.get("K"))


def brownian() -> GaussianSpec:
    return GaussianSpec("brownian")


def fbm(H: float) -> GaussianSpec:
    return GaussianSpec("fbm", H=float(H))


def bifractional(H: float, K: float) -> GaussianSpec:
    return GaussianSpec("bifractional", H=float(H), K=float(K))


def scaled(base: GaussianSpec, c: float) -> GaussianSpec:
    return GaussianSpec("scaled", scale=float(c), base=base)


def mixed(*components: GaussianSpec) -> GaussianSpec:
    return GaussianSpec("mixed", components=tuple(components))


def component_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th component of a mixed draw."""
    return seed + (index + 1) * COMPONENT_SEED_STRIDE


# ---------------------------------------------------------------- covariance


def covariance_matrix(spec: GaussianSpec, grid: TimeGrid) -> np.ndarray:
    """Level covariance R(t_i, t_j) on all grid nodes (row/col 0 are zero)."""
    t = grid.times
    fam = spec.family
    if fam == "brownian":
        return np.minimum(t[:, None], t[None, :])
    if fam == "fbm":
        H2 = 2.0 * spec.H
        return 0.5 * (
            t[:, None] ** H2 + t[None, :] ** H2 - np.abs(t[:, None] - t[None, :]) ** H2
        )
    if fam == "bifractional":
        H2, K = 2.0 * spec.H, spec.K
        s2h = t ** H2
        return 2.0 ** (-K) * (
            (s2h[:, None] + s2h[None, :]) ** K
            - np.abs(t[:, None] - t[None, :]) ** (H2 * K)
        )
    if fam == "scaled":
        return spec.scale ** 2 * covariance_matrix(spec.base, grid)
    # mixed: independent components add in covariance
    out = covariance_matrix(spec.components[0], grid)
    for c in spec.components[1:]:
        out = out + covariance_matrix(c, grid)
    return out


def _cholesky_with_jitter(C: np.ndarray, label: str) -> np.ndarray:
    jitter = _JITTER_REL * float(C.diagonal().max())
    work = C
    for attempt in range(_MAX_JITTER_TRIES + 1):
        L, info = lapack.dpotrf(work, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            return L
        if attempt == _MAX_JITTER_TRIES:
            raise CovarianceNotPSDError(int(info), label)
        bump = jitter * 10.0 ** attempt
        log.warning(
            "covariance of %s: leading minor %d not PD, adding jitter %.3e "
            "(attempt %d/%d)", label, int(info), bump, attempt + 1, _MAX_JITTER_TRIES
        )
        work = C + bump * np.eye(C.shape[0])
    raise AssertionError("unreachable")


@lru_cache(maxsize=2)
def _increment_factor(spec: GaussianSpec, grid: TimeGrid) -> np.ndarray:
    """Lower-triangular factor of the increment covariance. Cached because a
    dense factorization at N=4096 dominates the cost of a whole Monte Carlo
    sweep; the factor is reused across seeds."""
    R = covariance_matrix(spec, grid)
    C = R[1:, 1:] - R[1:, :-1] - R[:-1, 1:] + R[:-1, :-1]
    return _cholesky_with_jitter(C, spec.label)


# ------------------------------------------------------------------ sampling


def _draw_increments(spec: GaussianSpec, grid: TimeGrid, seed: int) -> np.ndarray:
    if spec.family == "brownian":
        # closed-form factor of the Brownian increment covariance: sqrt(dt)*I
        rng = np.random.default_rng(seed)
        return np.sqrt(grid.dt) * rng.standard_normal(grid.N)
    if spec.family == "scaled":
        return spec.scale * _draw_increments(spec.base, grid, seed)
    if spec.family == "mixed":
        out = np.zeros(grid.N)
        for i, comp in enumerate(spec.components):
            out += _draw_increments(comp, grid, component_seed(seed, i))
        return out
    L = _increment_factor(spec, grid)
    rng = np.random.default_rng(seed)
    return L @ rng.standard_normal(grid.N)


def sample(spec: GaussianSpec, grid: TimeGrid, seed: int) -> Path:
    """One exact draw of the Gaussian vector on the grid, pinned at X_0 = 0."""
    incr = _draw_increments(spec, grid, int(seed))
    values = np.concatenate([[0.0], np.cumsum(incr)])
    return Path(grid, values, label=spec.label)


# ------------------------------------------------------------- known targets


def reference_qv(spec: GaussianSpec, grid: TimeGrid) -> Path | None:
    """Closed-form quadratic variation t -> [X]_t when the family has one.

    brownian and fbm(1/2) have [X]_t = t; fbm with H > 1/2 (Hoelder > 1/2)
    has zero quadratic variation; bifractional has [X]_t = 2^(1-K) t at
    HK = 1/2 and zero for HK > 1/2. Independent components have vanishing
    cross brackets, so a mixed reference is the sum of component references.
    Returns None when no closed form is known (e.g. HK < 1/2).
    """
    t = grid.times
    fam = spec.family
    if fam == "brownian":
        return Path(grid, t, label="t")
    if fam == "fbm":
        if abs(spec.H - 0.5) < 1e-12:
            return Path(grid, t, label="t")
        if spec.H > 0.5:
            return Path(grid, np.zeros_like(t), label="0")
        return None
    if fam == "bifractional":
        hk = spec.H * spec.K
        if abs(hk - 0.5) < 1e-12:
            c = 2.0 ** (1.0 - spec.K)
            return Path(grid, c * t, label=f"{c:g}*t")
        if hk > 0.5:
            return Path(grid, np.zeros_like(t), label="0")
        return None
    if fam == "scaled":
        base = reference_qv(spec.base, grid)
        if base is None:
            return None
        return Path(grid, spec.scale ** 2 * base.values, label=f"{spec.scale:g}^2*({base.label})")
    parts = [reference_qv(c, grid) for c in spec.components]
    if any(p is None for p in parts):
        return None
    total = np.zeros_like(t)
    for p in parts:
        total = total + p.values
    return Path(grid, total, label="+".join(p.label for p in parts))
