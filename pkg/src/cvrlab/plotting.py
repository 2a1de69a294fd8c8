"""Figure renderers for the CLI report path.

Figures land next to the delimited output; the CSVs remain the contract
and every figure can be rebuilt from them. Rendering is headless (Agg).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .chi_qv import ChiQVResult
from .experiments import GlobalNormReport, HedgeExperiment
from .grids import Path
from .ito_check import ItoResidualReport
from .regularize import ConvergenceReport

__all__ = [
    "plot_paths",
    "plot_convergence",
    "plot_chi_qv",
    "plot_ito_terms",
    "plot_hedge_errors",
    "plot_global_norm",
]

_DPI = 150


def _save(fig, dest) -> None:
    fig.savefig(dest, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_paths(paths: list[Path], dest, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    for p in paths:
        ax.plot(p.grid.times, p.values, lw=0.9, label=p.label or None)
    ax.set_xlabel("t")
    ax.set_ylabel("$X_t$")
    if title:
        ax.set_title(title)
    if any(p.label for p in paths):
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, dest)


def plot_convergence(report: ConvergenceReport, dest, title: str = "") -> None:
    eps = [r[0] for r in report.rows]
    med = [r[1] for r in report.rows]
    q90 = [r[2] for r in report.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(eps, med, "o-", label="median")
    ax.loglog(eps, q90, "s--", label="q90", alpha=0.7)
    ax.axhline(report.tolerance, color="red", ls=":", label="tolerance")
    ax.invert_xaxis()
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel(f"{report.statistic} error")
    ax.set_title(title or f"verdict: {report.verdict}")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    _save(fig, dest)


def plot_chi_qv(result: ChiQVResult, dest, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    for eps, est in result.estimates.items():
        ax.plot(est.grid.times, est.values, lw=0.8, alpha=0.8,
                label=rf"$\varepsilon$={eps:g}")
    if result.reference is not None:
        ax.plot(result.reference.grid.times, result.reference.values, "k--", lw=1.5,
                label="reference")
    ax.set_xlabel("t")
    ax.set_ylabel("estimator")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, dest)


def plot_ito_terms(report: ItoResidualReport, dest) -> None:
    terms = report.terms[-1]  # smallest eps
    t = terms.lhs.grid.times
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].plot(t, terms.lhs.values, label="lhs")
    axes[0].plot(t, terms.fwd_term.values, label="forward term")
    axes[0].plot(t, terms.quad_term.values, label="quadratic term")
    axes[0].set_xlabel("t")
    axes[0].set_title(f"{report.functional}, eps={terms.eps:g}")
    axes[0].legend(fontsize=8)
    axes[0].grid(alpha=0.3)
    for tm in report.terms:
        axes[1].plot(t, tm.residual.values, lw=0.8, label=rf"$\varepsilon$={tm.eps:g}")
    axes[1].set_xlabel("t")
    axes[1].set_title("residual")
    axes[1].legend(fontsize=8)
    axes[1].grid(alpha=0.3)
    _save(fig, dest)


def plot_hedge_errors(exp: HedgeExperiment, dest) -> None:
    Ns = sorted(exp.medians)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    errs_by_N = {N: [r.error for n, _, r in exp.rows if n == N] for N in Ns}
    axes[0].boxplot([errs_by_N[N] for N in Ns], tick_labels=[str(N) for N in Ns])
    axes[0].set_xlabel("N")
    axes[0].set_ylabel("replication error")
    axes[0].set_title(f"{exp.payoff} on {exp.spec_label}")
    axes[0].grid(alpha=0.3)
    axes[1].loglog(Ns, [exp.medians[N] for N in Ns], "o-", label="median")
    ref = exp.medians[Ns[0]] * np.sqrt(Ns[0] / np.asarray(Ns, dtype=float))
    axes[1].loglog(Ns, ref, "k:", label=r"$O(N^{-1/2})$")
    axes[1].set_xlabel("N")
    axes[1].legend(fontsize=8)
    axes[1].grid(alpha=0.3, which="both")
    _save(fig, dest)


def plot_global_norm(report: GlobalNormReport, dest, T: float, title: str = "") -> None:
    eps = np.array([r[0] for r in report.rows])
    med = report.medians
    logs = np.log(T / (2.0 * eps))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(logs, med, "o", label="median statistic")
    ax.plot(logs, report.slope * logs + report.intercept, "k--",
            label=f"fit: slope={report.slope:.2f}, $R^2$={report.r_squared:.3f}")
    ax.set_xlabel(r"$\ln(1/\tilde\varepsilon)$")
    ax.set_ylabel("global-norm statistic")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, dest)
