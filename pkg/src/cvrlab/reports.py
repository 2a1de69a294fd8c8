"""Delimited report writers and the run manifest.

CSV is the output contract; every float renders with 17 significant
digits so that a rerun from the same manifest is bit-identical. Manifests
are JSON-lines records holding the fully resolved configuration and seeds
(no timestamps, for the same reason).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path as FsPath
from typing import Iterable

from .chi_qv import ChiQVResult
from .clark_ocone import HedgeResult
from .ito_check import ItoResidualReport
from .regularize import ConvergenceReport

__all__ = [
    "fmt17",
    "write_convergence_csv",
    "write_chi_qv_csv",
    "write_ito_terms_csv",
    "write_hedge_csv",
    "write_global_norm_csv",
    "write_manifest",
]


def fmt17(x) -> str:
    return f"{float(x):.17g}"


def write_convergence_csv(report: ConvergenceReport, dest) -> None:
    with FsPath(dest).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "median", "q90", "verdict"])
        for eps, med, q90 in report.rows:
            w.writerow([fmt17(eps), fmt17(med), fmt17(q90), report.verdict])


def write_chi_qv_csv(result: ChiQVResult, dest) -> None:
    """Convergence schema plus the reference column."""
    rep = result.report
    with FsPath(dest).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "median", "q90", "verdict", "reference"])
        for eps, med, q90 in rep.rows:
            w.writerow([fmt17(eps), fmt17(med), fmt17(q90), rep.verdict, rep.reference])


def write_ito_terms_csv(report: ItoResidualReport, dest) -> None:
    with FsPath(dest).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "t", "lhs", "dt_term", "fwd_term", "quad_term", "residual"])
        for terms in report.terms:
            times = terms.lhs.grid.times
            for i, t in enumerate(times):
                w.writerow([
                    fmt17(terms.eps), fmt17(t), fmt17(terms.lhs.values[i]),
                    fmt17(terms.dt_term.values[i]), fmt17(terms.fwd_term.values[i]),
                    fmt17(terms.quad_term.values[i]), fmt17(terms.residual.values[i]),
                ])


def write_hedge_csv(rows: Iterable[tuple[int, HedgeResult]], dest) -> None:
    """Rows are (replica, result) pairs."""
    with FsPath(dest).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "N", "H0", "payoff", "integral", "error"])
        for replica, r in rows:
            w.writerow([replica, r.N, fmt17(r.h0), fmt17(r.payoff),
                        fmt17(r.integral), fmt17(r.error)])


def write_global_norm_csv(rows: Iterable[tuple[float, float, float]], dest) -> None:
    with FsPath(dest).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "median", "q90"])
        for eps, med, q90 in rows:
            w.writerow([fmt17(eps), fmt17(med), fmt17(q90)])


def write_manifest(record: dict, dest) -> None:
    """One JSON line with the resolved config; rerunning it must reproduce
    every CSV byte for byte."""
    FsPath(dest).write_text(json.dumps(record, sort_keys=True) + "\n")
