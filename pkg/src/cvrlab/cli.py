"""Command-line front end.

Subcommands: ``paths``, ``qv``, ``chiqv``, ``ito``, ``replicate``. Every
run writes CSV reports, a JSON-lines manifest with the fully resolved
configuration, and (unless ``--no-plot``) rendered figures, into the
output directory. Exit codes: 0 all verdicts pass (or informational),
2 a verdict failed, 64 usage or validation error.

Configuration may come from a plain ``key=value`` file (``--config``);
explicit flags override file values. All randomness flows from one master
seed: replica r draws with seed+r, mixed components with the documented
component stride.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .chi_qv import phi_preset
from .clark_ocone import make_payoff
from .experiments import (
    chi_qv_experiment,
    global_norm_experiment,
    hedge_experiment,
    ito_experiment,
    mutual_qv_experiment,
    qv_experiment,
    wiener_hedge_experiment,
)
from .functionals import FUNCTIONAL_NAMES, make_functional
from .gaussian import GaussianSpec, bifractional, brownian, fbm, mixed, sample, scaled
from .grids import make_grid, write_path_csv
from .reports import (
    write_chi_qv_csv,
    write_convergence_csv,
    write_global_norm_csv,
    write_hedge_csv,
    write_ito_terms_csv,
    write_manifest,
)

EXIT_OK = 0
EXIT_FAIL_VERDICT = 2
EXIT_USAGE = 64

DEFAULT_LADDER = "64,32,16,8"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract says 64
        raise UsageError(message)


def _fraction(text: str) -> float:
    """Float or simple fraction like 3/5 (handy for exact HK products)."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _parse_component(text: str) -> GaussianSpec:
    name, _, arg = text.partition(":")
    if name == "brownian":
        return brownian()
    if name == "fbm":
        return fbm(_fraction(arg))
    if name == "bifractional":
        h, k = arg.split(",")
        return bifractional(_fraction(h), _fraction(k))
    raise UsageError(f"unknown mixed component {text!r}")


def _spec_from_args(args) -> GaussianSpec:
    fam = args.family
    try:
        if fam == "brownian":
            spec = brownian()
        elif fam == "fbm":
            if args.H is None:
                raise UsageError("fbm needs --H")
            spec = fbm(args.H)
        elif fam == "bifractional":
            if args.H is None or args.K is None:
                raise UsageError("bifractional needs --H and --K")
            spec = bifractional(args.H, args.K)
        elif fam == "mixed":
            if not args.components:
                raise UsageError("mixed needs --components")
            spec = mixed(*[_parse_component(c) for c in args.components.split(",")])
        else:
            raise UsageError(f"unknown family {fam!r}")
    except ValueError as exc:  # parameter validation from the spec constructors
        raise UsageError(str(exc)) from exc
    if args.scale is not None and args.scale != 1.0:
        spec = scaled(spec, args.scale)
    return spec


def _ladder_steps(text: str) -> tuple[int, ...]:
    try:
        steps = tuple(int(s) for s in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad ladder {text!r}: {exc}") from exc
    return steps


def _out_dir(args) -> FsPath:
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_record(args, command: str, extra: dict | None = None) -> dict:
    skip = {"func", "config"}
    record = {k: v for k, v in vars(args).items() if k not in skip}
    record["command"] = command
    record["version"] = __version__
    if extra:
        record.update(extra)
    return record


def _common_flags(p: argparse.ArgumentParser, add_N: bool = True) -> None:
    p.add_argument("--T", type=float, default=1.0, help="horizon (default 1)")
    if add_N:
        p.add_argument("--N", type=int, default=4096, help="grid steps (default 4096)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default=os.environ.get("CVRLAB_OUT", "runs"),
                   help="output directory (env CVRLAB_OUT)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("--config", default=None,
                   help="key=value config file; flags override file values")


def _family_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", default="brownian",
                   choices=["brownian", "fbm", "bifractional", "mixed"])
    p.add_argument("--H", type=_fraction, default=None, help="Hurst parameter")
    p.add_argument("--K", type=_fraction, default=None, help="bifractional K")
    p.add_argument("--scale", type=float, default=None, help="scale the process")
    p.add_argument("--components", default=None,
                   help="mixed components, e.g. brownian,fbm:0.75")


def _mc_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ladder", default=DEFAULT_LADDER,
                   help=f"eps ladder as dt multiples (default {DEFAULT_LADDER})")
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--statistic", default="sup", choices=["sup", "terminal"])


def cmd_paths(args) -> int:
    spec = _spec_from_args(args)
    grid = make_grid(args.T, args.N)
    path = sample(spec, grid, args.seed)
    out = _out_dir(args)
    write_path_csv(path, out / "path.csv",
                   meta={"spec": spec.to_dict(), "seed": args.seed})
    write_manifest(_manifest_record(args, "paths", {"spec": spec.to_dict()}),
                   out / "manifest.jsonl")
    if not args.no_plot:
        from .plotting import plot_paths
        plot_paths([path], out / "paths.png", title=spec.label)
    print(f"paths: wrote {out / 'path.csv'} ({spec.label}, seed {args.seed})")
    return EXIT_OK


def cmd_qv(args) -> int:
    spec = _spec_from_args(args)
    out = _out_dir(args)
    if args.mutual:
        if spec.family != "mixed":
            raise UsageError("--mutual needs --family mixed with --components")
        reports = mutual_qv_experiment(spec, args.N, args.T,
                                       _ladder_steps(args.ladder), args.replicas,
                                       args.tolerance, args.seed,
                                       statistic=args.statistic)
        worst_ok = True
        for (i, j), rep in sorted(reports.items()):
            write_convergence_csv(rep, out / f"qv_mutual_{i}_{j}.csv")
            worst_ok = worst_ok and rep.passed
            print(f"qv[mutual {i},{j}]: vs {rep.reference} -> {rep.verdict} "
                  f"(median@smallest={rep.rows[-1][1]:.4g})")
        write_manifest(_manifest_record(args, "qv", {"spec": spec.to_dict()}),
                       out / "manifest.jsonl")
        return EXIT_OK if worst_ok else EXIT_FAIL_VERDICT
    report = qv_experiment(spec, args.N, args.T, _ladder_steps(args.ladder),
                           args.replicas, args.tolerance, args.seed,
                           statistic=args.statistic)
    write_convergence_csv(report, out / "qv_report.csv")
    write_manifest(_manifest_record(args, "qv", {"spec": spec.to_dict(),
                                                 "reference": report.reference}),
                   out / "manifest.jsonl")
    if not args.no_plot:
        from .plotting import plot_convergence
        plot_convergence(report, out / "qv_convergence.png",
                         title=f"[{spec.label}] vs {report.reference}")
    print(f"qv: {spec.label} vs {report.reference} -> {report.verdict} "
          f"(median@smallest={report.rows[-1][1]:.4g}, tol={report.tolerance})")
    return EXIT_OK if report.passed else EXIT_FAIL_VERDICT


def cmd_chiqv(args) -> int:
    spec = _spec_from_args(args)
    grid = make_grid(args.T, args.N)
    out = _out_dir(args)
    steps = _ladder_steps(args.ladder)
    if args.phi == "global":
        report = global_norm_experiment(spec, args.N, args.T, args.tau, steps,
                                        args.replicas, args.seed)
        write_global_norm_csv(report.rows, out / "global_norm.csv")
        write_manifest(_manifest_record(args, "chiqv", {
            "spec": spec.to_dict(), "slope": report.slope,
            "r_squared": report.r_squared, "ratio_smallest": report.ratio_smallest,
        }), out / "manifest.jsonl")
        if not args.no_plot:
            from .plotting import plot_global_norm
            plot_global_norm(report, out / "global_norm.png", args.T,
                             title=f"window of {spec.label}, tau={args.tau:g}")
        print(f"chiqv[global]: slope={report.slope:.3f} R2={report.r_squared:.3f} "
              f"ratio@smallest={report.ratio_smallest:.3f} (informational)")
        return EXIT_OK
    try:
        phi = phi_preset(args.phi, args.tau, grid.dt)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = chi_qv_experiment(spec, args.N, args.T, args.tau, phi, steps,
                               args.replicas, args.tolerance, args.seed,
                               statistic=args.statistic)
    write_chi_qv_csv(result, out / "chiqv_report.csv")
    write_manifest(_manifest_record(args, "chiqv", {
        "spec": spec.to_dict(), "phi": phi.to_dict(),
        "h1_median": result.h1_median, "h1_max": result.h1_max,
        "h1_bounded": result.h1_bounded,
    }), out / "manifest.jsonl")
    if not args.no_plot:
        from .plotting import plot_chi_qv, plot_convergence
        plot_chi_qv(result, out / "chiqv_estimates.png",
                    title=f"{args.phi} on window of {spec.label}")
        plot_convergence(result.report, out / "chiqv_convergence.png")
    rep = result.report
    print(f"chiqv[{args.phi}]: {spec.label} vs {rep.reference} -> {rep.verdict} "
          f"(median@smallest={rep.rows[-1][1]:.4g}, H1 bounded: {result.h1_bounded})")
    return EXIT_OK if rep.verdict in ("pass", "informational") else EXIT_FAIL_VERDICT


def cmd_ito(args) -> int:
    spec = _spec_from_args(args)
    try:
        F = make_functional(args.functional)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report, rep0 = ito_experiment(F, spec, args.N, args.T, args.tau,
                                  _ladder_steps(args.ladder), args.replicas,
                                  args.tolerance, args.seed,
                                  use_estimated_qv=args.estimated_qv)
    out = _out_dir(args)
    write_convergence_csv(report, out / "ito_report.csv")
    write_ito_terms_csv(rep0, out / "ito_terms.csv")
    write_manifest(_manifest_record(args, "ito", {"spec": spec.to_dict()}),
                   out / "manifest.jsonl")
    if not args.no_plot:
        from .plotting import plot_convergence, plot_ito_terms
        plot_ito_terms(rep0, out / "ito_residuals.png")
        plot_convergence(report, out / "ito_convergence.png",
                         title=f"residual: {F.name} on {spec.label}")
    print(f"ito[{F.name}]: {spec.label} residual -> {report.verdict} "
          f"(median@smallest={report.rows[-1][1]:.4g})")
    return EXIT_OK if report.passed else EXIT_FAIL_VERDICT


def cmd_replicate(args) -> int:
    spec = _spec_from_args(args)
    Ns = [int(n) for n in str(args.N).split(",")]
    out = _out_dir(args)
    if args.mode == "vanilla":
        try:
            payoff = make_payoff(args.payoff)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        exp = hedge_experiment(payoff, spec, Ns, args.T, args.replicas, args.seed,
                               Q=args.quadrature, certify=not args.no_certify)
    else:
        payoff = make_payoff(args.payoff)
        f = lambda y: payoff.f(y[0])
        grad = lambda y: payoff.df(y)  # first axis indexes the single coordinate
        if args.phi_fn == "const":
            phis = [lambda t: np.ones_like(np.asarray(t, dtype=float))]
        elif args.phi_fn == "linear-decay":
            phis = [lambda t: args.T - np.asarray(t, dtype=float)]
        else:
            raise UsageError(f"unknown --phi-fn {args.phi_fn!r}")
        mode = {"wiener-zero": "zero-qv", "wiener-brownian": "brownian-qv"}[args.mode]
        exp = wiener_hedge_experiment(f, grad, phis, spec, Ns, args.T,
                                      args.replicas, args.seed, mode=mode,
                                      Q=args.quadrature)
    rows = [(r, res) for (_, r, res) in exp.rows]
    write_hedge_csv(rows, out / "hedge_report.csv")
    write_manifest(_manifest_record(args, "replicate", {
        "spec": spec.to_dict(), "h0": exp.h0,
        "medians": {str(k): v for k, v in exp.medians.items()},
    }), out / "manifest.jsonl")
    if not args.no_plot:
        from .plotting import plot_hedge_errors
        plot_hedge_errors(exp, out / "hedge_errors.png")
    med = ", ".join(f"N={N}: {exp.medians[N]:.4g}" for N in sorted(exp.medians))
    print(f"replicate[{exp.payoff}]: {spec.label} H0={exp.h0:.6g} median errors {med}")
    worst = max(exp.medians.values())
    return EXIT_OK if worst < args.tolerance else EXIT_FAIL_VERDICT


def build_parser() -> _Parser:
    parser = _Parser(prog="cvrlab",
                     description="stochastic calculus via regularization, numerically")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("paths", help="sample and dump Gaussian paths")
    _common_flags(p)
    _family_flags(p)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("qv", help="quadratic-variation convergence report")
    _common_flags(p)
    _family_flags(p)
    _mc_flags(p)
    p.add_argument("--mutual", action="store_true",
                   help="report pairwise component brackets of a mixed family")
    p.set_defaults(func=cmd_qv)

    p = sub.add_parser("chiqv", help="chi-quadratic-variation suite")
    _common_flags(p)
    _family_flags(p)
    _mc_flags(p)
    p.add_argument("--tau", type=float, default=0.5, help="window lag (default 0.5)")
    p.add_argument("--phi", default="atomic00",
                   help="chi element: atomic00[:lam], l2[:c], diag[:c], chi0[:lam], global")
    p.set_defaults(func=cmd_chiqv)

    p = sub.add_parser("ito", help="window Ito-formula residual report")
    _common_flags(p)
    _family_flags(p)
    _mc_flags(p)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--functional", default="endpoint:square",
                   help=f"one of {', '.join(FUNCTIONAL_NAMES)}")
    p.add_argument("--estimated-qv", action="store_true",
                   help="use the eps-estimated qv in the quadratic term")
    p.set_defaults(func=cmd_ito)

    p = sub.add_parser("replicate", help="hedging / replication experiments")
    _common_flags(p, add_N=False)
    _family_flags(p)
    p.add_argument("--N", default="4096",
                   help="grid steps, comma list for a resolution sweep")
    p.add_argument("--payoff", default="square",
                   help="linear | square | cos | call:<strike>")
    p.add_argument("--mode", default="vanilla",
                   choices=["vanilla", "wiener-zero", "wiener-brownian"])
    p.add_argument("--phi-fn", default="const", choices=["const", "linear-decay"],
                   help="Wiener-integral kernel for the wiener modes: 1 or T-s")
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--quadrature", type=int, default=64, help="Gauss-Hermite nodes")
    p.add_argument("--no-certify", action="store_true",
                   help="skip the family-level qv certification")
    p.set_defaults(func=cmd_replicate)
    return parser


def _apply_config_file(argv: list[str], parser: _Parser) -> list[str]:
    """Prepend key=value pairs from --config as flags (explicit flags win
    because argparse keeps the last occurrence)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        cfg_path = argv[idx + 1]
    except IndexError as exc:
        raise UsageError("--config needs a file argument") from exc
    lines = FsPath(cfg_path).read_text().splitlines()
    extra: list[str] = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"bad config line {line!r} (want key=value)")
        key, val = (s.strip() for s in line.split("=", 1))
        if val.lower() in ("true", "false"):
            if val.lower() == "true":
                extra.append(f"--{key}")
        else:
            extra.extend([f"--{key}", val])
    # subcommand first, then config defaults, then the explicit flags
    return argv[:1] + extra + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
