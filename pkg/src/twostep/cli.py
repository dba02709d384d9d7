"""Command-line entry point: ``twostep {test,diagnose,cutpoint,simulate,copula,theory}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import fileio
from .diagnostics import diagnose, select_cutpoint
from .errors import DatasetParseError, InfeasibleError, InvalidInputError
from .harness import (CELL_COLUMNS, COPULA_COLUMNS, ExperimentConfig, copula_size_experiment,
                      run_grid)
from .inference import two_step
from .perm_engine import SeedSpec
from .theory import TheoryParams, aksa_asymptotic_power, average_effect, noncentrality

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _range_grid(text: str) -> list[float]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError("need step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twostep", description="Two-step permutation test for zero-inflated biomarkers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="run the two-step test on a y,t,x CSV")
    t.add_argument("--input", required=True)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--perms", type=int, default=1000)
    t.add_argument("--seed", type=_u64, default=0)
    t.add_argument("--out")

    d = sub.add_parser("diagnose", help="post-rejection diagnostics and effect curve")
    d.add_argument("--input", required=True)
    d.add_argument("--perms", type=int, default=1000)
    d.add_argument("--boot", type=int, default=1000)
    d.add_argument("--grid-size", type=int, default=50)
    d.add_argument("--seed", type=_u64, default=0)
    d.add_argument("--out", required=True)

    c = sub.add_parser("cutpoint", help="select a biomarker threshold")
    c.add_argument("--input", required=True)
    c.add_argument("--min-cell", type=int, default=5)
    c.add_argument("--perms", type=int, default=1000)
    c.add_argument("--boot", type=int, default=1000)
    c.add_argument("--seed", type=_u64, default=0)
    c.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="run a scenario grid from a YAML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int)
    s.add_argument("--seed", type=_u64)

    k = sub.add_parser("copula", help="Fisher/Brown size under copula-dependent p-values")
    k.add_argument("--rhos", type=_float_list, default=[round(0.1 * i, 1) for i in range(9)])
    k.add_argument("--draws", type=int, default=10_000)
    k.add_argument("--alpha", type=float, default=0.05)
    k.add_argument("--seed", type=_u64, default=0)
    k.add_argument("--out", required=True)

    h = sub.add_parser("theory", help="asymptotic AKSA power curve over pi0")
    h.add_argument("--delta0", type=float, required=True)
    h.add_argument("--d0", type=float, required=True)
    h.add_argument("--sigma", type=float, required=True)
    h.add_argument("--n", type=int, required=True)
    h.add_argument("--alpha", type=float, default=0.05)
    h.add_argument("--pi0-grid", type=_range_grid, default=_range_grid("0:0.8:0.1"))
    h.add_argument("--out", required=True)
    return p


_TEST_COLUMNS = ("n", "n_zero", "n_positive", "stat_a", "p_a", "degenerate_a", "stat_b", "p_b",
                 "degenerate_b", "s_fisher", "p_fisher", "rho_hat", "c", "nu", "s_brown", "p_brown",
                 "n_perms", "alpha", "reject_fisher", "reject_brown")


def _cmd_test(args) -> int:
    ds = fileio.load_dataset(args.input)
    res = two_step(ds, args.perms, SeedSpec(args.seed))
    row = {
        "n": len(ds), "n_zero": ds.n_zero, "n_positive": ds.n_positive,
        "stat_a": res.spike.statistic, "p_a": res.p_a, "degenerate_a": res.spike.degenerate,
        "stat_b": res.tail.statistic, "p_b": res.p_b, "degenerate_b": res.tail.degenerate,
        "s_fisher": res.s_fisher, "p_fisher": res.p_fisher, "rho_hat": res.rho_hat,
        "c": res.c, "nu": res.nu, "s_brown": res.s_brown, "p_brown": res.p_brown,
        "n_perms": args.perms, "alpha": args.alpha,
        "reject_fisher": res.p_fisher < args.alpha, "reject_brown": res.p_brown < args.alpha,
    }
    if args.out:
        fileio.write_results([row], args.out, _TEST_COLUMNS)
    for key in _TEST_COLUMNS:
        print(f"{key:>14}: {fileio.format_value(row[key])}")
    return EXIT_OK


_DIAG_COLUMNS = ("section", "name", "x", "value", "lo", "hi")


def _cmd_diagnose(args) -> int:
    ds = fileio.load_dataset(args.input)
    rep = diagnose(ds, args.perms, args.boot, SeedSpec(args.seed), grid_size=args.grid_size)
    rows = [{"section": "pvalue", "name": name, "value": getattr(rep, name)}
            for name in ("p_a", "p_b", "p_fisher", "p_brown", "p_main",
                         "p_interaction_only_fisher", "p_interaction_only_brown")]
    rows.append({"section": "effect", "name": "delta_main_hat", "value": rep.delta_main_hat})
    if rep.curve.spike_effect is not None:
        lo, hi = rep.curve.spike_band
        rows.append({"section": "effect", "name": "spike_effect", "x": 0.0,
                     "value": rep.curve.spike_effect, "lo": lo, "hi": hi})
    if rep.curve.degenerate:
        rows.append({"section": "curve", "name": "degenerate", "value": rep.curve.degenerate})
    for pt in rep.curve.points:
        rows.append({"section": "curve", "name": "effect", "x": pt.x, "value": pt.effect,
                     "lo": pt.band_lo, "hi": pt.band_hi})
    fileio.write_results(rows, args.out, _DIAG_COLUMNS)
    print(f"p_fisher={fileio.format_value(rep.p_fisher)} p_brown={fileio.format_value(rep.p_brown)} "
          f"p_main={fileio.format_value(rep.p_main)} "
          f"interaction-only p_fisher={fileio.format_value(rep.p_interaction_only_fisher)}")
    return EXIT_OK


_CUT_COLUMNS = ("tau_hat", "tau_lo", "tau_hi", "c_hat", "p_perm", "delta_le", "delta_le_lo",
                "delta_le_hi", "delta_gt", "delta_gt_lo", "delta_gt_hi", "n_candidates", "n_perms", "n_boot")


def _cmd_cutpoint(args) -> int:
    ds = fileio.load_dataset(args.input)
    r = select_cutpoint(ds, args.min_cell, args.perms, args.boot, SeedSpec(args.seed))
    row = {"tau_hat": r.tau_hat, "tau_lo": r.tau_ci[0], "tau_hi": r.tau_ci[1], "c_hat": r.c_hat,
           "p_perm": r.p_perm, "delta_le": r.delta_le, "delta_le_lo": r.delta_le_ci[0],
           "delta_le_hi": r.delta_le_ci[1], "delta_gt": r.delta_gt, "delta_gt_lo": r.delta_gt_ci[0],
           "delta_gt_hi": r.delta_gt_ci[1], "n_candidates": r.n_candidates,
           "n_perms": r.n_perms, "n_boot": r.n_boot}
    fileio.write_results([row], args.out, _CUT_COLUMNS)
    print(f"tau_hat={fileio.format_value(r.tau_hat)} C={fileio.format_value(r.c_hat)} "
          f"p_perm={fileio.format_value(r.p_perm)}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    kwargs = fileio.load_experiment_config(args.config)
    if args.threads is not None:
        kwargs["threads"] = args.threads
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    cells = run_grid(ExperimentConfig(**kwargs))
    fileio.write_results(cells, args.out, CELL_COLUMNS)
    print(f"wrote {len(cells)} cells to {args.out}")
    return EXIT_OK


def _cmd_copula(args) -> int:
    if args.draws < 1:
        raise InvalidInputError("--draws must be >= 1")
    rows = copula_size_experiment(args.rhos, args.draws, args.alpha, SeedSpec(args.seed))
    fileio.write_results(rows, args.out, COPULA_COLUMNS)
    for r in rows:
        print(f"rho={r.rho:<5g} {r.method:<7} rate={r.rate:.4f} [{r.ci_lo:.4f}, {r.ci_hi:.4f}] "
              f"threshold={r.threshold:.5f}")
    return EXIT_OK


def _cmd_theory(args) -> int:
    params = TheoryParams(args.delta0, args.d0, args.sigma, args.n, args.alpha)
    rows = [{"pi0": pi0, "average_effect": average_effect(params, pi0),
             "noncentrality": noncentrality(params, pi0),
             "power": aksa_asymptotic_power(params, pi0)} for pi0 in args.pi0_grid]
    fileio.write_results(rows, args.out, ("pi0", "average_effect", "noncentrality", "power"))
    return EXIT_OK


_COMMANDS = {"test": _cmd_test, "diagnose": _cmd_diagnose, "cutpoint": _cmd_cutpoint,
             "simulate": _cmd_simulate, "copula": _cmd_copula, "theory": _cmd_theory}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (DatasetParseError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
