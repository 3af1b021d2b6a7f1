"""Command-line front end: ``fit``, ``validate-approx`` and ``km``."""
from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from .data_io import DataError, RawDataset, builtin_leukemia, load_csv, simulate_weibull_mixture
from .gibbs import GibbsConfig, run_chain, write_trace
from .inference import (kaplan_meier, t_by_t_summaries, write_km_csv, write_median_json, write_moments_csv,
                        write_summary_csv)
from .polyapprox import DegenerateMoments, IllConditionedBasis
from .sampler import DEFAULT_SAMPLES, ZeroWeights
from .validation import FAMILIES, SyntheticFamily, interval_table, l2_error_curve, write_interval_csv, write_l2_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (FloatingPointError, ArithmeticError, ZeroWeights, IllConditionedBasis, DegenerateMoments)

log = logging.getLogger("hazmix")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: str | None
    M: float | None
    q: int
    N: int
    l_max: int
    l_min: int
    samples: int
    seed: int
    out: Path
    trace: bool = False


def load_source(data: str | None, simulate: str | None, seed: int) -> RawDataset:
    if (data is None) == (simulate is None):
        raise UsageError("give exactly one of --data or --simulate")
    if simulate is not None:
        m = re.fullmatch(r"weibull-mix:n=(\d+)", simulate)
        if not m:
            raise UsageError(f"unknown simulation spec {simulate!r} (expected weibull-mix:n=<int>)")
        return simulate_weibull_mixture(int(m.group(1)), seed)
    if data.startswith("builtin:"):
        treat, plac = builtin_leukemia()
        table = {"leukemia-treatment": treat, "leukemia-placebo": plac}
        try:
            return table[data.split(":", 1)[1]]
        except KeyError:
            raise UsageError(f"unknown builtin dataset {data!r}; choose from "
                             + ", ".join(f"builtin:{k}" for k in table)) from None
    try:
        return load_csv(data)
    except FileNotFoundError:
        raise UsageError(f"no such file: {data}") from None


def cmd_fit(cfg: RunConfig, ds: RawDataset) -> dict:
    if not ds.events.any():
        raise DataError("fitting needs at least one exact (uncensored) observation")
    data = ds.to_survival()
    M = cfg.M if cfg.M is not None else 2.0 * float(ds.times.max())
    gc = GibbsConfig(l_max=cfg.l_max, l_min=cfg.l_min, seed=cfg.seed, order=cfg.N, q=cfg.q, M=M)
    est = run_chain(data, gc)
    summary = t_by_t_summaries(est, n_samples=cfg.samples, seed=cfg.seed)
    ms = summary.median_survival()
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(cfg.out / "summary.csv", summary)
    write_median_json(cfg.out / "median_survival.json", ms)
    write_moments_csv(cfg.out / "moments.csv", est)
    if cfg.trace:
        write_trace(cfg.out / "trace.csv", est)
    return {"m_hat": ms.m_hat, "interval": (ms.lo, ms.hi)}


def cmd_validate_approx(cfg: RunConfig) -> dict:
    fams = [SyntheticFamily(tag) for tag in FAMILIES]
    curves = {f.tag: l2_error_curve(f) for f in fams}
    rows = [row for f in fams for row in interval_table(f, cfg.N, cfg.samples, cfg.seed)]
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_l2_csv(cfg.out / "l2_error.csv", curves)
    write_interval_csv(cfg.out / "intervals.csv", rows)
    return curves


def cmd_km(cfg: RunConfig, ds: RawDataset) -> float:
    if len(ds) == 0:
        raise DataError("empty dataset")
    km = kaplan_meier(ds.times, ds.events)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_km_csv(cfg.out / "km.csv", km)
    return km.median()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hazmix", description="Moment-based posterior inference for hazard mixture models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        if data:
            sp.add_argument("--data", help="CSV path with header time,event, or builtin:leukemia-treatment"
                                           " / builtin:leukemia-placebo")
            sp.add_argument("--simulate", help="weibull-mix:n=<int> (drawn with --seed)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("out"))

    fit = sub.add_parser("fit", help="run the sampler and write posterior summaries")
    common(fit)
    fit.add_argument("--M", type=float, default=None, help="grid upper end (default: twice the largest time)")
    fit.add_argument("--q", type=int, default=50, help="number of grid points")
    fit.add_argument("--N", type=int, default=10, help="number of moments")
    fit.add_argument("--iters", type=int, default=10_000, help="total Gibbs iterations")
    fit.add_argument("--burnin", type=int, default=1_000, help="burn-in iterations")
    fit.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="importance samples per grid time")
    fit.add_argument("--trace", action="store_true", help="also write trace.csv")

    val = sub.add_parser("validate-approx", help="reconstruction study on synthetic families")
    common(val, data=False)
    val.add_argument("--N", type=int, default=10, help="order used for the interval table")
    val.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)

    km = sub.add_parser("km", help="Kaplan-Meier estimate")
    common(km)
    return p


def _config(args) -> RunConfig:
    N = getattr(args, "N", 10)
    if N < 2:
        raise UsageError("--N must be at least 2 (two moments fix the weight)")
    samples = getattr(args, "samples", DEFAULT_SAMPLES)
    if samples < 1:
        raise UsageError("--samples must be positive")
    q, M = getattr(args, "q", 50), getattr(args, "M", None)
    iters, burn = getattr(args, "iters", 2), getattr(args, "burnin", 1)
    if q < 2:
        raise UsageError("--q must be at least 2")
    if M is not None and not M > 0:
        raise UsageError("--M must be positive")
    if not 0 <= burn < iters:
        raise UsageError("need 0 <= --burnin < --iters")
    return RunConfig(args.command, getattr(args, "data", None) or getattr(args, "simulate", None), M, q, N,
                     iters, burn, samples, args.seed, args.out, getattr(args, "trace", False))


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "validate-approx":
            curves = cmd_validate_approx(cfg)
            for tag, curve in curves.items():
                print(tag, " ".join(f"N={n}:{v:.4g}" for n, v in curve.items()))
            return EXIT_OK
        ds = load_source(args.data, args.simulate, args.seed)
        if args.command == "fit":
            res = cmd_fit(cfg, ds)
            lo, hi = res["interval"]
            print(f"median survival time {res['m_hat']:.4g}, 95% interval ({lo:.4g}, {hi:.4g})")
        else:
            print(f"Kaplan-Meier median {cmd_km(cfg, ds):.4g}")
        return EXIT_OK
    except (UsageError, DataError) as exc:
        print(f"hazmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"hazmix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
