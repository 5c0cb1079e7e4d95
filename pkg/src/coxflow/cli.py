"""Command-line front end.

Subcommands: simulate, estimate, figures, asymptotics, regime-check.
Every flag can also come from a key=value config file (flags win).  All
outputs are plot-ready CSV; no rendering is done here.  Exit codes: 0 ok,
1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import cycles, io, limits
from .estimation import check_regime, estimate, estimate_yt
from .experiments import (
    ExperimentConfig,
    figure_data,
    simulate_replicates,
    write_figure_data,
)
from .model import ModelParams, ResponseFunction


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}")


def _shared_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    add = shared.add_argument
    add("--config", help="key=value config file; explicit flags override it")
    add("--sigma", type=float)
    add("--mu", type=float)
    add("--horizon", type=float)
    add("--bins", type=int)
    add("--p0", type=int)
    add("--seed", type=int)
    add("--reps", type=int)
    add("--response", help="linear | cubic | constant | table:<path>")
    add("--out", help="output directory")
    add("--threads", type=int)
    add("--u-grid", type=int, dest="u_grid")
    add("--t-grid", type=int, dest="t_grid")
    return shared


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = _Parser(prog="coxflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[shared], help="write replicate path CSVs")

    p_est = sub.add_parser("estimate", parents=[shared], help="estimate from an event CSV")
    p_est.add_argument("events", help="event CSV (record format or time[,bid_level])")
    p_est.add_argument("--times", help="comma-separated times for price estimates")

    sub.add_parser("figures", parents=[shared], help="replicated shape-estimate bands")

    p_asy = sub.add_parser("asymptotics", parents=[shared], help="cycle oracle and CLT report")
    p_asy.add_argument("--cycles", type=int, default=100_000)
    p_asy.add_argument("--step", type=float, default=None)
    p_asy.add_argument("--clt-reps", type=int, default=300, dest="clt_reps")
    p_asy.add_argument("--rate-reps", type=int, default=300, dest="rate_reps")

    sub.add_parser("regime-check", parents=[shared], help="asymptotic-regime ratios")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {
        name: getattr(args, name)
        for name in (
            "sigma", "mu", "horizon", "bins", "p0", "seed",
            "reps", "response", "out", "threads", "u_grid", "t_grid",
        )
        if getattr(args, name, None) is not None
    }
    return replace(config, **overrides)


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(config: ExperimentConfig) -> int:
    out = _out_dir(config)
    paths = simulate_replicates(
        config.params(), config.response_function(), config.reps, out, config.threads
    )
    config.save(out / "config.used")
    print(f"wrote {len(paths)} replicate files to {out}")
    return 0


def cmd_estimate(config: ExperimentConfig, events: str, times: str | None) -> int:
    stream = io.read_event_stream(events)
    result = estimate(stream, config.bins)
    out = _out_dir(config)
    h_path, inv_path = io.write_estimation(result, out)
    print(f"mu_hat={result.mu_hat} -> {h_path}, {inv_path}")
    if times:
        t_values = [float(t) for t in times.split(",")]
        y_path = out / "estimate_y_hat.csv"
        with open(y_path, "w", newline="\n") as fh:
            fh.write("t,y_hat\n")
            for t in t_values:
                fh.write(f"{t!r},{estimate_yt(result, stream, t)!r}\n")
        print(f"price estimates -> {y_path}")
    return 0


def cmd_figures(config: ExperimentConfig) -> int:
    h = config.response_function()
    if h.kind == "table":
        raise ValueError("figures supports the closed-form response kinds only")
    fig = figure_data(
        config.params(), h, config.reps, config.u_grid, config.threads
    )
    out = _out_dir(config)
    path = write_figure_data(fig, out / f"figure_{h.kind}.csv")
    print(f"wrote {path} ({fig.reps_used} replicates)")
    return 0


def cmd_regime_check(config: ExperimentConfig) -> int:
    report = check_regime(config.params())
    for name, ratio, flagged in (
        ("horizon_vs_mu", report.ratio_mu, report.flags["mu_growth"]),
        ("horizon_vs_bins", report.ratio_bins, report.flags["bin_growth"]),
        ("bins_vs_mu", report.ratio_bins_mu, report.flags["bins_vs_mu"]),
    ):
        status = "WARN" if flagged else "ok"
        print(f"{name}: {ratio:.4g} [{status}]")
    print("advisory:", "some ratios exceed 1" if not report.ok else "all ratios below 1")
    return 0


def cmd_asymptotics(config: ExperimentConfig, n_cycles: int, step: float | None,
                    clt_reps: int, rate_reps: int) -> int:
    out = _out_dir(config)
    h = config.response_function()
    sigma = config.sigma
    lines = []

    def emit(line):
        lines.append(line)
        print(line)

    stats = cycles.cycle_statistics(
        sigma, h, n_cycles=n_cycles, step=step, seed=config.seed, keep_taus=True
    )
    io.write_cycle_stats(stats, out / "cycle_stats.csv")

    def zline(label, value, target, se):
        z = (value - target) / se if se > 0 else math.inf
        emit(f"{label}: mc={value:.6g} target={target:.6g} z={z:+.2f} "
             f"[{'pass' if abs(z) < 3 else 'FAIL'}]")

    zline("mean_tau1", stats.mean_tau1, 1.0 / sigma**2, stats.se_mean_tau1)
    zline("mean_tau1_sq", stats.mean_tau1_sq, 5.0 / (3.0 * sigma**4), stats.se_mean_tau1_sq)
    for check in cycles.laplace_check(sigma, [0.5, 1.0, 2.0], taus=stats.taus):
        emit(
            f"laplace gamma={check.gamma}: mc={check.mc_mean:.6g} "
            f"closed_form={check.closed_form:.6g} z={check.z_score:+.2f} "
            f"[{'pass' if abs(check.z_score) < 3 else 'FAIL'}]"
        )
    emit(f"var_zh: {stats.var_zh:.6g} +- {stats.se_var_zh:.2g}")

    if clt_reps > 0 and not h.assumption_warning:
        params = config.params()
        report = limits.clt_verify_mu(params, h, clt_reps, stats)
        var_se = report.limit_var * math.sqrt(2.0 / clt_reps)
        z = (report.sample_var - report.limit_var) / var_se if var_se > 0 else math.inf
        emit(
            f"clt mu_hat: sample_var={report.sample_var:.4g} "
            f"limit_var={report.limit_var:.4g} z={z:+.2f} jb_p={report.jb_pvalue:.3f} "
            f"[{'pass' if abs(z) < 3 else 'FAIL'}]"
        )
        t_point = 0.5 * h.sup_value
        report = limits.clt_verify_hinv(params, h, t_point, clt_reps, stats)
        z = (report.sample_var - report.limit_var) / (
            report.limit_var * math.sqrt(2.0 / clt_reps)
        )
        emit(
            f"clt h_inv_hat({t_point:g}): sample_var={report.sample_var:.4g} "
            f"limit_var={report.limit_var:.4g} z={z:+.2f} jb_p={report.jb_pvalue:.3f} "
            f"[{'pass' if abs(z) < 4 else 'FAIL'}]"
        )

    if rate_reps > 0:
        small = config.params()
        # parametric-rate comparison at 4x the horizon with the other scales
        # grown to keep the regime ratios below one
        large = ModelParams(
            sigma=small.sigma, mu=small.mu * 128.0, horizon=small.horizon * 4.0,
            bins=small.bins * 8, p0=small.p0, seed=small.seed,
        )
        rate = limits.rmse_ratio_check(small, large, h, 0.5 * h.sup_value, rate_reps)
        emit(
            f"rate check: rmse({rate.horizon_small:g})={rate.rmse_small:.4g} "
            f"rmse({rate.horizon_large:g})={rate.rmse_large:.4g} ratio={rate.ratio:.2f} "
            f"[{'pass' if 1.6 <= rate.ratio <= 2.4 else 'FAIL'}]"
        )

    (out / "asymptotics_report.txt").write_text("\n".join(lines) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "estimate":
            return cmd_estimate(config, args.events, args.times)
        if args.command == "figures":
            return cmd_figures(config)
        if args.command == "asymptotics":
            return cmd_asymptotics(
                config, args.cycles, args.step, args.clt_reps, args.rate_reps
            )
        if args.command == "regime-check":
            return cmd_regime_check(config)
        raise ValueError(f"unknown command {args.command!r}")
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return exc.code if exc.code is not None else 0
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
