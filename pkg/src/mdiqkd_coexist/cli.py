"""Command-line entry point: ``sweep``, ``calibrate``, ``oracle`` and ``tables``.

Every subcommand exits 0 only when all of its checks pass.
"""
from __future__ import annotations

import argparse
import sys
import time

from . import calibration, runner
from .channel import FibreSpec
from .errors import ConfigError, DomainError
from .keyrate import gains_and_errors


def cmd_sweep(args) -> int:
    scenarios = runner.load_config(args.config)
    result = runner.run_sweep(scenarios, workers=args.workers)
    runner.emit_report(result, args.output, "csv")
    summary = runner.text_summary(result)
    if args.summary:
        runner.emit_report(result, args.summary, "text")
    print(summary, end="")
    print(f"wrote {len(result.rows)} rows to {args.output}")
    return 0 if all(result.invariant_flags().values()) else 1


def cmd_calibrate(args) -> int:
    ctx = calibration.MeasurementContext(counts_scope=args.counts_scope)
    table = calibration.load_table(args.table, ctx)
    fibre = FibreSpec(ctx.length_km, args.alpha_q, args.alpha_c)
    worst = 0.0
    print("lambda_c_nm   counts_hz    beta_dlambda_per_km   round-trip rel. error")
    for wl, counts in zip(table.wavelengths_nm, table.counts_hz):
        beta = calibration.beta_from_table(table, wl, fibre)
        back = calibration.forward_counts(table, wl, fibre, ctx.eta_det, beta)
        err = abs(back - counts) / counts if counts else abs(back)
        worst = max(worst, err)
        print(f"{wl:10.1f}  {counts:10.1f}   {beta:.6e}          {err:.1e}")
    at = calibration.noise_counts_at(table, args.lambda_c)
    beta = calibration.beta_from_table(table, args.lambda_c, fibre)
    print(f"\ninterpolated counts at {args.lambda_c} nm: {at / 1e3:.3f} kHz, beta_dlambda = {beta:.6e} /km")
    ok = worst <= 1e-6
    print(f"{'PASS' if ok else 'FAIL'}  round trip within 1e-6 (worst {worst:.1e})")
    return 0 if ok else 1


def cmd_oracle(args) -> int:
    from .protocol import compare_with_analytic, run_campaign

    all_ok = True
    for n in args.n_channels:
        sc = runner.Scenario(id=f"oracle/N={n}", length_km=args.length_km, n_channels=n)
        link = sc.link()
        t0 = time.perf_counter()
        result = run_campaign(link, args.cycles, args.seed, workers=args.workers)
        elapsed = time.perf_counter() - t0
        rows = compare_with_analytic(result, gains_and_errors(link))
        print(f"\n{sc.id}: {args.cycles:.3g} cycles, seed {args.seed}, noise_p {link.noise_p:.3e}, {elapsed:.1f} s")
        print("pair          quantity   simulated      analytic       z")
        for r in rows:
            z = f"{r.z:+.2f}" if r.testable else "n/a"
            print(f"{r.pair[0]:>5}/{r.pair[1]:<6}  {r.quantity:<8}  {r.simulated:.6e}  {r.analytic:.6e}  {z}")
        ok = all(r.ok for r in rows)
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {sc.id}: all testable quantities within 3 sigma")
    return 0 if all_ok else 1


def cmd_tables(args) -> int:
    table = calibration.load_table(args.table)
    at = calibration.noise_counts_at(table, 1548.0)
    t1_ok = abs(at - 29602.0) < 0.5
    print(f"noise counts at 1548 nm: {at / 1e3:.3f} kHz  {'PASS' if t1_ok else 'FAIL'}\n")
    rows = runner.table2_comparison()
    print(runner.format_table2(rows), end="")
    t2_ok = all(r.within_band for r in rows)
    print(f"{'PASS' if t2_ok else 'FAIL'}  all computed rates within the measured one-sigma bands")
    return 0 if t1_ok and t2_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdiqkd-coexist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="evaluate the scenarios of a TOML config and write a CSV")
    p.add_argument("config")
    p.add_argument("-o", "--output", default="sweep.csv")
    p.add_argument("--summary", help="also write the text summary here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="extract beta_dlambda from a noise table")
    p.add_argument("--table", help="CSV with wavelength_nm,counts_hz (default: shipped table)")
    p.add_argument("--counts-scope", choices=("detector", "charlie"), default="detector")
    p.add_argument("--lambda-c", type=float, default=1548.0)
    p.add_argument("--alpha-q", type=float, default=0.20, help="dB/km")
    p.add_argument("--alpha-c", type=float, default=0.30, help="dB/km")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("oracle", help="compare the Monte Carlo engine with the analytic model")
    p.add_argument("--cycles", type=lambda s: int(float(s)), default=10_000_000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--length-km", type=float, default=20.0, help="per arm")
    p.add_argument("--n-channels", type=int, nargs="+", default=[0, 5])
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("tables", help="noise-table interpolation and measured key-rate comparison")
    p.add_argument("--table")
    p.set_defaults(func=cmd_tables)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
