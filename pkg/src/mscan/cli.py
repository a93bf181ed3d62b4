"""Command-line interface: calibrate, scan, power, simulate-null.

All commands are bit-reproducible given the same flags and --seed, and the
output does not depend on --threads.  theta0 and signal parameters are given
on the mean scale (mu, p, lambda) and converted to natural parameters
internally.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, _kernels
from .calibrate import (
    export_text_sample,
    load_table,
    quantile,
    sample_null_statistics,
    simulate_null,
    simulate_null_tables,
    save_table,
    system_meta,
)
from .detect import detect
from .errors import DomainError
from .families import make_model
from .gridio import read_grid_any
from .power import AnomalySpec, power_study
from .regions import Region, RegionSystem, recommended_v

_KNOWN_ERRORS = (
    "DomainError",
    "EmptyScaleSetError",
    "EmptyRegionError",
    "RegionCapError",
    "CalibrationMismatchError",
    "BudgetExceededError",
    "GridFormatError",
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DETECTED = 2


def _parse_scales(text):
    if text in ("all", "dyadic"):
        return text
    entries = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "x" in tok:
            entries.append(tuple(int(p) for p in tok.split("x")))
        else:
            entries.append(int(tok))
    if not entries:
        raise DomainError(f"could not parse scale list {text!r}")
    return tuple(entries)


def _parse_float_list(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_int_list(text):
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _add_system_flags(p):
    p.add_argument("--n", type=int, required=True, help="grid side length")
    p.add_argument("--d", type=int, default=2, help="grid dimension")
    p.add_argument("--system", choices=("cubes", "rects"), default="cubes")
    p.add_argument("--rn", type=int, default=None, help="minimum region size (grid points)")
    p.add_argument("--v", default="auto", help="penalty constant, or 'auto' for the recommended value")
    p.add_argument("--scales", default="all", help="all | dyadic | comma list (e.g. 2,3,4 or 2x3,4x4)")


def _add_model_flags(p):
    p.add_argument("--model", choices=("gaussian", "bernoulli", "poisson"), default="gaussian")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian standard deviation")
    p.add_argument("--theta0", type=float, default=0.0, help="baseline on the mean scale (mu, p, lambda)")


def _add_common_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="cap kernel parallelism (results unchanged)")


def _build_system(args, v=None):
    v_arg = v
    if v_arg is None:
        v_arg = None if args.v == "auto" else float(args.v)
    return RegionSystem(
        kind=args.system,
        d=args.d,
        n=args.n,
        min_size=args.rn,
        v=v_arg,
        scale_policy=_parse_scales(args.scales),
    )


def _build_model(args):
    model = make_model(args.model, sigma=args.sigma)
    return model, model.theta_from_mean(args.theta0)


def _v_list(args):
    if args.v == "auto":
        return [recommended_v(args.system, args.d)]
    return _parse_float_list(args.v)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_calibrate(args):
    _kernels.set_threads(args.threads)
    system = _build_system(args)
    table = simulate_null(system, args.reps, args.seed)
    save_table(table, args.out)
    if args.text_out:
        export_text_sample(
            table.sample,
            args.text_out,
            header=[f"{k}={v}" for k, v in sorted(table.meta.items())],
        )
    print(f"calibrated n={system.n} d={system.d} kind={system.kind} v={system.v} N={args.reps}")
    for alpha in (0.01, 0.05, 0.1):
        print(f"  q[alpha={alpha}] = {quantile(table, alpha):.6f}")
    print(f"table written to {args.out}")
    return EXIT_OK


def cmd_scan(args):
    _kernels.set_threads(args.threads)
    system = _build_system(args)
    model, theta0 = _build_model(args)
    field = read_grid_any(args.grid, args.format)
    if args.table:
        table = load_table(
            args.table,
            expected_meta=system_meta(system, 0, 0),
            override=args.allow_table_mismatch,
        )
    elif args.reps:
        table = simulate_null(system, args.reps, args.seed)
    else:
        raise DomainError("provide a calibration table (--table) or inline replicates (--reps)")
    report = detect(
        field,
        model,
        theta0,
        system,
        table,
        args.alpha,
        mode=args.mode,
        allow_mismatch=args.allow_table_mismatch,
    )
    with open(args.out, "w", newline="\n") as fh:
        fh.write(report.to_json())
    status = "DETECTED" if report.detected else "no detection"
    print(
        f"{status}: statistic={report.statistic:.6f} q={report.q:.6f} "
        f"alpha={args.alpha} regions={len(report.significant)}"
    )
    print(f"report written to {args.out}")
    if args.exit_status and report.detected:
        return EXIT_DETECTED
    return EXIT_OK


_POWER_COLUMNS = (
    "family",
    "n",
    "d",
    "kind",
    "block",
    "theta1",
    "v",
    "alpha",
    "power",
    "std_err",
    "replicates",
    "boundary_gap",
)


def cmd_power(args):
    _kernels.set_threads(args.threads)
    model, theta0 = _build_model(args)
    v_values = _v_list(args)
    system = _build_system(args, v=v_values[0])
    tables = simulate_null_tables(system, v_values, args.calib_reps, args.seed)
    anomalies = []
    for side in _parse_int_list(args.blocks):
        anchor = tuple((args.n - side) // 2 + 1 for _ in range(args.d))
        block = Region(anchor, (side,) * args.d)
        for mean1 in _parse_float_list(args.signals):
            theta1 = model.theta_from_mean(mean1)
            # a signal equal to the baseline is the null row of the sweep
            anomalies.append(
                None if theta1 == theta0 else AnomalySpec(block=block, theta1=theta1, theta0=theta0)
            )
    rows = power_study(
        model,
        theta0,
        anomalies,
        system,
        tables,
        _parse_float_list(args.alpha),
        args.reps,
        args.seed,
    )
    lines = [",".join(_POWER_COLUMNS)]
    for r in rows:
        block = "x".join(str(x) for x in r["block_extent"])
        lines.append(
            ",".join(
                [
                    r["family"],
                    str(r["n"]),
                    str(r["d"]),
                    r["kind"],
                    block,
                    repr(r["mean1"]),
                    repr(r["v"]),
                    repr(r["alpha"]),
                    repr(r["power"]),
                    repr(r["std_err"]),
                    str(r["replicates"]),
                    repr(r["boundary_gap"]),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    with open(args.out, "w", newline="\n") as fh:
        fh.write(text)
    print(text, end="")
    print(f"power table written to {args.out}")
    return EXIT_OK


def _ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov sup distance."""
    both = np.concatenate([a, b])
    both.sort(kind="mergesort")
    fa = np.searchsorted(np.sort(a), both, side="right") / a.size
    fb = np.searchsorted(np.sort(b), both, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def cmd_simulate_null(args):
    _kernels.set_threads(args.threads)
    if args.statistic == "family":
        model, theta0 = _build_model(args)
    else:
        model, theta0 = None, None
    samples = {}
    rn_values = _parse_int_list(args.rn) if args.rn else [None]
    for n in _parse_int_list(args.n):
        for rn in rn_values:
            system = RegionSystem(
                kind=args.system,
                d=args.d,
                n=n,
                min_size=rn,
                v=None if args.v == "auto" else float(args.v),
                scale_policy=_parse_scales(args.scales),
            )
            label = f"n{n}_rn{system.min_size}"
            stats = sample_null_statistics(
                system, args.reps, args.seed, model=model, theta0=theta0
            )
            samples[label] = stats
            path = f"{args.out_prefix}_{label}.txt"
            export_text_sample(
                np.sort(stats),
                path,
                header=[
                    f"statistic={args.statistic}",
                    f"model={args.model if args.statistic == 'family' else 'gaussian-surrogate'}",
                ]
                + [f"{k}={v}" for k, v in sorted(system_meta(system, args.reps, args.seed).items())],
            )
            print(f"{label}: N={args.reps} median={np.median(stats):.6f} -> {path}")
    labels = sorted(samples)
    ks = {}
    for i, la in enumerate(labels):
        for lb in labels[i + 1 :]:
            ks[f"{la}|{lb}"] = _ks_distance(samples[la], samples[lb])
            print(f"KS({la}, {lb}) = {ks[f'{la}|{lb}']:.6f}")
    summary = {
        "statistic": args.statistic,
        "replicates": args.reps,
        "seed": args.seed,
        "ks": ks,
        "version": __version__,
    }
    with open(f"{args.out_prefix}_summary.json", "w", newline="\n") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="mscan", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="simulate and store a null quantile table")
    _add_system_flags(p)
    _add_common_flags(p)
    p.add_argument("--reps", type=int, default=10000, help="Monte-Carlo replicates")
    p.add_argument("--out", required=True, help="output table path")
    p.add_argument("--text-out", default=None, help="optional plain-text sample dump")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("scan", help="scan a grid file and write a detection report")
    _add_system_flags(p)
    _add_model_flags(p)
    _add_common_flags(p)
    p.add_argument("--grid", required=True, help="input grid file")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    p.add_argument("--table", default=None, help="calibration table path")
    p.add_argument("--reps", type=int, default=None, help="inline calibration replicates (no table)")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--mode", choices=("all", "local-maxima"), default="all")
    p.add_argument("--out", required=True, help="output report path (JSON)")
    p.add_argument("--exit-status", action="store_true", help="exit 2 when a detection is made")
    p.add_argument("--allow-table-mismatch", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("power", help="empirical power study over a (block, signal, v) grid")
    _add_system_flags(p)
    _add_model_flags(p)
    _add_common_flags(p)
    p.add_argument("--blocks", required=True, help="comma list of anomaly side lengths")
    p.add_argument("--signals", required=True, help="comma list of anomaly means (mean scale)")
    p.add_argument("--alpha", default="0.1", help="comma list of levels")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--calib-reps", type=int, default=10000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("simulate-null", help="null samples of the scan statistic, with KS summary")
    p.add_argument("--n", required=True, help="comma list of grid side lengths")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--system", choices=("cubes", "rects"), default="cubes")
    p.add_argument("--rn", default=None, help="comma list of minimum region sizes")
    p.add_argument("--v", default="auto")
    p.add_argument("--scales", default="all")
    _add_model_flags(p)
    _add_common_flags(p)
    p.add_argument("--statistic", choices=("gaussian", "family"), default="gaussian")
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_simulate_null)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # known errors exit cleanly with a message
        if type(exc).__name__ in _KNOWN_ERRORS or isinstance(exc, OSError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        raise


if __name__ == "__main__":
    sys.exit(main())
