"""Command line entry point: ``qostf {sweep,compare,slope,design,plot}``."""

from __future__ import annotations

import argparse
import sys
import time

from . import harness
from .partition import (
    DistanceSets,
    Trellis,
    build_trellis,
    design_lifts,
    min_path_metrics,
    separation_violations,
)


def _snr_list(text: str) -> tuple[float, ...]:
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        return harness._frange(start, stop, step)
    return tuple(float(v) for v in text.split(","))


def cmd_sweep(args) -> int:
    if args.config:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.ExperimentConfig()
    overrides = {
        "scheme": args.scheme,
        "Mr": args.mr,
        "snr_db": _snr_list(args.snr) if args.snr else None,
        "seed": args.seed,
        "stop_errors": args.stop_errors,
        "max_frames": args.max_frames,
        "taps": tuple(float(t) for t in args.taps.split(",")) if args.taps else None,
    }
    kw = {**cfg.__dict__, **{k: v for k, v in overrides.items() if v is not None}}
    cfg = harness.ExperimentConfig(**kw)
    trellis = Trellis.load(args.trellis) if args.trellis else None

    def progress(snr, frames, errors):
        if args.verbose:
            print(f"  {snr} dB: {errors} errors / {frames} frames", file=sys.stderr)

    t0 = time.time()
    curve = harness.run_sweep(cfg, trellis, progress)
    harness.write_csv(curve, args.out)
    for p in curve.points:
        print(f"{p.snr_db:6.2f} dB  frames={p.frames:7d}  errors={p.errors:4d}  fer={p.fer:.3e}")
    print(f"wrote {args.out} ({time.time() - t0:.1f} s)")
    if args.plot:
        harness.plot_curves([curve], args.plot)
    return 0


def cmd_compare(args) -> int:
    a, b = harness.read_csv(args.a), harness.read_csv(args.b)
    gap = harness.compare_curves(a, b, args.target)
    print(f"{gap:.3f} dB gap at FER {args.target:g} ({a.label} better than {b.label} when positive)")
    return 0


def cmd_slope(args) -> int:
    curve = harness.read_csv(args.csv)
    d = harness.diversity_slope(curve, (args.low, args.high))
    print(f"{d:.3f} decades per 10 dB (implied diversity order {d:.2f})")
    return 0


def cmd_design(args) -> int:
    lift_a, lift_b = design_lifts(2, full_rank=args.full_rank)
    dist = DistanceSets((lift_a, lift_b))
    kw = {}
    if args.offsets:
        kw["offsets"] = tuple(int(v) for v in args.offsets.split(","))
    trellis = build_trellis(lift_a, lift_b, strict=False, distances=dist, **kw)
    bad = separation_violations(trellis, dist)
    pm = min_path_metrics(trellis, args.max_len, dist)
    print(f"states={trellis.num_states} inputs={trellis.num_inputs} bits/step={trellis.bits_per_step}")
    print(f"next_state={trellis.next_state.tolist()}")
    print(f"subset={trellis.subset.tolist()}")
    print(f"branch pairs with a zero-CGD codeword pair: {len(bad)}")
    print(f"min delta_H (different branches, len <= {args.max_len}): {pm.min_delta_h}")
    print(f"min CGD*MPD over those events: {pm.min_product:.6g}")
    print(f"min CGD*MPD of parallel transitions: {pm.parallel_product:.6g}")
    if args.out:
        trellis.save(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_plot(args) -> int:
    curves = [harness.read_csv(p) for p in args.csv]
    harness.plot_curves(curves, args.out, args.title or "")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qostf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a FER sweep")
    s.add_argument("--config", help="flat key = value config file")
    s.add_argument("--scheme", choices=harness.SCHEMES)
    s.add_argument("--mr", type=int)
    s.add_argument("--snr", help="start:stop:step or comma list (dB)")
    s.add_argument("--seed", type=int)
    s.add_argument("--stop-errors", type=int)
    s.add_argument("--max-frames", type=int)
    s.add_argument("--taps", help="comma separated tap powers")
    s.add_argument("--trellis", help="trellis JSON (default: packaged design)")
    s.add_argument("--out", required=True)
    s.add_argument("--plot")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="SNR gap between two curves")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--target", type=float, default=1e-2)
    c.set_defaults(func=cmd_compare)

    sl = sub.add_parser("slope", help="diversity slope of a curve")
    sl.add_argument("csv")
    sl.add_argument("--low", type=float, default=1e-3)
    sl.add_argument("--high", type=float, default=1e-1)
    sl.set_defaults(func=cmd_slope)

    d = sub.add_parser("design", help="build the four-state trellis and report its metrics")
    d.add_argument("--full-rank", action="store_true", help="restrict splits to full-rank masks")
    d.add_argument("--offsets", help="per-state subset offsets, e.g. 0,1,0,3")
    d.add_argument("--max-len", type=int, default=8)
    d.add_argument("--out")
    d.set_defaults(func=cmd_design)

    pl = sub.add_parser("plot", help="plot FER curves from CSV files")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
