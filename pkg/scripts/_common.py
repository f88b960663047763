"""Shared helpers for the experiment scripts: run sweeps, save CSV/PNG, report gaps."""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

from qostf.harness import ExperimentConfig, FerCurve, compare_curves, diversity_slope, plot_curves, run_sweep, write_csv


@dataclass(frozen=True)
class CurveSpec:
    name: str
    scheme: str
    Mr: int
    snr_db: tuple[float, ...]


def parse_overrides(cfg, description: str):
    """Expose every scalar field of a dataclass config as a ``--field`` option."""
    p = argparse.ArgumentParser(description=description)
    for f in fields(cfg):
        if f.type in ("int", "float", "str", int, float, str):
            kind = {"int": int, "float": float, "str": str}.get(f.type, f.type)
            p.add_argument(f"--{f.name.replace('_', '-')}", type=kind, default=getattr(cfg, f.name))
    p.add_argument("--quick", action="store_true", help="few frames per point, for a smoke run")
    args = vars(p.parse_args())
    quick = args.pop("quick")
    return replace(cfg, **{k: v for k, v in args.items()}), quick


def run_curves(specs, out_dir: Path, seed: int, stop_errors: int, max_frames: int) -> dict[str, FerCurve]:
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = {}
    for spec in specs:
        t0 = time.time()
        cfg = ExperimentConfig(
            scheme=spec.scheme, Mr=spec.Mr, snr_db=spec.snr_db, seed=seed,
            stop_errors=stop_errors, max_frames=max_frames,
        )
        curve = run_sweep(cfg)
        curve.label = spec.name
        write_csv(curve, out_dir / f"{spec.name}.csv")
        curves[spec.name] = curve
        pts = ", ".join(f"{p.snr_db:g} dB {p.fer:.2e}" for p in curve.points)
        print(f"{spec.name}: {pts}  ({time.time() - t0:.0f} s)")
    return curves


def gap(better: FerCurve, worse: FerCurve, target: float) -> str:
    try:
        return f"{compare_curves(better, worse, target):.2f} dB"
    except ValueError as exc:
        return f"n/a ({exc})"


def slope(curve: FerCurve) -> str:
    try:
        return f"{diversity_slope(curve):.2f}"
    except ValueError as exc:
        return f"n/a ({exc})"


def save_plot(curves, path: Path, title: str) -> None:
    plot_curves(list(curves), path, title)
    print(f"wrote {path}")
