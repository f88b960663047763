"""Coding gain of the four-state trellis code over the four-antenna block code."""

from dataclasses import dataclass
from pathlib import Path

from _common import CurveSpec, gap, parse_overrides, run_curves, save_plot, slope


@dataclass(frozen=True)
class Config:
    out_dir: str = "results/trellis_gain"
    seed: int = 7
    stop_errors: int = 100
    max_frames: int = 200_000
    Mr: int = 1
    snr_start: float = 8.0
    snr_stop: float = 18.0
    target_fer: float = 1e-2


def main():
    cfg, quick = parse_overrides(Config(), __doc__)
    snr = tuple(float(s) for s in range(int(cfg.snr_start), int(cfg.snr_stop) + 1))
    stop, cap = (20, 2000) if quick else (cfg.stop_errors, cfg.max_frames)
    specs = [
        CurveSpec("block", "qostfbc-4tx", cfg.Mr, snr),
        CurveSpec("trellis", "qostftc-4state", cfg.Mr, snr),
    ]
    c = run_curves(specs, Path(cfg.out_dir), cfg.seed, stop, cap)
    print(f"trellis over block at FER {cfg.target_fer:g}: {gap(c['trellis'], c['block'], cfg.target_fer)}")
    print(f"diversity slope block {slope(c['block'])}, trellis {slope(c['trellis'])}")
    save_plot(c.values(), Path(cfg.out_dir) / "fer.png", f"block vs trellis, Mr = {cfg.Mr}")


if __name__ == "__main__":
    main()
