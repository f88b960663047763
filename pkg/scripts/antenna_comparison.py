"""Four-antenna block code against the two-antenna block code, one receive antenna."""

from dataclasses import dataclass
from pathlib import Path

from _common import CurveSpec, gap, parse_overrides, run_curves, save_plot, slope


@dataclass(frozen=True)
class Config:
    out_dir: str = "results/antenna_comparison"
    seed: int = 7
    stop_errors: int = 100
    max_frames: int = 200_000
    snr_start: float = 8.0
    snr_stop: float = 24.0
    target_fer: float = 1e-2


def main():
    cfg, quick = parse_overrides(Config(), __doc__)
    snr = tuple(float(s) for s in range(int(cfg.snr_start), int(cfg.snr_stop) + 1, 2))
    stop, cap = (20, 2000) if quick else (cfg.stop_errors, cfg.max_frames)
    specs = [CurveSpec("4tx", "qostfbc-4tx", 1, snr), CurveSpec("2tx", "qostfbc-2tx", 1, snr)]
    c = run_curves(specs, Path(cfg.out_dir), cfg.seed, stop, cap)
    print(f"4tx over 2tx at FER {cfg.target_fer:g}: {gap(c['4tx'], c['2tx'], cfg.target_fer)}")
    print(f"diversity slope 4tx {slope(c['4tx'])}, 2tx {slope(c['2tx'])}")
    save_plot(c.values(), Path(cfg.out_dir) / "fer.png", "block codes, Mr = 1")


if __name__ == "__main__":
    main()
