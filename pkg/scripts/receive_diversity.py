"""One against two receive antennas, for both the block and the trellis code."""

from dataclasses import dataclass
from pathlib import Path

from _common import CurveSpec, gap, parse_overrides, run_curves, save_plot, slope


@dataclass(frozen=True)
class Config:
    out_dir: str = "results/receive_diversity"
    seed: int = 7
    stop_errors: int = 100
    max_frames: int = 200_000
    snr_start: float = 4.0
    snr_stop: float = 18.0


def main():
    cfg, quick = parse_overrides(Config(), __doc__)
    snr = tuple(float(s) for s in range(int(cfg.snr_start), int(cfg.snr_stop) + 1))
    stop, cap = (20, 2000) if quick else (cfg.stop_errors, cfg.max_frames)
    specs = [
        CurveSpec(f"{kind}-mr{mr}", scheme, mr, snr)
        for kind, scheme in (("block", "qostfbc-4tx"), ("trellis", "qostftc-4state"))
        for mr in (1, 2)
    ]
    c = run_curves(specs, Path(cfg.out_dir), cfg.seed, stop, cap)
    print(f"block: Mr=2 over Mr=1 at FER 1e-2: {gap(c['block-mr2'], c['block-mr1'], 1e-2)}")
    print(f"trellis: Mr=2 over Mr=1 at FER 1e-3: {gap(c['trellis-mr2'], c['trellis-mr1'], 1e-3)}")
    for name, curve in c.items():
        print(f"diversity slope {name}: {slope(curve)}")
    save_plot(c.values(), Path(cfg.out_dir) / "fer.png", "receive diversity")


if __name__ == "__main__":
    main()
