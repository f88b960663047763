"""Monte-Carlo frame error rate experiments, curve analysis and CSV/plot output."""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from .channel import PowerDelayProfile, frame_rng, frequency_response, noiseless_output, sample_taps
from .partition import Trellis
from .transceiver import SCHEMES, FrameConfig, Scheme, make_scheme

CSV_VERSION = 1
CSV_COLUMNS = ("snr_db", "frames", "errors", "fer", "ci_low", "ci_high")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "qostfbc-4tx"
    Mr: int = 1
    snr_db: tuple[float, ...] = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0)
    taps: tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    N: int = 64
    T: int = 4
    min_frames: int = 1
    stop_errors: int = 100
    max_frames: int = 200_000
    seed: int = 1
    batch: int = 400

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "taps", tuple(float(t) for t in self.taps))

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.Mr not in (1, 2):
            raise ConfigError(f"Mr must be 1 or 2, got {self.Mr}")
        if not self.snr_db:
            raise ConfigError("SNR list is empty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("SNR list must be strictly ascending")
        if self.min_frames < 1 or self.max_frames < self.min_frames:
            raise ConfigError("need 1 <= min_frames <= max_frames")
        if self.stop_errors < 1 or self.batch < 1:
            raise ConfigError("stop_errors and batch must be positive")
        try:
            self.pdp
            self.frame_config
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def pdp(self) -> PowerDelayProfile:
        return PowerDelayProfile(self.taps)

    @property
    def frame_config(self) -> FrameConfig:
        return FrameConfig(N=self.N, T=self.T, Mr=self.Mr, scheme=self.scheme)

    def digest(self) -> str:
        """Hash of everything that influences the results (batch size excluded)."""
        d = asdict(self)
        d.pop("batch")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class FerPoint:
    snr_db: float
    frames: int
    errors: int

    @property
    def fer(self) -> float:
        return self.errors / self.frames if self.frames else math.nan

    def wilson(self, confidence: float = 0.95) -> tuple[float, float]:
        if self.frames == 0:
            return math.nan, math.nan
        ci = binomtest(self.errors, self.frames).proportion_ci(confidence_level=confidence, method="wilson")
        return float(ci.low), float(ci.high)


@dataclass
class FerCurve:
    points: list[FerPoint] = field(default_factory=list)
    label: str = ""
    config_hash: str = ""
    seed: int = 0

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def fer(self) -> np.ndarray:
        return np.array([p.fer for p in self.points])

    def numeric(self) -> list[tuple]:
        return [(p.snr_db, p.frames, p.errors) for p in self.points]


# ---------------------------------------------------------------------------
# simulation


@dataclass
class FrameDraws:
    bits: np.ndarray  # (F, bits_per_frame)
    taps: np.ndarray  # (F, Mt, Mr, span)
    noise: np.ndarray  # (F, N, Mr, T), unit variance


def draw_frames(cfg: ExperimentConfig, scheme: Scheme, frame_ids: Sequence[int]) -> FrameDraws:
    """Per-frame random inputs from independent substreams.

    The draws do not depend on SNR, and the channel is drawn for four antennas
    and truncated, so schemes with the same Mr share channels and noise.
    """
    pdp = cfg.pdp
    nb, Mt = scheme.bits_per_frame, cfg.frame_config.Mt
    bits, taps, noise = [], [], []
    for fid in frame_ids:
        rng = frame_rng(cfg.seed, fid)
        taps.append(sample_taps(pdp, 4, cfg.Mr, rng)[:Mt])
        w = rng.standard_normal((2, cfg.N, cfg.Mr, cfg.T))
        noise.append((w[0] + 1j * w[1]) / math.sqrt(2))
        bits.append(rng.integers(0, 2, nb, dtype=np.int8))
    return FrameDraws(np.array(bits), np.array(taps), np.array(noise))


def frame_errors(scheme: Scheme, draws: FrameDraws, N0: float) -> np.ndarray:
    """Boolean frame error indicator for every frame of a batch."""
    grid, _ = scheme.encode(draws.bits)
    cfr = frequency_response(draws.taps, scheme.cfg.N)
    received = noiseless_output(grid, cfr) + math.sqrt(N0) * draws.noise
    decoded = scheme.decode_bits(received, cfr)
    return np.any(decoded != draws.bits, axis=-1)


def simulate_point(
    cfg: ExperimentConfig, scheme: Scheme, snr_db: float | None, progress: Callable | None = None
) -> FerPoint:
    """Frames until the stop rule fires; ``snr_db=None`` means a noiseless channel.

    Frames are processed in batches, but the count is truncated at the exact
    frame where the rule fires, so results do not depend on the batch size.
    """
    N0 = 0.0 if snr_db is None else 10 ** (-snr_db / 10)
    frames = errors = 0
    while frames < cfg.max_frames:
        ids = range(frames, min(frames + cfg.batch, cfg.max_frames))
        err = frame_errors(scheme, draw_frames(cfg, scheme, ids), N0)
        cum = errors + np.cumsum(err)
        n = frames + np.arange(1, len(err) + 1)
        done = np.flatnonzero((cum >= cfg.stop_errors) & (n >= cfg.min_frames))
        if done.size:
            frames, errors = int(n[done[0]]), int(cum[done[0]])
            break
        frames, errors = int(n[-1]), int(cum[-1])
        if progress:
            progress(snr_db, frames, errors)
    return FerPoint(math.inf if snr_db is None else float(snr_db), frames, errors)


def run_sweep(
    cfg: ExperimentConfig, trellis: Trellis | None = None, progress: Callable | None = None
) -> FerCurve:
    cfg.validate()
    scheme = make_scheme(cfg.frame_config, trellis)
    curve = FerCurve(label=f"{cfg.scheme} Mr={cfg.Mr}", config_hash=cfg.digest(), seed=cfg.seed)
    for snr in cfg.snr_db:
        curve.points.append(simulate_point(cfg, scheme, snr, progress))
    return curve


# ---------------------------------------------------------------------------
# curve analysis


def snr_at_fer(curve: FerCurve, target: float) -> float:
    """SNR where the curve first falls through ``target``, interpolating log10(FER) linearly."""
    snr, fer = curve.snr_db, curve.fer
    for i in range(len(snr) - 1):
        f0, f1 = fer[i], fer[i + 1]
        if f0 >= target > f1 or (f0 > target >= f1):
            if f1 <= 0:
                raise ValueError(f"zero FER at {snr[i + 1]} dB; cannot interpolate to {target:g}")
            l0, l1, lt = np.log10(f0), np.log10(f1), np.log10(target)
            return float(snr[i] + (lt - l0) / (l1 - l0) * (snr[i + 1] - snr[i]))
    raise ValueError(f"curve {curve.label!r} does not bracket FER {target:g}")


def compare_curves(a: FerCurve, b: FerCurve, target_fer: float) -> float:
    """SNR gap (dB) at ``target_fer``: positive when ``a`` needs less SNR than ``b``."""
    return snr_at_fer(b, target_fer) - snr_at_fer(a, target_fer)


def diversity_slope(curve: FerCurve, fer_range: tuple[float, float] = (1e-3, 1e-1)) -> float:
    """Least-squares decades of FER per 10 dB over points inside ``fer_range``.

    For FER ~ SNR^-d this equals the diversity order d.
    """
    lo, hi = sorted(fer_range)
    snr, fer = curve.snr_db, curve.fer
    sel = (fer >= lo) & (fer <= hi) & (fer > 0)
    if sel.sum() < 2:
        raise ValueError(f"need at least two points with FER in [{lo:g}, {hi:g}], got {int(sel.sum())}")
    slope = np.polyfit(snr[sel], np.log10(fer[sel]), 1)[0]
    return float(-10 * slope)


# ---------------------------------------------------------------------------
# files


def write_csv(curve: FerCurve, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            fh.write(
                f"# qostf-fer v{CSV_VERSION} label={curve.label.replace(' ', '_')} "
                f"seed={curve.seed} config={curve.config_hash}\n"
            )
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for p in curve.points:
                lo, hi = p.wilson()
                w.writerow([repr(float(p.snr_db)), int(p.frames), int(p.errors), repr(float(p.fer)), repr(lo), repr(hi)])
    except OSError as exc:
        raise OSError(f"cannot write FER curve to {path}: {exc}") from exc
    return path


def read_csv(path) -> FerCurve:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read FER curve {path}: {exc}") from exc
    if not lines or not lines[0].startswith("# qostf-fer v"):
        raise ValueError(f"{path} is not a qostf FER CSV")
    meta = dict(item.split("=", 1) for item in lines[0].split()[3:] if "=" in item)
    version = int(lines[0].split()[2][1:])
    if version != CSV_VERSION:
        raise ValueError(f"{path}: unsupported CSV version {version}")
    rows = list(csv.DictReader(lines[1:]))
    curve = FerCurve(
        label=meta.get("label", "").replace("_", " "),
        config_hash=meta.get("config", ""),
        seed=int(meta.get("seed", 0)),
    )
    for r in rows:
        curve.points.append(FerPoint(float(r["snr_db"]), int(r["frames"]), int(r["errors"])))
    return curve


def emit(curve: FerCurve, path, fmt: str = "csv") -> Path:
    if fmt == "csv":
        return write_csv(curve, path)
    if fmt == "plot":
        return plot_curves([curve], path)
    raise ValueError(f"unknown output format {fmt!r}")


def plot_curves(curves: Sequence[FerCurve], path, title: str = "") -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for c in curves:
        ok = c.fer > 0
        ax.semilogy(c.snr_db[ok], c.fer[ok], marker="o", label=c.label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("FER")
    ax.grid(True, which="both", alpha=0.3)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    try:
        fig.savefig(path)
    except OSError as exc:
        raise OSError(f"cannot write plot {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def _frange(start: float, stop: float, step: float) -> tuple[float, ...]:
    if step <= 0:
        raise ConfigError("snr_step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


CONFIG_KEYS = {
    "scheme", "mr", "snr_start", "snr_stop", "snr_step", "snr",
    "taps", "seed", "stop_errors", "max_frames", "min_frames", "n", "batch",
}


def parse_config(text: str) -> ExperimentConfig:
    """Flat ``key = value`` text; unknown keys are rejected."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sec = parser["experiment"]
    unknown = set(sec) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    try:
        if "scheme" in sec:
            kw["scheme"] = sec["scheme"].strip()
        if "mr" in sec:
            kw["Mr"] = sec.getint("mr")
        if "snr" in sec:
            kw["snr_db"] = tuple(float(v) for v in sec["snr"].split(","))
        elif "snr_start" in sec:
            kw["snr_db"] = _frange(
                sec.getfloat("snr_start"), sec.getfloat("snr_stop"), sec.getfloat("snr_step", 2.0)
            )
        if "taps" in sec:
            kw["taps"] = tuple(float(v) for v in sec["taps"].split(","))
        for key, name in (("seed", "seed"), ("stop_errors", "stop_errors"), ("max_frames", "max_frames"),
                          ("min_frames", "min_frames"), ("n", "N"), ("batch", "batch")):
            if key in sec:
                kw[name] = sec.getint(key)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    cfg = ExperimentConfig(**kw)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
