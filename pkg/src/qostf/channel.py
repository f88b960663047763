"""Quasi-static frequency-selective Rayleigh MIMO channel in the frequency domain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codebook import StfGrid


class ChannelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PowerDelayProfile:
    """Tap powers at integer sample delays; powers must sum to one."""

    powers: tuple[float, ...]
    delays: tuple[int, ...] | None = None

    def __post_init__(self):
        powers = tuple(float(p) for p in self.powers)
        delays = tuple(range(len(powers))) if self.delays is None else tuple(int(d) for d in self.delays)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "delays", delays)
        if not powers:
            raise ChannelConfigError("power delay profile needs at least one tap")
        if len(delays) != len(powers):
            raise ChannelConfigError("delays and powers differ in length")
        if any(p < 0 for p in powers):
            raise ChannelConfigError(f"tap powers must be nonnegative: {powers}")
        if any(d < 0 for d in delays) or len(set(delays)) != len(delays):
            raise ChannelConfigError(f"delays must be distinct nonnegative integers: {delays}")
        if abs(sum(powers) - 1.0) > 1e-9:
            raise ChannelConfigError(f"tap powers sum to {sum(powers):.6g}, expected 1")

    @classmethod
    def uniform(cls, num_taps: int = 4) -> "PowerDelayProfile":
        return cls((1.0 / num_taps,) * num_taps)

    @property
    def taps(self) -> list[tuple[int, float]]:
        return list(zip(self.delays, self.powers))

    @property
    def span(self) -> int:
        """Length of the zero-padded impulse response."""
        return max(self.delays) + 1


def sample_taps(pdp: PowerDelayProfile, Mt: int, Mr: int, rng: np.random.Generator, size=()) -> np.ndarray:
    """Independent CN(0, sigma_l^2) gains, shape (*size, Mt, Mr, span).

    Delays absent from the profile hold zero taps.
    """
    if not isinstance(pdp, PowerDelayProfile):
        raise ChannelConfigError("pdp must be a PowerDelayProfile")
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    shape = (*size, Mt, Mr, len(pdp.powers))
    gains = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    gains *= np.sqrt(np.asarray(pdp.powers) / 2)
    taps = np.zeros((*size, Mt, Mr, pdp.span), dtype=complex)
    taps[..., list(pdp.delays)] = gains
    return taps


def frequency_response(taps, N: int) -> np.ndarray:
    """H(n) = sum_l taps[l] exp(-2j pi n l / N) along the last axis."""
    taps = np.asarray(taps)
    if taps.shape[-1] > N:
        raise ValueError(f"impulse response of length {taps.shape[-1]} exceeds N={N}")
    return np.fft.fft(taps, n=N, axis=-1)


@dataclass
class ChannelRealization:
    taps: np.ndarray  # (Mt, Mr, L)
    num_subcarriers: int
    frame_id: int = 0
    cfr: np.ndarray = field(init=False, repr=False)  # (Mt, Mr, N)

    def __post_init__(self):
        self.cfr = frequency_response(self.taps, self.num_subcarriers)

    @classmethod
    def draw(cls, pdp, Mt, Mr, N, rng, frame_id=0) -> "ChannelRealization":
        return cls(sample_taps(pdp, Mt, Mr, rng), N, frame_id)

    @property
    def num_tx(self) -> int:
        return self.taps.shape[-3]

    @property
    def num_rx(self) -> int:
        return self.taps.shape[-2]


def frame_rng(seed: int, frame_id: int) -> np.random.Generator:
    """Independent generator per (master seed, frame) pair."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(frame_id)]))


def complex_noise(rng: np.random.Generator, shape, N0: float) -> np.ndarray:
    """Circularly symmetric Gaussian noise with variance N0 per complex sample."""
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return noise * np.sqrt(N0 / 2)


def noiseless_output(data, cfr) -> np.ndarray:
    """Y[..., n, q, t] = sum_p data[..., n, p, t] H[..., p, q, n]."""
    return np.einsum("...npt,...pqn->...nqt", data, cfr)


def apply_channel(grid, ch: ChannelRealization, N0: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Received frequency-domain samples, shape (N, Mr, T)."""
    data = grid.data if isinstance(grid, StfGrid) else np.asarray(grid)
    if data.shape[0] != ch.num_subcarriers or data.shape[1] != ch.num_tx:
        raise ValueError(
            f"grid shape {data.shape} does not match channel (N={ch.num_subcarriers}, Mt={ch.num_tx})"
        )
    y = noiseless_output(data, ch.cfr)
    if N0 > 0:
        if rng is None:
            raise ValueError("a generator is required when N0 > 0")
        y = y + complex_noise(rng, y.shape, N0)
    return y
