"""M-PSK constellations, rotations and Gray bit mapping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class InvalidOrderError(ValueError):
    pass


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class Constellation:
    """Unit-modulus M-PSK points ``exp(i(2*pi*k/M + rotation))``, ordered by k."""

    order: int
    rotation: float = 0.0
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise InvalidOrderError(f"constellation order must be an integer >= 2, got {self.order!r}")
        k = np.arange(self.order)
        pts = np.exp(1j * (2 * np.pi * k / self.order + self.rotation))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def bits_per_symbol(self) -> int:
        m = int(np.log2(self.order))
        if 2**m != self.order:
            raise MappingError(f"order {self.order} is not a power of two")
        return m

    def rotated(self, angle: float) -> "Constellation":
        return Constellation(self.order, self.rotation + angle)

    def nearest(self, values) -> np.ndarray:
        """Index of the nearest point for every entry of ``values``."""
        values = np.asarray(values)
        return np.abs(values[..., None] - self.points).argmin(axis=-1)

    def __len__(self):
        return self.order


def mpsk(order: int, rotation: float = 0.0) -> Constellation:
    return Constellation(order, rotation)


def optimal_rotation(order: int) -> float:
    """Rotation that maximizes coding gain: pi/M for even M, pi/2 for odd M."""
    if int(order) != order or order < 2:
        raise InvalidOrderError(f"constellation order must be an integer >= 2, got {order!r}")
    return np.pi / order if order % 2 == 0 else np.pi / 2


def gray_encode(k):
    k = np.asarray(k)
    return k ^ (k >> 1)


def gray_decode(g):
    g = np.array(g, copy=True)
    shift = g >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


def bits_to_indices(bits, bits_per_symbol: int) -> np.ndarray:
    """Gray-decode groups of bits (MSB first) along the last axis into point indices.

    ``bits`` has shape (..., n * bits_per_symbol); the result has shape (..., n).
    """
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % bits_per_symbol:
        raise MappingError(
            f"bit sequence of length {bits.shape[-1]} is not a multiple of {bits_per_symbol}"
        )
    groups = bits.reshape(*bits.shape[:-1], -1, bits_per_symbol)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return gray_decode(groups @ weights)


def indices_to_bits(indices, bits_per_symbol: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    labels = gray_encode(indices)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    bits = (labels[..., None] >> shifts) & 1
    return bits.reshape(*indices.shape[:-1], -1) if indices.ndim else bits


def map_bits(bits: Sequence[int], constellation: Constellation) -> complex:
    """Map one group of log2(M) bits to its Gray-labelled constellation point."""
    m = constellation.bits_per_symbol
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size != m:
        raise MappingError(f"expected {m} bits for {constellation.order}-PSK, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise MappingError("bits must be 0 or 1")
    return complex(constellation.points[int(bits_to_indices(bits, m)[0])])


def demap(symbol: complex, constellation: Constellation) -> np.ndarray:
    """Inverse of :func:`map_bits` (hard decision to the nearest point)."""
    m = constellation.bits_per_symbol
    idx = int(constellation.nearest(symbol))
    return indices_to_bits(np.array([idx]), m)
