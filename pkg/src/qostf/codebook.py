"""Block codeword templates, linear code families and time/frequency placement.

Every codeword here is real-linear in its generating symbols (entries are
signed symbols or conjugates), so a code is fully described by the matrices it
produces for the real and imaginary unit directions of each symbol.  The
decoder and the partitioner both work from that basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .constellation import Constellation, mpsk, optimal_rotation


class CapacityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# templates (vectorized over leading axes)


def qostbc4_matrix(c) -> np.ndarray:
    """4x4 quasi-orthogonal block for symbols ``c[..., 0:4]``; rows are slots."""
    c = np.asarray(c, dtype=complex)
    c1, c2, c3, c4 = np.moveaxis(c, -1, 0)
    k = np.conj
    rows = [
        [c1, c2, c3, c4],
        [-k(c2), k(c1), -k(c4), k(c3)],
        [-k(c3), -k(c4), k(c1), k(c2)],
        [c4, -c3, -c2, c1],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def alamouti_matrix(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    c1, c2 = np.moveaxis(c, -1, 0)
    rows = [[c1, c2], [-np.conj(c2), np.conj(c1)]]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _sum_difference(inner, s, n):
    s = np.asarray(s, dtype=complex)
    x, xt = s[..., :n], s[..., n:]
    return np.concatenate([inner(x + xt), inner(x - xt)], axis=-2)


def qostftc8_matrix(s) -> np.ndarray:
    """8x4 codeword: qostbc4 of (x_p + x~_{p+4}) over qostbc4 of (x_p - x~_{p+4}), times 1/sqrt(4)."""
    return _sum_difference(qostbc4_matrix, s, 4) / np.sqrt(4)


def qostfbc2_matrix(s) -> np.ndarray:
    """4x2 two-antenna baseline: the same sum/difference recipe over Alamouti blocks."""
    return _sum_difference(alamouti_matrix, s, 2) / np.sqrt(2)


# ---------------------------------------------------------------------------
# codeword objects


@dataclass(frozen=True)
class StfCodeword:
    matrix: np.ndarray
    symbols: np.ndarray
    scale: float = 1.0

    @property
    def shape(self):
        return self.matrix.shape

    def gram(self) -> np.ndarray:
        return self.matrix.conj().T @ self.matrix


def qostbc4(c1, c2, c3, c4) -> StfCodeword:
    sym = np.array([c1, c2, c3, c4], dtype=complex)
    return StfCodeword(qostbc4_matrix(sym), sym, 1.0)


def qostftc8(x1, x2, x3, x4, x5, x6, x7, x8) -> StfCodeword:
    """8x4 codeword; x1..x4 come from A and x5..x8 from the rotated copy of A (not enforced)."""
    sym = np.array([x1, x2, x3, x4, x5, x6, x7, x8], dtype=complex)
    return StfCodeword(qostftc8_matrix(sym), sym, 1 / np.sqrt(4))


def qostfbc2(x1, x2, x3, x4) -> StfCodeword:
    sym = np.array([x1, x2, x3, x4], dtype=complex)
    return StfCodeword(qostfbc2_matrix(sym), sym, 1 / np.sqrt(2))


# ---------------------------------------------------------------------------
# linear code families


@dataclass(frozen=True)
class LinearCode:
    """A codeword template together with one PSK alphabet per generating symbol.

    ``template`` maps complex symbols of shape (..., K) to matrices of shape
    (..., rows, num_tx).  ``basis[2k]`` / ``basis[2k+1]`` are the matrices for a
    unit real / imaginary part of symbol k, so that
    ``template(s) == einsum('k,krp->rp', real_view(s), basis)``.
    """

    name: str
    template: Callable[[np.ndarray], np.ndarray]
    alphabets: tuple[Constellation, ...]
    symbol_names: tuple[str, ...] = ()
    basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        K = len(self.alphabets)
        eye = np.eye(K, dtype=complex)
        units = np.empty((2 * K, K), dtype=complex)
        units[0::2] = eye
        units[1::2] = 1j * eye
        basis = self.template(units)
        # real-linearity check: the template must be reproduced by the basis
        probe = np.random.default_rng(0).standard_normal((3, 2 * K))
        direct = self.template(probe[:, 0::2] + 1j * probe[:, 1::2])
        if not np.allclose(direct, np.einsum("bk,krp->brp", probe, basis), atol=1e-12):
            raise ValueError(f"template of {self.name!r} is not real-linear in its symbols")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def num_symbols(self) -> int:
        return len(self.alphabets)

    @property
    def rows(self) -> int:
        return self.basis.shape[1]

    @property
    def num_tx(self) -> int:
        return self.basis.shape[2]

    @property
    def bits_per_codeword(self) -> int:
        return sum(a.bits_per_symbol for a in self.alphabets)

    def symbols(self, indices) -> np.ndarray:
        """Complex symbols for per-symbol point indices of shape (..., K)."""
        indices = np.asarray(indices)
        return np.stack([a.points[indices[..., k]] for k, a in enumerate(self.alphabets)], axis=-1)

    def matrices(self, indices) -> np.ndarray:
        return self.template(self.symbols(indices))

    def codeword(self, indices) -> StfCodeword:
        sym = self.symbols(np.asarray(indices))
        return StfCodeword(self.template(sym), sym)

    def mean_energy(self) -> float:
        """Exact E||G||_F^2 for independent uniform symbols."""
        # second moments of the real view; distinct symbols are independent
        K = self.num_symbols
        mean = np.zeros(2 * K)
        blocks = []
        for k, a in enumerate(self.alphabets):
            r = np.stack([a.points.real, a.points.imag])
            mean[2 * k : 2 * k + 2] = r.mean(axis=1)
            blocks.append(r @ r.T / a.order)
        second = np.outer(mean, mean)
        for k, blk in enumerate(blocks):
            second[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = blk
        gram = np.real(np.einsum("irp,jrp->ij", self.basis.conj(), self.basis))
        return float(np.sum(gram * second))

    @property
    def tx_scale(self) -> float:
        """Amplitude factor giving unit average transmit energy per codeword row."""
        return float(np.sqrt(self.rows / self.mean_energy()))

    def all_indices(self) -> np.ndarray:
        orders = [a.order for a in self.alphabets]
        return np.stack(np.unravel_index(np.arange(np.prod(orders)), orders), axis=-1)


def qostfbc4_code(order: int = 4, rotation: float | None = None, swapped: bool = False) -> LinearCode:
    """Four-antenna family: x1..x4 from M-PSK A, x5..x8 from A rotated by ``rotation``.

    ``swapped=True`` puts the rotation on x1..x4 instead.
    """
    phi = optimal_rotation(order) if rotation is None else rotation
    plain, rot = mpsk(order), mpsk(order, phi)
    alph = (rot,) * 4 + (plain,) * 4 if swapped else (plain,) * 4 + (rot,) * 4
    name = f"qostfbc4-{order}psk" + ("-swapped" if swapped else "")
    names = ("x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8")
    return LinearCode(name, qostftc8_matrix, alph, names)


def qostfbc2_code(order: int = 4, rotation: float | None = None) -> LinearCode:
    phi = optimal_rotation(order) if rotation is None else rotation
    alph = (mpsk(order),) * 2 + (mpsk(order, phi),) * 2
    return LinearCode(f"qostfbc2-{order}psk", qostfbc2_matrix, alph, ("x1", "x2", "x3", "x4"))


def coupling_groups(code: LinearCode, row_channels: Sequence[int], tol: float = 1e-9) -> list[list[int]]:
    """Symbol groups that decouple in the ML metric.

    ``row_channels[r]`` names the channel seen by codeword row r (rows with the
    same value see the same channel).  Two generic random channels are drawn;
    symbols whose real Gram blocks never couple end up in different groups.
    """
    row_channels = np.asarray(row_channels)
    rng = np.random.default_rng(12345)
    K = code.num_symbols
    coupling = np.zeros((K, K))
    for _ in range(2):
        h = rng.standard_normal((row_channels.max() + 1, code.num_tx)) + 1j * rng.standard_normal(
            (row_channels.max() + 1, code.num_tx)
        )
        m = np.einsum("krp,rp->rk", code.basis, h[row_channels])
        gram = np.real(m.conj().T @ m)
        blocks = np.abs(gram).reshape(K, 2, K, 2).max(axis=(1, 3))
        coupling = np.maximum(coupling, blocks / blocks.max())
    n, labels = connected_components(coupling > tol, directed=False)
    return [sorted(np.flatnonzero(labels == g).tolist()) for g in range(n)]


# ---------------------------------------------------------------------------
# placement on the (subcarrier, OFDM symbol) grid


@dataclass(frozen=True)
class Placement:
    """Resource element of every codeword row: ``cells[b, r] = (subcarrier, ofdm_symbol)``."""

    name: str
    cells: np.ndarray
    num_subcarriers: int
    num_symbols: int

    @property
    def num_blocks(self) -> int:
        return self.cells.shape[0]

    @property
    def rows(self) -> int:
        return self.cells.shape[1]

    @property
    def row_channels(self) -> np.ndarray:
        """Per-row channel label of block 0 (quasi-static: the subcarrier decides)."""
        sub = self.cells[0, :, 0]
        return np.unique(sub, return_inverse=True)[1]


def frequency_placement(N: int, T: int, rows: int) -> Placement:
    """Rows on consecutive subcarriers of one OFDM symbol; leftover subcarriers stay empty."""
    per_symbol = N // rows
    if per_symbol == 0:
        raise CapacityError(f"{N} subcarriers cannot hold a {rows}-row codeword")
    cells = np.empty((T * per_symbol, rows, 2), dtype=int)
    for t in range(T):
        for m in range(per_symbol):
            cells[t * per_symbol + m, :, 0] = m * rows + np.arange(rows)
            cells[t * per_symbol + m, :, 1] = t
    return Placement("frequency", cells, N, T)


def time_frequency_placement(N: int, T: int, rows: int) -> Placement:
    """Upper half of each codeword runs across OFDM symbols on subcarrier m, the lower
    half likewise on subcarrier m + N/2.

    With a frame-static channel each half sees one channel, so the quasi-orthogonal
    structure survives exactly; the two halves see independent fading when the
    delay profile has an even number of equal taps.
    """
    half_rows = rows // 2
    if rows % 2 or N % 2 or T % half_rows:
        raise CapacityError(f"cannot place {rows}-row codewords on a {N}x{T} grid")
    slots = T // half_rows
    cells = np.empty((N // 2 * slots, rows, 2), dtype=int)
    b = 0
    for m in range(N // 2):
        for s in range(slots):
            t = s * half_rows + np.arange(half_rows)
            cells[b, :half_rows, 0] = m
            cells[b, half_rows:, 0] = m + N // 2
            cells[b, :half_rows, 1] = t
            cells[b, half_rows:, 1] = t
            b += 1
    return Placement("time-frequency", cells, N, T)


PLACEMENTS = {"frequency": frequency_placement, "time-frequency": time_frequency_placement}


@dataclass
class StfGrid:
    """Transmit tensor indexed (subcarrier, tx antenna, OFDM symbol)."""

    data: np.ndarray

    @property
    def num_subcarriers(self) -> int:
        return self.data.shape[-3]

    @property
    def num_symbols(self) -> int:
        return self.data.shape[-1]

    def energy(self) -> np.ndarray:
        """Squared Frobenius norm per OFDM symbol."""
        return np.sum(np.abs(self.data) ** 2, axis=(-3, -2))


def place(matrices, placement: Placement, scale: float = 1.0) -> np.ndarray:
    """Scatter codeword matrices (..., B, rows, Mt) into a grid (..., N, Mt, T)."""
    matrices = np.asarray(matrices)
    lead = matrices.shape[:-3]
    B, R, Mt = matrices.shape[-3:]
    if B > placement.num_blocks:
        raise CapacityError(f"{B} codewords exceed the {placement.num_blocks} available blocks")
    grid = np.zeros(lead + (placement.num_subcarriers, Mt, placement.num_symbols), dtype=complex)
    cells = placement.cells[:B]
    view = np.moveaxis(grid, (-3, -1), (0, 1))
    view[cells[..., 0], cells[..., 1]] = np.moveaxis(scale * matrices, (-3, -2), (0, 1))
    return grid


def gather(received, placement: Placement, count: int | None = None) -> np.ndarray:
    """Collect per-row samples (..., B, rows, Mr) from a received grid (..., N, Mr, T)."""
    cells = placement.cells[: placement.num_blocks if count is None else count]
    view = np.moveaxis(np.asarray(received), (-3, -1), (0, 1))
    return np.moveaxis(view[cells[..., 0], cells[..., 1]], (0, 1), (-3, -2))


def assemble_grid(codewords: Sequence[StfCodeword], N: int, scale: float = 1.0) -> StfGrid:
    """One OFDM symbol: codeword m occupies subcarriers rows*m .. rows*(m+1)-1."""
    mats = np.stack([np.asarray(c.matrix if isinstance(c, StfCodeword) else c) for c in codewords])
    placement = frequency_placement(N, 1, mats.shape[1])
    return StfGrid(place(mats, placement, scale))


def disassemble_grid(grid: StfGrid, count: int, rows: int = 8, scale: float = 1.0) -> list[np.ndarray]:
    data = grid.data if isinstance(grid, StfGrid) else np.asarray(grid)
    placement = frequency_placement(data.shape[0], data.shape[-1], rows)
    mats = gather(data, placement, count) / scale
    return list(mats)
