"""Frame encoding and maximum-likelihood decoding (block and trellis modes).

All decoders work on a real-linear model of one codeword block:
``y[r, q] = sum_k s_k M[r, q, k]`` with ``s`` the real and imaginary parts of the
generating symbols and ``M[r, q, k] = scale * sum_p basis[k, r, p] H[p, q, n_r]``.
The squared distance ``||y - M s||^2`` splits into independent terms over the
symbol groups whose real Gram blocks do not couple, so each group is searched
on its own.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from .codebook import (
    LinearCode,
    PLACEMENTS,
    Placement,
    StfCodeword,
    StfGrid,
    coupling_groups,
    gather,
    place,
    qostfbc2_code,
    qostfbc4_code,
)
from .constellation import bits_to_indices, indices_to_bits
from .partition import Trellis, design_trellis

SCHEMES = ("qostfbc-2tx", "qostfbc-4tx", "qostftc-4state")


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class FrameConfig:
    N: int = 64
    T: int = 4
    Mr: int = 1
    scheme: str = "qostfbc-4tx"
    placement: str = "time-frequency"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise FrameError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.placement not in PLACEMENTS:
            raise FrameError(f"unknown placement {self.placement!r}")
        if self.Mr < 1:
            raise FrameError("Mr must be >= 1")

    @property
    def mode(self) -> str:
        return "trellis" if self.scheme == "qostftc-4state" else "block"

    @property
    def Mt(self) -> int:
        return 2 if self.scheme == "qostfbc-2tx" else 4


@dataclass
class DecodedFrame:
    bits: np.ndarray
    path_metric: float
    states: np.ndarray | None = None  # survivor state sequence (trellis mode)


# ---------------------------------------------------------------------------
# real-linear block model


def block_channels(cfr, placement: Placement, count: int | None = None) -> np.ndarray:
    """Per-row channel of every block: (..., B, rows, Mt, Mr) from cfr (..., Mt, Mr, N)."""
    cells = placement.cells[: placement.num_blocks if count is None else count]
    return np.moveaxis(np.asarray(cfr)[..., cells[..., 0]], (-2, -1), (-4, -3))


def effective_matrix(code: LinearCode, H_rows, scale: float) -> np.ndarray:
    """Complex M[..., r*Mr + q, k] of the real-linear model."""
    per_row = np.ascontiguousarray(code.basis.transpose(1, 2, 0)) * scale  # (rows, Mt, K)
    M = np.swapaxes(np.asarray(H_rows), -1, -2) @ per_row  # (..., rows, Mr, K)
    return M.reshape(*M.shape[:-3], -1, M.shape[-1])


def _real_coords(symbols) -> np.ndarray:
    s = np.asarray(symbols)
    return np.stack([s.real, s.imag], axis=-1).reshape(*s.shape[:-1], -1)


def _group_cols(group) -> np.ndarray:
    return np.array([[2 * k, 2 * k + 1] for k in group]).ravel()


@dataclass(frozen=True)
class GroupSearch:
    """Candidate table for one symbol group: point indices and real coordinates."""

    symbols: tuple[int, ...]
    indices: np.ndarray  # (n, len(symbols)) point indices, first symbol most significant
    coords: np.ndarray  # (n, 2 * len(symbols))

    @classmethod
    def build(cls, code: LinearCode, symbols, allowed=None) -> "GroupSearch":
        choices = [
            np.arange(code.alphabets[s].order) if allowed is None else np.asarray(allowed[s]) for s in symbols
        ]
        idx = np.array(list(itertools.product(*choices)), dtype=int).reshape(-1, len(symbols))
        pts = np.stack([code.alphabets[s].points[idx[:, j]] for j, s in enumerate(symbols)], axis=-1)
        return cls(tuple(symbols), idx, _real_coords(pts))

    @cached_property
    def features(self) -> np.ndarray:
        """Rows [s_i s_j (i <= j, off-diagonal doubled), -2 s] so that one product gives the metric."""
        iu = np.triu_indices(self.coords.shape[1])
        quad = self.coords[:, iu[0]] * self.coords[:, iu[1]] * np.where(iu[0] == iu[1], 1.0, 2.0)
        return np.ascontiguousarray(np.concatenate([quad, -2 * self.coords], axis=1).T)

    def metrics(self, gram, corr) -> np.ndarray:
        """s^T G s - 2 s^T c for every candidate: (..., n)."""
        cols = _group_cols(self.symbols)
        iu = np.triu_indices(len(cols))
        lead = corr.shape[:-1]
        x = np.concatenate([gram[..., cols[iu[0]], cols[iu[1]]], corr[..., cols]], axis=-1)
        return (x.reshape(-1, x.shape[-1]) @ self.features).reshape(*lead, -1)


def normal_equations(M, y):
    """Real Gram Re(M^H M) and correlation Re(M^H y)."""
    stacked = np.concatenate([M.real, M.imag], axis=-2)
    gram = np.swapaxes(stacked, -1, -2) @ stacked
    corr = (np.swapaxes(stacked, -1, -2) @ np.concatenate([y.real, y.imag], axis=-1)[..., None])[..., 0]
    return gram, corr


def groups_decouple(gram, groups, tol: float = 1e-9) -> bool:
    owner = np.empty(gram.shape[-1] // 2, dtype=int)
    for g, syms in enumerate(groups):
        owner[list(syms)] = g
    owner = np.repeat(owner, 2)
    cross = owner[:, None] != owner[None, :]
    scale = np.abs(gram).max() or 1.0
    return bool(np.all(np.abs(gram[..., cross]) <= tol * scale))


# ---------------------------------------------------------------------------
# single-block API


def block_metric(received, H_rows, candidate, scale: float = 1.0) -> float:
    """sum_q sum_rows |Y - sum_p C[r, p] H[p, q, n_r]|^2 for one block.

    ``received`` is (rows, Mr) and ``H_rows`` is (rows, Mt, Mr).
    """
    C = candidate.matrix if isinstance(candidate, StfCodeword) else np.asarray(candidate)
    pred = scale * np.einsum("rp,rpq->rq", C, H_rows)
    return float(np.sum(np.abs(np.asarray(received) - pred) ** 2))


def exhaustive_decode_block(received, H_rows, code: LinearCode, scale: float = 1.0, allowed=None):
    """Brute-force ML over every codeword (optionally restricted per symbol)."""
    choices = [np.arange(a.order) if allowed is None else np.asarray(allowed[k]) for k, a in enumerate(code.alphabets)]
    idx = np.array(list(itertools.product(*choices)), dtype=int)
    mats = code.matrices(idx)
    pred = scale * np.einsum("nrp,rpq->nrq", mats, H_rows)
    met = np.sum(np.abs(np.asarray(received)[None] - pred) ** 2, axis=(1, 2))
    best = int(met.argmin())
    return idx[best], float(met[best])


def pairwise_decode_block(received, H_rows, code: LinearCode, scale: float = 1.0, groups=None, allowed=None):
    """Exact ML over ``code`` by independent searches over decoupled symbol groups.

    Returns (point indices of the best codeword, its block metric).  Falls back
    to exhaustive search, with a warning, when the groups do not decouple for
    this channel.
    """
    received = np.asarray(received)
    M = effective_matrix(code, H_rows, scale)
    y = received.reshape(-1)
    gram, corr = normal_equations(M, y)
    if groups is None:
        groups = _groups_from_gram(gram)
    if not groups_decouple(gram, groups):
        warnings.warn("symbol groups do not decouple for this block; using exhaustive search", RuntimeWarning)
        return exhaustive_decode_block(received, H_rows, code, scale, allowed)
    best = np.zeros(code.num_symbols, dtype=int)
    total = float(np.sum(np.abs(y) ** 2))
    for g in groups:
        search = GroupSearch.build(code, g, allowed)
        met = search.metrics(gram, corr)
        i = int(met.argmin())
        best[list(g)] = search.indices[i]
        total += float(met[i])
    return best, max(total, 0.0)


def _groups_from_gram(gram, tol: float = 1e-9):
    from scipy.sparse.csgraph import connected_components

    K = gram.shape[-1] // 2
    blocks = np.abs(gram).reshape(K, 2, K, 2).max(axis=(1, 3))
    _, lab = connected_components(blocks > tol * blocks.max(), directed=False)
    return [np.flatnonzero(lab == g).tolist() for g in np.unique(lab)]


# ---------------------------------------------------------------------------
# schemes


@dataclass
class Scheme:
    """Everything needed to encode and decode frames of one configuration."""

    cfg: FrameConfig
    codes: tuple[LinearCode, ...]
    placement: Placement
    trellis: Trellis | None = None
    groups: list = field(default_factory=list)
    scale: float = 1.0

    @property
    def num_blocks(self) -> int:
        return self.placement.num_blocks

    @property
    def bits_per_block(self) -> int:
        if self.trellis is not None:
            return self.trellis.bits_per_step
        return self.codes[0].bits_per_codeword

    @property
    def bits_per_frame(self) -> int:
        return self.num_blocks * self.bits_per_block

    @cached_property
    def searches(self) -> list[list[GroupSearch]]:
        return [[GroupSearch.build(c, g) for g in self.groups] for c in self.codes]

    # -- encoding ---------------------------------------------------------

    def encode_indices(self, bits) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bits (F, bits_per_frame) -> (symbol indices (F, B, K), family (F, B), final state (F,))."""
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape[-1] != self.bits_per_frame:
            raise FrameError(f"expected {self.bits_per_frame} bits per frame, got {bits.shape[-1]}")
        F = bits.shape[0]
        steps = bits.reshape(F, self.num_blocks, self.bits_per_block)
        if self.trellis is None:
            m = self.codes[0].alphabets[0].bits_per_symbol
            return bits_to_indices(steps, m), np.zeros((F, self.num_blocks), int), np.zeros(F, int)
        tr = self.trellis
        ib = tr.input_bits
        inputs = steps[..., :ib] @ (1 << np.arange(ib - 1, -1, -1))
        state = np.zeros(F, dtype=int)
        fam = np.zeros((F, self.num_blocks), dtype=int)
        sub = np.zeros((F, self.num_blocks), dtype=int)
        for z in range(self.num_blocks):
            fam[:, z] = np.asarray(tr.state_family)[state]
            sub[:, z] = tr.subset[state, inputs[:, z]]
            state = tr.next_state[state, inputs[:, z]]
        idx = np.zeros((F, self.num_blocks, self.codes[0].num_symbols), dtype=int)
        for f, lf in enumerate(tr.lifts):
            sel = fam == f
            if sel.any():
                idx[sel] = lf.encode(sub[sel], steps[sel][:, ib:])
        return idx, fam, state

    def codeword_matrices(self, idx, fam) -> np.ndarray:
        out = np.empty(idx.shape[:-1] + (self.codes[0].rows, self.codes[0].num_tx), dtype=complex)
        for f, code in enumerate(self.codes):
            sel = fam == f
            if sel.any():
                out[sel] = code.matrices(idx[sel])
        return out

    def encode(self, bits) -> tuple[np.ndarray, np.ndarray]:
        """Transmit grids (F, N, Mt, T) and final encoder states."""
        idx, fam, state = self.encode_indices(bits)
        return place(self.codeword_matrices(idx, fam), self.placement, self.scale), state

    # -- decoding ---------------------------------------------------------

    def _normal_equations(self, received, cfr):
        y = gather(received, self.placement)  # (F, B, R, Mr)
        H = block_channels(cfr, self.placement)  # (F, B, R, Mt, Mr)
        out = []
        for code in self.codes:
            M = effective_matrix(code, H, self.scale)
            out.append(normal_equations(M, y.reshape(*y.shape[:-2], -1)))
        energy = np.sum(np.abs(y) ** 2, axis=(-2, -1))
        return out, energy

    def group_metrics(self, received, cfr):
        """metrics[f][g]: (F, B, n_g) candidate metrics; plus per-block received energy."""
        eqs, energy = self._normal_equations(received, cfr)
        mets = [[s.metrics(*eqs[f]) for s in self.searches[f]] for f in range(len(self.codes))]
        return mets, energy

    def decode(self, received, cfr) -> list[DecodedFrame]:
        return self.decode_batch(received, cfr)[2]

    def decode_bits(self, received, cfr) -> np.ndarray:
        return self.decode_batch(received, cfr, details=False)[0]

    def decode_batch(self, received, cfr, details: bool = True):
        """Decode frames (F, N, Mr, T); returns (bits, path metrics, DecodedFrame list)."""
        mets, energy = self.group_metrics(received, cfr)
        if self.trellis is None:
            bits, metric = self._decode_blocks(mets[0], energy)
            states = None
        else:
            bits, metric, states = self._viterbi(mets, energy)
        frames = None
        if details:
            survivors = states if states is not None else [None] * len(bits)
            frames = [DecodedFrame(b, float(m), s) for b, m, s in zip(bits, metric, survivors)]
        return bits, metric, frames

    def _decode_blocks(self, mets, energy):
        F, B = energy.shape
        code = self.codes[0]
        idx = np.zeros((F, B, code.num_symbols), dtype=int)
        total = energy.copy()
        for search, met in zip(self.searches[0], mets):
            best = met.argmin(-1)
            idx[..., list(search.symbols)] = search.indices[best]
            total += np.take_along_axis(met, best[..., None], -1)[..., 0]
        m = code.alphabets[0].bits_per_symbol
        bits = indices_to_bits(idx, m).reshape(F, -1)
        return bits, total.sum(-1)

    def _subset_metrics(self, f, mets):
        """Branch metric per subset of family f and the class choices achieving it."""
        lf = self.trellis.lifts[f]
        C = lf.num_classes
        class_min, class_arg = [], []
        for g, met in enumerate(mets):
            members = lf.members[g]  # (C, n/C)
            per = met[..., members]  # (F, B, C, n/C)
            a = per.argmin(-1)
            class_arg.append(members[np.arange(C), a])  # (F, B, C) point ids
            class_min.append(np.take_along_axis(per, a[..., None], -1)[..., 0])
        # XOR min-plus combination over groups
        acc = class_min[0]
        choice = [np.broadcast_to(np.arange(C), acc.shape)]
        for g in range(1, len(mets)):
            k = np.arange(C)
            # cand[..., k, c] = acc[..., c] + class_min_g[..., c ^ k]
            cand = acc[..., None, :] + class_min[g][..., k[:, None] ^ k[None, :]]
            best_c = cand.argmin(-1)
            acc = np.take_along_axis(cand, best_c[..., None], -1)[..., 0]
            prev = [np.take_along_axis(ch, best_c, -1) for ch in choice]
            choice = prev + [best_c ^ k]
        return acc, choice, class_arg

    def _viterbi(self, mets, energy):
        tr = self.trellis
        F, Z = energy.shape
        S, I = tr.next_state.shape
        fam_state = np.asarray(tr.state_family)
        sub_tables = [self._subset_metrics(f, mets[f]) for f in range(len(tr.lifts))]
        # branch metrics (F, Z, S, I)
        bm = np.empty((F, Z, S, I))
        for s in range(S):
            bm[:, :, s, :] = sub_tables[fam_state[s]][0][..., tr.subset[s]]
        bm += energy[..., None, None]
        pm = np.full((F, S), np.inf)
        pm[:, 0] = 0.0
        back = np.zeros((F, Z, S), dtype=np.int64)  # encoded predecessor s*I + i
        flat_next = tr.next_state.ravel()
        for z in range(Z):
            cand = (pm[:, :, None] + bm[:, z]).reshape(F, S * I)
            new = np.full((F, S), np.inf)
            arg = np.zeros((F, S), dtype=np.int64)
            for t in range(S):
                cols = np.flatnonzero(flat_next == t)
                if cols.size:
                    j = cand[:, cols].argmin(-1)
                    arg[:, t] = cols[j]
                    new[:, t] = cand[np.arange(F), cols[j]]
            pm, back[:, z] = new, arg
        end = pm.argmin(-1)
        metric = pm[np.arange(F), end]
        states = np.zeros((F, Z + 1), dtype=int)
        inputs = np.zeros((F, Z), dtype=int)
        states[:, Z] = end
        for z in range(Z - 1, -1, -1):
            code = back[np.arange(F), z, states[:, z + 1]]
            states[:, z], inputs[:, z] = np.divmod(code, I)
        # recover the codeword inside each chosen subset
        fam = fam_state[states[:, :Z]]
        sub = tr.subset[states[:, :Z], inputs]
        K = self.codes[0].num_symbols
        idx = np.zeros((F, Z, K), dtype=int)
        for f, lf in enumerate(tr.lifts):
            _, choice, class_arg = sub_tables[f]
            sel = fam == f
            if not sel.any():
                continue
            for g, syms in enumerate(lf.groups):
                cls = np.take_along_axis(choice[g], sub[..., None], -1)[..., 0]
                pid = np.take_along_axis(class_arg[g], cls[..., None], -1)[..., 0]
                vals = np.unravel_index(pid, lf.group_orders[g])
                for s_, v in zip(syms, vals):
                    idx[..., s_] = np.where(sel, v, idx[..., s_])
        ib = tr.input_bits
        bits = np.zeros((F, Z, tr.bits_per_step), dtype=int)
        bits[..., :ib] = (inputs[..., None] >> np.arange(ib - 1, -1, -1)) & 1
        for f, lf in enumerate(tr.lifts):
            sel = fam == f
            if sel.any():
                bits[sel, ib:] = lf.decode(idx[sel])[1]
        return bits.reshape(F, -1), metric, states


DEFAULT_TRELLIS = Path(__file__).with_name("data") / "trellis4.json"


@lru_cache(maxsize=None)
def default_trellis() -> Trellis:
    """The pinned four-state design (regenerate with ``qostf design``)."""
    if DEFAULT_TRELLIS.exists():
        return Trellis.load(DEFAULT_TRELLIS)
    return design_trellis()


def make_scheme(cfg: FrameConfig, trellis: Trellis | None = None) -> Scheme:
    placement = PLACEMENTS[cfg.placement]
    if cfg.scheme == "qostfbc-2tx":
        codes = (qostfbc2_code(4),)
        tr = None
    elif cfg.scheme == "qostfbc-4tx":
        codes = (qostfbc4_code(4),)
        tr = None
    else:
        tr = trellis or default_trellis()
        codes = tuple(lf.code for lf in tr.lifts)
    pl = placement(cfg.N, cfg.T, codes[0].rows)
    groups = coupling_groups(codes[0], pl.row_channels)
    if tr is not None:
        lift_groups = sorted(sorted(g) for g in tr.lifts[0].groups)
        if sorted(sorted(g) for g in groups) != lift_groups:
            raise FrameError(
                f"placement {cfg.placement!r} does not decouple the trellis symbol groups; use time-frequency"
            )
        groups = [list(g) for g in tr.lifts[0].groups]
    scale = codes[0].tx_scale
    return Scheme(cfg, codes, pl, tr, groups, scale)


# ---------------------------------------------------------------------------
# single-frame convenience wrappers


def encode_frame(bits, cfg: FrameConfig, trellis: Trellis | None = None) -> tuple[StfGrid, int]:
    scheme = make_scheme(cfg, trellis)
    grid, state = scheme.encode(np.asarray(bits)[None])
    return StfGrid(grid[0]), int(state[0])


def viterbi_decode(received, cfr, trellis: Trellis | None, cfg: FrameConfig) -> DecodedFrame:
    scheme = make_scheme(cfg, trellis)
    return scheme.decode(np.asarray(received)[None], np.asarray(cfr)[None])[0]
