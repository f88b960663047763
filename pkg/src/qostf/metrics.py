"""Pairwise codeword design metrics: distance matrices, rank, CGD, MPD, Hamming distance."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codebook import StfCodeword

# singular values below RANK_TOL * largest count as zero
RANK_TOL = 1e-9


def _as_matrix(c) -> np.ndarray:
    return np.asarray(c.matrix if isinstance(c, StfCodeword) else c)


def difference_matrix(C, E) -> np.ndarray:
    C, E = _as_matrix(C), _as_matrix(E)
    if C.shape != E.shape:
        raise ValueError(f"codeword shapes differ: {C.shape} vs {E.shape}")
    return C - E


def distance_matrix(C, E) -> np.ndarray:
    """A = D^H D with D = C - E (Hermitian PSD, num_tx x num_tx)."""
    D = difference_matrix(C, E)
    return D.conj().swapaxes(-1, -2) @ D


def matrix_rank(A, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(np.asarray(A), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def cgd(distance_matrices: Sequence[np.ndarray]) -> float:
    """det(sum_z A^z), clamped at zero; an empty list gives 0."""
    if len(distance_matrices) == 0:
        return 0.0
    total = np.sum(np.asarray(distance_matrices), axis=0)
    value = float(np.real(np.linalg.det(total)))
    scale = float(np.max(np.abs(total))) ** total.shape[0] if total.size else 0.0
    if value < 0 or abs(value) <= RANK_TOL * scale:
        return 0.0
    return value


def mpd(difference_matrices: Iterable[np.ndarray]) -> float:
    """prod_z (1 + ||D^z||_F^2); the empty product is 1."""
    out = 1.0
    for D in difference_matrices:
        out *= 1.0 + float(np.sum(np.abs(np.asarray(D)) ** 2))
    return out


def closed_form_cgd(symbols_1, symbols_2) -> float:
    """Printed per-pair CGD expression for two 8-symbol codewords.

    (1/8) sum_p |dx_p + dx~_{p+4}|^2 + |dx_p - dx~_{p+4}|^2.  It vanishes only for
    identical symbol tuples, so it serves as a zero/nonzero indicator only.
    """
    a = np.asarray(symbols_1, dtype=complex)
    b = np.asarray(symbols_2, dtype=complex)
    if a.shape[-1] != 8 or b.shape[-1] != 8:
        raise ValueError("closed_form_cgd expects 8-symbol tuples")
    d = a - b
    dx, dxt = d[..., :4], d[..., 4:]
    return np.sum(np.abs(dx + dxt) ** 2 + np.abs(dx - dxt) ** 2, axis=-1) / 8


def hamming_distance(seq_c: Sequence, seq_e: Sequence) -> int:
    """Number of coding steps at which two codeword sequences differ."""
    if len(seq_c) != len(seq_e):
        raise ValueError(f"sequence lengths differ: {len(seq_c)} vs {len(seq_e)}")
    return sum(
        1 for c, e in zip(seq_c, seq_e) if not np.array_equal(_as_matrix(c), _as_matrix(e))
    )


def diversity_bound(delta_h: int, L: int, Mr: int, num_tx: int = 4) -> int:
    """Maximum achievable diversity num_tx * Mr * min(delta_h, L)."""
    return num_tx * Mr * min(delta_h, L)


def generalized_cgd(A, tol: float = RANK_TOL) -> tuple[int, float]:
    """(rank, product of the nonzero eigenvalues) of a PSD matrix.

    Equals (full rank, det) for full-rank matrices and keeps the ordering
    information that plain det loses for rank-deficient ones.
    """
    w = np.linalg.eigvalsh(np.asarray(A))
    top = w.max(initial=0.0)
    keep = w > tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    return int(keep.sum()), float(np.prod(w[keep])) if keep.any() else 0.0


@dataclass(frozen=True)
class PairwiseMetrics:
    cgd: float
    mpd: float
    min_rank: int
    delta_h: int
    rank: int = 0

    @property
    def product(self) -> float:
        return self.cgd * self.mpd


def pairwise_metrics(seq_c: Sequence, seq_e: Sequence) -> PairwiseMetrics:
    """Design metrics over the steps where the two sequences differ."""
    if len(seq_c) != len(seq_e):
        raise ValueError(f"sequence lengths differ: {len(seq_c)} vs {len(seq_e)}")
    diffs = [difference_matrix(c, e) for c, e in zip(seq_c, seq_e)]
    diffs = [D for D in diffs if np.any(D != 0)]
    if not diffs:
        return PairwiseMetrics(0.0, 1.0, 0, 0, 0)
    As = [D.conj().T @ D for D in diffs]
    return PairwiseMetrics(
        cgd=cgd(As),
        mpd=mpd(diffs),
        min_rank=min(matrix_rank(A) for A in As),
        delta_h=len(diffs),
        rank=matrix_rank(np.sum(As, axis=0)),
    )


def pair_table(matrices, tol: float = RANK_TOL) -> dict[str, np.ndarray]:
    """All-pairs metrics for a list of single-step codewords (n, rows, num_tx).

    Returns n x n arrays ``rank``, ``cgd``, ``gcgd`` (product of nonzero
    eigenvalues) and ``mpd``.
    """
    M = np.asarray(matrices)
    n = M.shape[0]
    out = {k: np.zeros((n, n)) for k in ("cgd", "gcgd", "mpd")}
    out["rank"] = np.zeros((n, n), dtype=int)
    chunk = max(1, 2**16 // n)
    for start in range(0, n, chunk):
        D = M[start : start + chunk, None] - M[None]
        A = np.einsum("abri,abrj->abij", D.conj(), D)
        w = np.linalg.eigvalsh(A)
        top = w.max(axis=-1, keepdims=True)
        keep = w > tol * np.where(top > 0, top, np.inf)
        rank = keep.sum(-1)
        gc = np.where(keep, w, 1.0).prod(-1)
        gc[rank == 0] = 0.0
        sl = slice(start, start + chunk)
        out["rank"][sl] = rank
        out["gcgd"][sl] = gc
        out["cgd"][sl] = np.where(rank == M.shape[-1], gc, 0.0)
        out["mpd"][sl] = 1.0 + np.sum(np.abs(D) ** 2, axis=(-2, -1))
    return out


METRIC_TABLE_COLUMNS = ("pair_id", "cgd", "mpd", "rank", "product")


def write_metric_table(rows: Iterable[tuple], path) -> Path:
    """CSV with columns pair_id, cgd, mpd, rank, product."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(METRIC_TABLE_COLUMNS)
            for pair_id, m in rows:
                if isinstance(m, PairwiseMetrics):
                    w.writerow([pair_id, repr(m.cgd), repr(m.mpd), m.rank, repr(m.product)])
                else:
                    w.writerow([pair_id, *m])
    except OSError as exc:
        raise OSError(f"cannot write metric table {path}: {exc}") from exc
    return path
