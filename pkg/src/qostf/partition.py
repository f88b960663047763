"""Set partitioning of codeword alphabets and the four-state trellis built from it.

The eight-symbol codeword splits into symbol groups whose distance matrices add
(see :func:`check_distance_additive`), so partitioning works on each group's
alphabet (256 points for QPSK) and the subsets of full codewords are obtained by
lifting: a codeword belongs to subset ``k = XOR of its group class labels``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Sequence

import numpy as np

from .codebook import LinearCode, qostfbc4_code
from .constellation import Constellation, bits_to_indices, indices_to_bits
from .metrics import RANK_TOL, pair_table

FORMAT_VERSION = 1


class DesignConstraintError(ValueError):
    pass


# ---------------------------------------------------------------------------
# constellation expansion


def expand_constellation(base: Constellation) -> tuple[LinearCode, LinearCode]:
    """Two disjoint QPSK codeword families.

    Family A keeps x1..x4 on the base points and rotates x5..x8 by pi/4; family B
    swaps the roles.
    """
    if base.order != 4:
        raise DesignConstraintError(f"constellation expansion is defined for QPSK, got {base.order}-PSK")
    a = qostfbc4_code(4, np.pi / 4, swapped=False)
    b = qostfbc4_code(4, np.pi / 4, swapped=True)
    return LinearCode("family-A", a.template, a.alphabets, a.symbol_names), LinearCode(
        "family-B", b.template, b.alphabets, b.symbol_names
    )


def check_distance_additive(code: LinearCode, groups: Sequence[Sequence[int]], tol: float = 1e-12) -> bool:
    """True when A(D1 + D2) = A(D1) + A(D2) for differences confined to distinct groups.

    Cross terms are bilinear in the real symbol coordinates, so it suffices that
    ``B_k^H B_l + B_l^H B_k`` vanishes for basis matrices of different groups.
    """
    B = code.basis
    owner = np.empty(code.num_symbols, dtype=int)
    for g, syms in enumerate(groups):
        owner[list(syms)] = g
    cross = np.einsum("kri,lrj->klij", B.conj(), B)
    herm = cross + cross.transpose(1, 0, 2, 3)
    coord_owner = np.repeat(owner, 2)
    mask = coord_owner[:, None] != coord_owner[None, :]
    return bool(np.all(np.abs(herm[mask]) <= tol))


def group_points(code: LinearCode, symbols: Sequence[int]) -> np.ndarray:
    """Point-index tuples of a symbol group, shape (n, len(symbols)); first symbol most significant."""
    orders = [code.alphabets[s].order for s in symbols]
    return np.stack(np.unravel_index(np.arange(math.prod(orders)), orders), axis=-1)


def group_matrices(code: LinearCode, symbols: Sequence[int]) -> np.ndarray:
    """Codeword contribution of every point of a symbol group (other symbols zero)."""
    idx = group_points(code, symbols)
    s = np.zeros((len(idx), code.num_symbols), dtype=complex)
    for j, sym in enumerate(symbols):
        s[:, sym] = code.alphabets[sym].points[idx[:, j]]
    return code.template(s)


# ---------------------------------------------------------------------------
# partition tree


def _parity(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x = x >> 1
    return out


@dataclass(frozen=True)
class PartitionTree:
    """Binary refinement of an alphabet of identifiers 0..n-1.

    ``levels[l]`` lists the 2**l subsets of level l; ``metric[l]`` is the minimum
    intra-subset CGD*MPD at that level (inf when all subsets are singletons).
    ``functionals[l-1][i]`` is the identifier bit mask whose parity split subset i
    of level l-1.
    """

    levels: tuple[tuple[np.ndarray, ...], ...]
    metric: tuple[float, ...]
    functionals: tuple[tuple[int, ...], ...] = ()

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def size(self) -> int:
        return len(self.levels[0][0])

    def labels(self, level: int) -> np.ndarray:
        out = np.empty(self.size, dtype=int)
        for c, members in enumerate(self.levels[level]):
            out[members] = c
        return out

    def validate(self) -> None:
        for l in range(1, len(self.levels)):
            parents, children = self.levels[l - 1], self.levels[l]
            if len(children) != 2 * len(parents):
                raise DesignConstraintError(f"level {l} does not split every subset in two")
            for i, p in enumerate(parents):
                joined = np.sort(np.concatenate(children[2 * i : 2 * i + 2]))
                if not np.array_equal(joined, np.sort(p)):
                    raise DesignConstraintError(f"level {l} does not refine subset {i}")
            if self.metric[l] < self.metric[l - 1]:
                raise DesignConstraintError(f"intra-subset metric decreases at level {l}")


def _spectrum(ranks, values, depth):
    """Smallest ``depth`` distinct (rank, value) keys with negated multiplicities."""
    if ranks.size == 0:
        return [(math.inf, math.inf, 0)]
    keys, counts = np.unique(np.stack([ranks, values]), axis=1, return_counts=True)
    return [(int(r), float(v), -int(c)) for (r, v), c in zip(keys.T[:depth], counts[:depth])]


def _intra(subsets, table):
    iu = [np.triu_indices(len(s), 1) for s in subsets]
    ranks = np.concatenate([table["rank"][np.ix_(s, s)][i] for s, i in zip(subsets, iu)])
    values = np.concatenate([table["key"][np.ix_(s, s)][i] for s, i in zip(subsets, iu)])
    return ranks, values


def _min_metric(subsets, table) -> float:
    cgd_mpd = table["cgd"] * table["mpd"]
    vals = [cgd_mpd[np.ix_(s, s)][np.triu_indices(len(s), 1)].min() for s in subsets if len(s) > 1]
    return float(min(vals)) if vals else math.inf


def partition(
    matrices,
    levels: int,
    *,
    allowed: Sequence[int] | None = None,
    depth: int = 8,
) -> PartitionTree:
    """Greedy binary set partitioning of single-step codewords (n, rows, Mt).

    Every split is a balanced parity split on the bits of the codeword
    identifier.  A split is scored by the sorted spectrum of its intra-subset
    pair keys (rank of A, then product of nonzero eigenvalues times MPD, then
    multiplicity) and the lexicographically largest spectrum wins; ties go to
    the lowest mask.  ``allowed`` restricts the masks considered.
    """
    M = np.asarray(matrices)
    n = len(M)
    if n == 0:
        raise ValueError("cannot partition an empty family")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    table = pair_table(M)
    table["key"] = np.round(table["gcgd"] * table["mpd"], 6)
    nbits = max(1, (n - 1).bit_length())
    masks = list(range(1, 2**nbits)) if allowed is None else sorted(allowed)
    ids = np.arange(n)
    mask_parity = {m: _parity(ids & m) for m in masks}

    current = [ids]
    tree_levels = [tuple(current)]
    metric = [_min_metric(current, table)]
    chosen = []
    for _ in range(levels):
        nxt, funcs = [], []
        for subset in current:
            if len(subset) < 2:
                nxt += [subset, subset[:0]]
                funcs.append(0)
                continue
            best = None
            for m in masks:
                lab = mask_parity[m][subset]
                if 2 * lab.sum() != len(subset):
                    continue
                parts = [subset[lab == 0], subset[lab == 1]]
                score = _spectrum(*_intra(parts, table), depth)
                if best is None or score > best[0]:
                    best = (score, m, parts)
            if best is None:
                raise DesignConstraintError("no balanced parity split available")
            nxt += best[2]
            funcs.append(best[1])
        current = nxt
        tree_levels.append(tuple(current))
        metric.append(max(metric[-1], _min_metric(current, table)))
        chosen.append(tuple(funcs))
    tree = PartitionTree(tuple(tree_levels), tuple(metric), tuple(chosen))
    tree.validate()
    return tree


def full_rank_masks(matrices) -> list[int]:
    """Parity masks constant on every component of the rank-deficient pair graph.

    Splitting only with these masks keeps every pair of codewords in different
    subsets at full rank.
    """
    from scipy.sparse.csgraph import connected_components

    M = np.asarray(matrices)
    table = pair_table(M)
    deficient = table["rank"] < M.shape[-1]
    _, comp = connected_components(deficient, directed=False)
    ids = np.arange(len(M))
    out = []
    for m in range(1, 2 ** max(1, (len(M) - 1).bit_length())):
        lab = _parity(ids & m)
        if all(len(np.unique(lab[comp == c])) == 1 for c in np.unique(comp)):
            out.append(m)
    return out


# ---------------------------------------------------------------------------
# lifting group partitions to codeword subsets


@dataclass(frozen=True)
class SubsetLift:
    """Codeword subsets of one family: subset = XOR of the group class labels.

    All groups but the last are free; the last group's point is drawn from the
    class that makes the XOR equal to the subset index.
    """

    code: LinearCode
    groups: tuple[tuple[int, ...], ...]
    labels: tuple[np.ndarray, ...]
    num_classes: int

    def __post_init__(self):
        if self.num_classes & (self.num_classes - 1):
            raise DesignConstraintError("number of classes must be a power of two")
        if sorted(s for g in self.groups for s in g) != list(range(self.code.num_symbols)):
            raise DesignConstraintError("groups must cover every symbol exactly once")
        for lab in self.labels:
            if np.bincount(lab, minlength=self.num_classes).std() != 0:
                raise DesignConstraintError("group classes must be equally sized")

    @property
    def num_subsets(self) -> int:
        return self.num_classes

    @cached_property
    def members(self) -> tuple[np.ndarray, ...]:
        """members[g][c] = sorted point ids of class c in group g."""
        return tuple(
            np.stack([np.flatnonzero(lab == c) for c in range(self.num_classes)]) for lab in self.labels
        )

    @cached_property
    def _rank_in_class(self) -> tuple[np.ndarray, ...]:
        out = []
        for m in self.members:
            r = np.empty(m.size, dtype=int)
            r[m] = np.arange(m.shape[1])[None, :]
            out.append(r)
        return tuple(out)

    @cached_property
    def group_orders(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(self.code.alphabets[s].order for s in g) for g in self.groups)

    @property
    def bits_per_codeword(self) -> int:
        """Bits selecting a codeword inside a subset."""
        free = sum(int(math.log2(math.prod(o))) for o in self.group_orders[:-1])
        last = int(math.log2(math.prod(self.group_orders[-1]) // self.num_classes))
        return free + last

    def point_ids(self, indices) -> list[np.ndarray]:
        """Per-group point ids from symbol indices (..., K)."""
        indices = np.asarray(indices)
        return [
            np.ravel_multi_index(tuple(indices[..., s] for s in g), o)
            for g, o in zip(self.groups, self.group_orders)
        ]

    def subset_of(self, indices) -> np.ndarray:
        ids = self.point_ids(indices)
        k = np.zeros(np.shape(ids[0]), dtype=int)
        for lab, p in zip(self.labels, ids):
            k ^= lab[p]
        return k

    def encode(self, subset, bits) -> np.ndarray:
        """Symbol indices (..., K) for a subset index and ``bits_per_codeword`` bits."""
        bits = np.asarray(bits, dtype=np.int64)
        subset = np.asarray(subset)
        if bits.shape[-1] != self.bits_per_codeword:
            raise ValueError(f"expected {self.bits_per_codeword} bits, got {bits.shape[-1]}")
        out = np.zeros(bits.shape[:-1] + (self.code.num_symbols,), dtype=int)
        pos, cls = 0, subset.copy()
        for g, syms in enumerate(self.groups[:-1]):
            for s in syms:
                m = self.code.alphabets[s].bits_per_symbol
                out[..., s] = bits_to_indices(bits[..., pos : pos + m], m)[..., 0]
                pos += m
            cls = cls ^ self.labels[g][self.point_ids(out)[g]]
        rest = bits[..., pos:]
        rank = rest @ (1 << np.arange(rest.shape[-1] - 1, -1, -1)) if rest.shape[-1] else np.zeros_like(cls)
        pid = self.members[-1][cls, rank]
        last = self.groups[-1]
        for s, v in zip(last, np.unravel_index(pid, self.group_orders[-1])):
            out[..., s] = v
        return out

    def decode(self, indices) -> tuple[np.ndarray, np.ndarray]:
        """Inverse of :meth:`encode`: (subset, bits)."""
        indices = np.asarray(indices)
        parts = []
        for syms in self.groups[:-1]:
            for s in syms:
                parts.append(indices_to_bits(indices[..., s : s + 1], self.code.alphabets[s].bits_per_symbol))
        ids = self.point_ids(indices)
        width = self.bits_per_codeword - sum(p.shape[-1] for p in parts)
        rank = self._rank_in_class[-1][ids[-1]]
        parts.append((rank[..., None] >> np.arange(width - 1, -1, -1)) & 1)
        return self.subset_of(indices), np.concatenate(parts, axis=-1)


def lift(code: LinearCode, groups, trees: Sequence[PartitionTree], level: int) -> SubsetLift:
    labels = tuple(t.labels(level) for t in trees)
    return SubsetLift(code, tuple(tuple(g) for g in groups), labels, 2**level)


# ---------------------------------------------------------------------------
# distance sets: Loewner-minimal distance matrices between subsets


def _hermitian_key(A: np.ndarray, decimals: int = 9) -> np.ndarray:
    iu = np.triu_indices(A.shape[-1])
    return np.round(np.concatenate([A[..., iu[0], iu[1]].real, A[..., iu[0], iu[1]].imag], -1), decimals)


def loewner_minimal(As: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Drop every matrix that dominates another (A - B PSD) in the stack."""
    As = np.asarray(As)
    if len(As) == 0:
        return As
    _, first = np.unique(_hermitian_key(As), axis=0, return_index=True)
    As = As[np.sort(first)]
    tr = np.einsum("nii->n", As).real
    As = As[np.argsort(tr, kind="stable")]
    keep = []
    for i, A in enumerate(As):
        if keep:
            kept = As[keep]
            w = np.linalg.eigvalsh(A[None] - kept)[:, 0]
            if np.any(w >= -tol * max(1.0, tr.max())):
                continue
        keep.append(i)
    return As[keep]


def _group_distance_sets(mats_a, labels_a, mats_b, labels_b, C):
    """Per class pair (c, c'): (Loewner-minimal nonzero A, whether A = 0 occurs)."""
    sets = {}
    for c in range(C):
        Ma = mats_a[labels_a == c]
        for c2 in range(C):
            D = Ma[:, None] - mats_b[labels_b == c2][None]
            A = np.einsum("abri,abrj->abij", D.conj(), D).reshape(-1, D.shape[-1], D.shape[-1])
            zero = np.einsum("nii->n", A).real <= RANK_TOL
            sets[c, c2] = (loewner_minimal(A[~zero]), bool(zero.any()))
    return sets


def _minkowski(S1, S2):
    return (S1[:, None] + S2[None]).reshape(-1, *S1.shape[1:])


def _combine(parts, nt):
    """Loewner-minimal sums over groups, excluding the all-zero difference."""
    out = []
    for zeros in product((False, True), repeat=len(parts)):
        if all(zeros) or any(z and not has_zero for z, (_, has_zero) in zip(zeros, parts)):
            continue
        S = np.zeros((1, nt, nt), dtype=complex)
        for z, (nz, _) in zip(zeros, parts):
            if not z:
                S = loewner_minimal(_minkowski(S, nz))
        out.append(S)
    return loewner_minimal(np.concatenate(out)) if out else np.zeros((0, nt, nt), dtype=complex)


class DistanceSets:
    """Loewner-minimal distance matrices between codeword subsets of the trellis families.

    ``between[(f, k, f2, k2)]`` covers distinct codewords of subset k in family f
    and subset k2 in family f2.  Relies on group additivity, which is checked.
    """

    def __init__(self, lifts: Sequence[SubsetLift]):
        self.lifts = tuple(lifts)
        for lf in self.lifts:
            if not check_distance_additive(lf.code, lf.groups):
                raise DesignConstraintError(f"groups of {lf.code.name} are not distance-additive")
        mats = [[group_matrices(lf.code, g) for g in lf.groups] for lf in self.lifts]
        G = len(self.lifts[0].groups)
        C = self.lifts[0].num_classes
        nt = self.lifts[0].code.num_tx
        F = range(len(self.lifts))
        per_group = {
            (f, f2, g): _group_distance_sets(
                mats[f][g], self.lifts[f].labels[g], mats[f2][g], self.lifts[f2].labels[g], C
            )
            for f, f2 in product(F, F)
            for g in range(G)
        }
        self.between = {}
        for f, f2 in product(F, F):
            for k, k2 in product(range(C), repeat=2):
                acc = []
                for free in product(range(C), repeat=G - 1):
                    for free2 in product(range(C), repeat=G - 1):
                        cls = (*free, k ^ _xor(free))
                        cls2 = (*free2, k2 ^ _xor(free2))
                        parts = [per_group[f, f2, g][cls[g], cls2[g]] for g in range(G)]
                        acc.append(_combine(parts, nt))
                self.between[f, k, f2, k2] = loewner_minimal(np.concatenate(acc))

    def min_cgd(self, f, k, f2, k2) -> float:
        S = self.between[f, k, f2, k2]
        return float(np.clip(np.linalg.det(S).real, 0, None).min()) if len(S) else math.inf


def _xor(values) -> int:
    out = 0
    for v in values:
        out ^= v
    return out


# ---------------------------------------------------------------------------
# trellis


@dataclass(frozen=True)
class Trellis:
    """Trellis with parallel transitions.

    From state s, input i leads to ``next_state[s, i]`` and emits a codeword of
    subset ``subset[s, i]`` of family ``state_family[s]``.
    """

    lifts: tuple[SubsetLift, ...]
    state_family: tuple[int, ...]
    next_state: np.ndarray
    subset: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.state_family)

    @property
    def num_inputs(self) -> int:
        return self.next_state.shape[1]

    @property
    def input_bits(self) -> int:
        return int(math.log2(self.num_inputs))

    @property
    def bits_per_step(self) -> int:
        return self.input_bits + self.lifts[0].bits_per_codeword

    @property
    def is_parallel(self) -> bool:
        return any(lf.bits_per_codeword > 0 for lf in self.lifts)

    def check_structure(self) -> None:
        S, I = self.next_state.shape
        if self.subset.shape != (S, I) or len(self.state_family) != S:
            raise DesignConstraintError("trellis tables have inconsistent shapes")
        if I & (I - 1):
            raise DesignConstraintError("out-degree must be a power of two")
        bpc = {lf.bits_per_codeword for lf in self.lifts}
        if len(bpc) != 1:
            raise DesignConstraintError("families carry different numbers of bits per codeword")
        for s in range(S):
            if len(set(self.subset[s])) != I:
                raise DesignConstraintError(f"state {s} reuses a subset on two branches")

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "qostf-trellis",
                "version": FORMAT_VERSION,
                "state_family": list(self.state_family),
                "next_state": self.next_state.tolist(),
                "subset": self.subset.tolist(),
                "families": [
                    {
                        "code": lf.code.name,
                        "rotations": [a.rotation for a in lf.code.alphabets],
                        "order": lf.code.alphabets[0].order,
                        "groups": [list(g) for g in lf.groups],
                        "num_classes": lf.num_classes,
                        "classes": [[lf.members[g][c].tolist() for c in range(lf.num_classes)] for g in range(len(lf.groups))],
                    }
                    for lf in self.lifts
                ],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "Trellis":
        from .codebook import qostftc8_matrix

        data = json.loads(text)
        if data.get("format") != "qostf-trellis" or data.get("version") != FORMAT_VERSION:
            raise ValueError("not a version-1 trellis description")
        lifts = []
        for fam in data["families"]:
            alph = tuple(Constellation(fam["order"], r) for r in fam["rotations"])
            code = LinearCode(fam["code"], qostftc8_matrix, alph, tuple(f"x{i + 1}" for i in range(len(alph))))
            labels = []
            for classes in fam["classes"]:
                lab = np.empty(sum(len(c) for c in classes), dtype=int)
                for c, members in enumerate(classes):
                    lab[members] = c
                labels.append(lab)
            lifts.append(SubsetLift(code, tuple(tuple(g) for g in fam["groups"]), tuple(labels), fam["num_classes"]))
        return cls(
            tuple(lifts),
            tuple(data["state_family"]),
            np.array(data["next_state"]),
            np.array(data["subset"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Trellis":
        with open(path) as fh:
            return cls.from_json(fh.read())


def single_state_trellis(lift_: SubsetLift) -> Trellis:
    """Degenerate trellis: one state, every subset on a self-loop."""
    C = lift_.num_subsets
    return Trellis((lift_,), (0,), np.zeros((1, C), dtype=int), np.arange(C)[None, :])


# Offsets chosen by the design search in scripts/design_search.py; state s
# sends input i to state NEXT[i] on subset i XOR OFFSETS[s].
DEFAULT_NEXT = (0, 2, 1, 3)
DEFAULT_OFFSETS = (0, 1, 0, 3)


def build_trellis(
    lift_a: SubsetLift,
    lift_b: SubsetLift,
    *,
    next_of_input: Sequence[int] = DEFAULT_NEXT,
    offsets: Sequence[int] = DEFAULT_OFFSETS,
    distances: DistanceSets | None = None,
    strict: bool = True,
) -> Trellis:
    """Four states: 0 and 1 emit family A codewords, 2 and 3 family B codewords.

    Input i moves every state to ``next_of_input[i]`` through subset
    ``i XOR offsets[s]``.  With ``strict`` a violation of the separation rule
    raises :class:`DesignConstraintError`.
    """
    if lift_a.num_subsets < 2 or lift_b.num_subsets < 2:
        raise DesignConstraintError("each family needs at least two subsets")
    if lift_a.num_subsets != 4 or lift_b.num_subsets != 4:
        raise DesignConstraintError("the four-state trellis needs four subsets per family")
    nxt = np.tile(np.asarray(next_of_input), (4, 1))
    sub = np.arange(4)[None, :] ^ np.asarray(offsets)[:, None]
    trellis = Trellis((lift_a, lift_b), (0, 0, 1, 1), nxt, sub)
    trellis.check_structure()
    if strict:
        bad = separation_violations(trellis, distances)
        if bad:
            raise DesignConstraintError(f"zero-CGD branch pairs: {bad[:4]}")
    return trellis


def branch_pairs(trellis: Trellis):
    """Branch pairs that leave or enter a common state, as ((s, i), (s2, i2)) tuples."""
    S, I = trellis.next_state.shape
    edges = [(s, i) for s in range(S) for i in range(I)]
    out = []
    for a, (s, i) in enumerate(edges):
        for s2, i2 in edges[a + 1 :]:
            if s == s2 or trellis.next_state[s, i] == trellis.next_state[s2, i2]:
                out.append(((s, i), (s2, i2)))
    return out


def separation_violations(trellis: Trellis, distances: DistanceSets | None = None) -> list:
    """Branch pairs at a common state whose subsets hold a zero-CGD codeword pair."""
    distances = distances or DistanceSets(trellis.lifts)
    bad = []
    for (s, i), (s2, i2) in branch_pairs(trellis):
        f, k = trellis.state_family[s], int(trellis.subset[s, i])
        f2, k2 = trellis.state_family[s2], int(trellis.subset[s2, i2])
        if distances.min_cgd(f, k, f2, k2) <= 0 or (f, k) == (f2, k2):
            bad.append(((s, i), (s2, i2)))
    return bad


# ---------------------------------------------------------------------------
# error-event search


@dataclass(frozen=True)
class PathMetrics:
    min_delta_h: int  # over error events whose paths take different branches
    min_product: float  # min CGD*MPD over those events
    parallel_product: float  # min CGD*MPD among parallel transitions (one-step events)
    has_parallel: bool
    max_len: int

    @property
    def min_delta_h_any(self) -> int:
        return 1 if self.has_parallel else self.min_delta_h


def _event_step_sets(trellis, distances):
    S = trellis.num_states
    out = {}
    for s, s2 in product(range(S), repeat=2):
        for i, i2 in product(range(trellis.num_inputs), repeat=2):
            if (s, i) == (s2, i2):
                continue
            f, k = trellis.state_family[s], int(trellis.subset[s, i])
            f2, k2 = trellis.state_family[s2], int(trellis.subset[s2, i2])
            out[s, i, s2, i2] = distances.between[f, k, f2, k2]
    return out


def min_path_metrics(trellis: Trellis, max_len: int = 8, distances: DistanceSets | None = None) -> PathMetrics:
    """Exhaustive branch-and-bound search over error events of at most ``max_len`` steps.

    An error event starts with two different branches out of one state and ends
    the first time both paths share a state again.  Accumulated A matrices only
    grow in the Loewner order, so det(sum A) * prod(1 + tr A) is a lower bound
    for every extension and labels dominated at the same state pair are dropped.
    """
    distances = distances or DistanceSets(trellis.lifts)
    steps = _event_step_sets(trellis, distances)
    S, I = trellis.next_state.shape
    nt = trellis.lifts[0].code.num_tx

    parallel = math.inf
    if trellis.is_parallel:
        for s in range(S):
            for i in range(I):
                f, k = trellis.state_family[s], int(trellis.subset[s, i])
                Aset = distances.between[f, k, f, k]
                if len(Aset):
                    vals = np.linalg.det(Aset).real * (1 + np.einsum("nii->n", Aset).real)
                    parallel = min(parallel, float(np.clip(vals, 0, None).min()))

    # minimum event length by breadth-first search over state pairs
    frontier = {
        (int(trellis.next_state[s, i]), int(trellis.next_state[s, i2]))
        for s in range(S)
        for i in range(I)
        for i2 in range(I)
        if i != i2
    }
    min_dh = math.inf
    for length in range(1, max_len + 1):
        if any(a == b for a, b in frontier):
            min_dh = length
            break
        frontier = {
            (int(trellis.next_state[a, i]), int(trellis.next_state[b, i2]))
            for a, b in frontier
            for i in range(I)
            for i2 in range(I)
        }

    # best-first search for the minimum accumulated product
    counter = 0
    heap = []
    labels: dict = {}

    def push(a, b, A, mpd, length):
        nonlocal counter
        bound = max(float(np.linalg.det(A).real), 0.0) * mpd
        key = (a, b) if a != b else None
        if key is not None:
            seen = labels.setdefault(key, [])
            for A0, m0, l0 in seen:
                if l0 <= length and m0 <= mpd and np.linalg.eigvalsh(A - A0)[0] >= -1e-9:
                    return
            seen.append((A, mpd, length))
        counter += 1
        heapq.heappush(heap, (bound, counter, a, b, A, mpd, length))

    zero = np.zeros((nt, nt), dtype=complex)
    for s in range(S):
        for i in range(I):
            for i2 in range(I):
                if i == i2:
                    continue
                for A in steps[s, i, s, i2]:
                    push(
                        int(trellis.next_state[s, i]),
                        int(trellis.next_state[s, i2]),
                        zero + A,
                        1 + float(np.trace(A).real),
                        1,
                    )
    best = math.inf
    while heap:
        bound, _, a, b, A, mpd, length = heapq.heappop(heap)
        if bound >= best:
            break
        if a == b:
            best = bound
            break
        if length == max_len:
            continue
        for i in range(I):
            for i2 in range(I):
                for Astep in steps[a, i, b, i2]:
                    push(
                        int(trellis.next_state[a, i]),
                        int(trellis.next_state[b, i2]),
                        A + Astep,
                        mpd * (1 + float(np.trace(Astep).real)),
                        length + 1,
                    )
    return PathMetrics(
        min_delta_h=int(min_dh) if min_dh != math.inf else 0,
        min_product=best,
        parallel_product=parallel,
        has_parallel=trellis.is_parallel,
        max_len=max_len,
    )


# ---------------------------------------------------------------------------
# end-to-end design

DEFAULT_GROUPS = ((0, 4, 3, 7), (1, 5, 2, 6))


def design_lifts(levels: int = 2, full_rank: bool = False) -> tuple[SubsetLift, SubsetLift]:
    """Partition both QPSK families group by group and lift to codeword subsets.

    ``full_rank`` restricts splits to masks that keep every cross-subset pair at
    full rank (see :func:`full_rank_masks`).
    """
    from .constellation import mpsk

    lifts = []
    for code in expand_constellation(mpsk(4)):
        trees = []
        for g in DEFAULT_GROUPS:
            mats = group_matrices(code, g)
            allowed = full_rank_masks(mats) if full_rank else None
            trees.append(partition(mats, levels, allowed=allowed))
        lifts.append(lift(code, DEFAULT_GROUPS, trees, levels))
    return lifts[0], lifts[1]


def design_trellis(full_rank: bool = False, strict: bool = False, **kwargs) -> Trellis:
    a, b = design_lifts(2, full_rank)
    return build_trellis(a, b, strict=strict, **kwargs)
