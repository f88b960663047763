"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

The quantitative FER criteria (6-8) run full desk-scale sweeps with the
100-error stop rule and take a while on one core; deselect them with
``-m "not slow"`` for a quick check.
"""

import itertools
import math

import numpy as np
import pytest
import scipy.fft

from qostf.channel import PowerDelayProfile, frequency_response, noiseless_output, sample_taps
from qostf.codebook import gather, qostbc4, qostfbc4_code
from qostf.harness import (
    ExperimentConfig,
    FerCurve,
    compare_curves,
    diversity_slope,
    run_sweep,
    simulate_point,
    write_csv,
)
from qostf.metrics import RANK_TOL
from qostf.partition import DistanceSets, min_path_metrics, separation_violations
from qostf.transceiver import (
    FrameConfig,
    block_channels,
    exhaustive_decode_block,
    make_scheme,
    pairwise_decode_block,
    viterbi_decode,
)

SEED = 2026


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# 1-5: structural properties


def test_c1_quasi_orthogonal_gram(report):
    rng = np.random.default_rng(1)
    off = np.ones((4, 4), bool)
    off[np.diag_indices(4)] = False
    for i, j in [(0, 3), (3, 0), (1, 2), (2, 1)]:
        off[i, j] = False
    worst = max(np.abs(qostbc4(*crandn(rng, 4)).gram()[off]).max() for _ in range(1000))
    assert report(1, worst <= 1e-12, f"max off-pattern |Gram| over 1000 tuples = {worst:.2e} (tol 1e-12)")


def test_c2_frequency_response_oracle(report):
    rng = np.random.default_rng(2)
    err = parseval = 0.0
    for N in (16, 64):
        for _ in range(200):
            L = int(rng.integers(1, 9))
            taps = crandn(rng, L)
            H = frequency_response(taps, N)
            padded = np.zeros(N, complex)
            padded[:L] = taps
            err = max(err, np.abs(H - scipy.fft.fft(padded)).max())
            parseval = max(parseval, abs(np.mean(np.abs(H) ** 2) - np.sum(np.abs(taps) ** 2)))
    ok = err <= 1e-12 and parseval <= 1e-12
    assert report(2, ok, f"max |H - FFT| = {err:.2e}, max Parseval error = {parseval:.2e} (tol 1e-12)")


def _zero_cgd(D):
    """Rank deficiency of D^H D, with the package's relative singular-value tolerance."""
    s = np.linalg.svd(D, compute_uv=False)
    return s[..., -1] <= RANK_TOL * s[..., 0]


def _pairs_differing_in_at_most_two(code):
    # the difference matrix is linear in the symbol difference, so fixing the shared
    # symbols at point 0 enumerates every pair that differs in <= 2 positions
    K, q = code.num_symbols, 4
    a, b = [], []
    for r in (1, 2):
        for pos in itertools.combinations(range(K), r):
            for pa in itertools.product(range(q), repeat=r):
                for pb in itertools.product(range(q), repeat=r):
                    if all(x != y for x, y in zip(pa, pb)):
                        u, v = np.zeros(K, int), np.zeros(K, int)
                        u[list(pos)], v[list(pos)] = pa, pb
                        a.append(u)
                        b.append(v)
    return np.array(a), np.array(b)


def test_c3_full_diversity(report):
    code = qostfbc4_code(4, rotation=np.pi / 4)
    a, b = _pairs_differing_in_at_most_two(code)
    near_zero = int(_zero_cgd(code.matrices(a) - code.matrices(b)).sum())
    rng = np.random.default_rng(3)
    x = rng.integers(0, 4, (100_000, 8))
    y = rng.integers(0, 4, (100_000, 8))
    distinct = np.any(x != y, axis=1)
    random_zero = int(_zero_cgd(code.matrices(x[distinct]) - code.matrices(y[distinct])).sum())
    plain = qostfbc4_code(4, rotation=0.0)
    x0 = rng.integers(0, 4, (20_000, 8))
    y0 = rng.integers(0, 4, (20_000, 8))
    d0 = np.any(x0 != y0, axis=1)
    unrotated_zero = int(_zero_cgd(plain.matrices(x0[d0]) - plain.matrices(y0[d0])).sum())
    ok = near_zero == 0 and random_zero == 0 and unrotated_zero > 0
    detail = (
        f"pi/4: {near_zero} zero-CGD pairs among {len(a)} pairs differing in <=2 positions, "
        f"{random_zero} among {int(distinct.sum())} random pairs; phi=0: {unrotated_zero} zero-CGD "
        f"pairs found among {int(d0.sum())} random pairs"
    )
    assert report(3, ok, detail)


def _viterbi_oracle(sc, received, cfr):
    """Exhaustive search over every trellis path and every codeword of each branch subset."""
    tr = sc.trellis
    y = gather(received, sc.placement)  # (B, R, Mr)
    H = block_channels(cfr, sc.placement)  # (B, R, Mt, Mr)
    all_idx = np.stack(np.unravel_index(np.arange(4**8), (4,) * 8), -1)
    best_per = []  # best_per[z][f][k] = (metric, matrix)
    for z in range(sc.num_blocks):
        per_family = []
        for f, lf in enumerate(tr.lifts):
            C = lf.code.matrices(all_idx) * sc.scale
            out = np.einsum("crp,rpq->crq", C, H[z])
            met = np.sum(np.abs(y[z] - out) ** 2, axis=(-2, -1))
            sub = lf.subset_of(all_idx)
            table = {}
            for k in range(4):
                sel = np.flatnonzero(sub == k)
                j = sel[met[sel].argmin()]
                table[k] = (met[j], C[j])
            per_family.append(table)
        best_per.append(per_family)
    best = (math.inf, None)
    for inputs in itertools.product(range(tr.num_inputs), repeat=sc.num_blocks):
        s, total, mats = 0, 0.0, []
        for z, i in enumerate(inputs):
            m, C = best_per[z][tr.state_family[s]][int(tr.subset[s, i])]
            total += m
            mats.append(C)
            s = int(tr.next_state[s, i])
        if total < best[0]:
            best = (total, mats)
    return best


def test_c4_decoder_exactness(report):
    rng = np.random.default_rng(4)
    code = qostfbc4_code(4)
    allowed = [np.arange(4) if k in (0, 3, 4, 7) else np.array([int(rng.integers(4))]) for k in range(8)]
    rows = np.array([0, 0, 0, 0, 1, 1, 1, 1])  # each half of the codeword sees one channel
    mismatches = 0
    for n in range(1000):
        Mr = 1 + n % 2
        H = crandn(rng, 2, 4, Mr)[rows]
        idx = np.array([int(rng.choice(a)) for a in allowed])
        y = np.einsum("rp,rpq->rq", code.matrices(idx), H) + crandn(rng, 8, Mr) * math.sqrt(0.5)
        p, pm = pairwise_decode_block(y, H, code, allowed=allowed)
        e, em = exhaustive_decode_block(y, H, code, allowed=allowed)
        mismatches += (not np.array_equal(p, e)) or not math.isclose(pm, em, rel_tol=1e-9, abs_tol=1e-12)

    viterbi_bad = 0
    for n in range(8):
        cfg = FrameConfig(N=4, T=4, Mr=1 + n % 2, scheme="qostftc-4state")
        sc = make_scheme(cfg)
        bits = rng.integers(0, 2, (1, sc.bits_per_frame))
        grid, _ = sc.encode(bits)
        cfr = frequency_response(sample_taps(PowerDelayProfile.uniform(4), 4, cfg.Mr, rng, 1), cfg.N)
        rx = noiseless_output(grid, cfr) + crandn(rng, 1, cfg.N, cfg.Mr, cfg.T) * math.sqrt(0.25)
        got = viterbi_decode(rx[0], cfr[0], sc.trellis, cfg)
        want_metric, want_mats = _viterbi_oracle(sc, rx[0], cfr[0])
        regrid, _ = sc.encode(got.bits[None])
        got_mats = gather(regrid, sc.placement)[0]
        same = math.isclose(got.path_metric, want_metric, rel_tol=1e-9, abs_tol=1e-12) and np.allclose(
            got_mats, np.array(want_mats)
        )
        viterbi_bad += not same

    noisy_frames = 0
    for scheme in ("qostfbc-2tx", "qostfbc-4tx", "qostftc-4state"):
        for Mr in (1, 2):
            cfg = ExperimentConfig(scheme=scheme, Mr=Mr, min_frames=100, max_frames=100, seed=SEED)
            p = simulate_point(cfg, make_scheme(cfg.frame_config), None)
            noisy_frames += p.errors
    ok = mismatches == 0 and viterbi_bad == 0 and noisy_frames == 0
    detail = (
        f"pairwise vs exhaustive mismatches {mismatches}/1000 blocks; viterbi vs exhaustive path search "
        f"mismatches {viterbi_bad}/8 toy frames (Z=2); noiseless frame errors {noisy_frames}/600"
    )
    assert report(4, ok, detail)


def test_c5_trellis_validity(report):
    from qostf.transceiver import default_trellis

    tr = default_trellis()
    dist = DistanceSets(tr.lifts)
    bad = separation_violations(tr, dist)
    pm = min_path_metrics(tr, 8, dist)
    ok = not bad and pm.min_delta_h >= 2
    detail = (
        f"{len(bad)} same-state branch pairs with a zero-CGD codeword pair; min delta_H = {pm.min_delta_h} "
        f"(events up to length 8), min CGD*MPD = {pm.min_product:.4g}, parallel-transition CGD*MPD = "
        f"{pm.parallel_product:.4g}"
    )
    assert report(5, ok, detail)


# ---------------------------------------------------------------------------
# 6-8: desk-scale FER reproductions

_curves: dict = {}


def curve(scheme, Mr, start, floor):
    """Sweep upward from ``start`` dB in 1 dB steps until FER drops below ``floor``."""
    key = (scheme, Mr)
    if key in _curves:
        return _curves[key]
    cfg = ExperimentConfig(scheme=scheme, Mr=Mr, snr_db=(start,), seed=SEED)
    sc = make_scheme(cfg.frame_config)
    out = FerCurve(label=f"{scheme} Mr={Mr}", config_hash=cfg.digest(), seed=SEED)
    snr = start
    while snr <= start + 20:
        p = simulate_point(cfg, sc, snr)
        out.points.append(p)
        if p.fer < floor:
            break
        snr += 1.0
    _curves[key] = out
    return out


def describe(c):
    return " ".join(f"{p.snr_db:g}:{p.errors}/{p.frames}" for p in c.points)


@pytest.mark.slow
def test_c6_four_vs_two_antennas(report):
    four = curve("qostfbc-4tx", 1, 12.0, 5e-4)
    two = curve("qostfbc-2tx", 1, 14.0, 5e-3)
    gap = compare_curves(four, two, 1e-2)
    slope = diversity_slope(four, (1e-3, 1e-1))
    ok = abs(gap - 4.0) <= 1.5 and slope >= 3.5
    detail = f"gap at FER 1e-2 = {gap:.2f} dB (want 4 +- 1.5); 4-Tx slope = {slope:.2f} (want >= 3.5)"
    assert report(6, ok, detail + f" | 4tx {describe(four)} | 2tx {describe(two)}")


@pytest.mark.slow
def test_c7_trellis_coding_gain(report):
    block = curve("qostfbc-4tx", 1, 12.0, 5e-4)
    trellis = curve("qostftc-4state", 1, 10.0, 5e-4)
    gain = compare_curves(trellis, block, 1e-2)
    ok = abs(gain - 3.6) <= 1.5 and gain >= 2.0
    detail = f"trellis gain at FER 1e-2 = {gain:.2f} dB (want 3.6 +- 1.5, floor 2)"
    assert report(7, ok, detail + f" | trellis {describe(trellis)}")


@pytest.mark.slow
def test_c8_receive_diversity(report):
    b1 = curve("qostfbc-4tx", 1, 12.0, 5e-4)
    b2 = curve("qostfbc-4tx", 2, 6.0, 5e-4)
    t1 = curve("qostftc-4state", 1, 10.0, 5e-4)
    t2 = curve("qostftc-4state", 2, 5.0, 5e-4)
    block_gap = compare_curves(b2, b1, 1e-2)
    trellis_gap = compare_curves(t2, t1, 1e-3)
    slopes = [diversity_slope(c, (1e-3, 1e-1)) for c in (b1, b2, t1, t2)]
    ok = (
        abs(block_gap - 4.6) <= 1.5
        and abs(trellis_gap - 4.0) <= 1.5
        and slopes[1] > slopes[0]
        and slopes[3] > slopes[2]
    )
    detail = (
        f"block Mr=2 gain at 1e-2 = {block_gap:.2f} dB (want 4.6 +- 1.5); trellis Mr=2 gain at 1e-3 = "
        f"{trellis_gap:.2f} dB (want 4 +- 1.5); slopes block {slopes[0]:.2f} -> {slopes[1]:.2f}, "
        f"trellis {slopes[2]:.2f} -> {slopes[3]:.2f}"
    )
    assert report(8, ok, detail + f" | block Mr=2 {describe(b2)} | trellis Mr=2 {describe(t2)}")


def test_c9_bit_identical_rerun(report, tmp_path):
    cfg = ExperimentConfig(scheme="qostftc-4state", Mr=2, snr_db=(6.0, 8.0), seed=SEED)
    a = write_csv(run_sweep(cfg), tmp_path / "a.csv").read_bytes()
    b = write_csv(run_sweep(cfg), tmp_path / "b.csv").read_bytes()
    assert report(9, a == b, f"two runs with seed {SEED}: {len(a)} bytes each, identical = {a == b}")
