import warnings

import numpy as np
import pytest

from qostf.channel import PowerDelayProfile, frequency_response, noiseless_output, sample_taps
from qostf.codebook import gather, qostfbc4_code, qostftc8
from qostf.constellation import bits_to_indices
from qostf.transceiver import (
    FrameConfig,
    FrameError,
    block_metric,
    encode_frame,
    exhaustive_decode_block,
    make_scheme,
    pairwise_decode_block,
    viterbi_decode,
)

rng = np.random.default_rng(11)
PDP = PowerDelayProfile.uniform(4)


def random_block(code, Mr, N0, placement_rows=None):
    """One codeword through a random channel; returns (indices, y (rows, Mr), H_rows)."""
    idx = rng.integers(0, 4, code.num_symbols)
    H_rows = rng.standard_normal((code.rows, code.num_tx, Mr)) + 1j * rng.standard_normal(
        (code.rows, code.num_tx, Mr)
    )
    if placement_rows is not None:  # rows sharing a label share a channel
        H_rows = H_rows[placement_rows]
    y = np.einsum("rp,rpq->rq", code.matrices(idx), H_rows)
    y = y + np.sqrt(N0 / 2) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return idx, y, H_rows


TF_ROWS = np.array([0, 0, 0, 0, 4, 4, 4, 4])


def test_frame_config_validation():
    with pytest.raises(FrameError):
        FrameConfig(scheme="nope")
    with pytest.raises(FrameError):
        FrameConfig(Mr=0)
    assert FrameConfig(scheme="qostftc-4state").mode == "trellis"
    assert FrameConfig(scheme="qostfbc-2tx").Mt == 2


def test_steps_per_frame():
    for scheme in ("qostfbc-4tx", "qostftc-4state"):
        sc = make_scheme(FrameConfig(scheme=scheme))
        assert sc.num_blocks == 32
        assert sc.bits_per_block == 16
    assert make_scheme(FrameConfig(scheme="qostfbc-2tx")).bits_per_frame == 512


def test_encode_all_zero_bits_is_deterministic():
    cfg = FrameConfig(scheme="qostftc-4state")
    bits = np.zeros(512, dtype=int)
    g1, s1 = encode_frame(bits, cfg)
    g2, s2 = encode_frame(bits, cfg)
    assert np.array_equal(g1.data, g2.data) and s1 == s2 == 0


def test_block_mode_maps_bits_to_codeword_at_block_zero():
    cfg = FrameConfig(scheme="qostfbc-4tx")
    sc = make_scheme(cfg)
    bits = rng.integers(0, 2, 512)
    grid, _ = encode_frame(bits, cfg)
    code = sc.codes[0]
    sym = code.symbols(bits_to_indices(bits[:16], 2))
    expected = qostftc8(*sym).matrix * sc.scale
    got = gather(grid.data, sc.placement, 1)[0]
    assert np.allclose(got, expected)
    assert sc.scale == pytest.approx(1 / np.sqrt(2))


def test_bit_length_mismatch():
    with pytest.raises(FrameError):
        encode_frame(np.zeros(100, dtype=int), FrameConfig())


def test_trellis_needs_decoupling_placement():
    with pytest.raises(FrameError):
        make_scheme(FrameConfig(scheme="qostftc-4state", placement="frequency", T=1))


def test_block_metric_properties():
    code = qostfbc4_code(4)
    idx, y, H = random_block(code, 2, 0.0, TF_ROWS)
    C = code.matrices(idx)
    assert block_metric(y, H, C) == pytest.approx(0, abs=1e-20)
    other = code.matrices((idx + 1) % 4)
    assert block_metric(y, H, other) > 0
    single = block_metric(y[:, :1], H[..., :1], other) + block_metric(y[:, 1:], H[..., 1:], other)
    assert block_metric(y, H, other) == pytest.approx(single)


def test_pairwise_decode_noiseless_and_consistent():
    code = qostfbc4_code(4)
    idx, y, H = random_block(code, 1, 0.0, TF_ROWS)
    best, metric = pairwise_decode_block(y, H, code)
    assert np.array_equal(best, idx)
    assert metric == pytest.approx(0, abs=1e-9)
    idx, y, H = random_block(code, 2, 0.5, TF_ROWS)
    best, metric = pairwise_decode_block(y, H, code)
    assert metric == pytest.approx(block_metric(y, H, code.matrices(best)))


def test_pairwise_matches_exhaustive_on_reduced_family():
    code = qostfbc4_code(4)
    allowed = [np.arange(4) if k in (0, 3, 4, 7) else np.array([0]) for k in range(8)]
    for _ in range(40):
        _, y, H = random_block(code, 1, 1.0, TF_ROWS)
        a, ma = pairwise_decode_block(y, H, code, allowed=allowed)
        b, mb = exhaustive_decode_block(y, H, code, allowed=allowed)
        assert np.array_equal(a, b)
        assert ma == pytest.approx(mb)


def test_pairwise_falls_back_when_groups_couple():
    code = qostfbc4_code(4)
    allowed = [np.arange(4) if k in (0, 4) else np.array([1]) for k in range(8)]
    _, y, H = random_block(code, 1, 0.3)  # every row its own channel: groups couple
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        a, ma = pairwise_decode_block(y, H, code, groups=[[0, 3, 4, 7], [1, 2, 5, 6]], allowed=allowed)
    assert any("exhaustive" in str(x.message) for x in w)
    b, mb = exhaustive_decode_block(y, H, code, allowed=allowed)
    assert np.array_equal(a, b)


def _frame(cfg, F=4, N0=0.0):
    sc = make_scheme(cfg)
    bits = rng.integers(0, 2, (F, sc.bits_per_frame))
    grid, _ = sc.encode(bits)
    taps = sample_taps(PDP, cfg.Mt, cfg.Mr, rng, F)
    cfr = frequency_response(taps, cfg.N)
    y = noiseless_output(grid, cfr)
    y = y + np.sqrt(N0 / 2) * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return sc, bits, y, cfr


@pytest.mark.parametrize("scheme", ["qostfbc-2tx", "qostfbc-4tx", "qostftc-4state"])
@pytest.mark.parametrize("Mr", [1, 2])
def test_noiseless_frames_decode(scheme, Mr):
    sc, bits, y, cfr = _frame(FrameConfig(scheme=scheme, Mr=Mr))
    assert np.array_equal(sc.decode_bits(y, cfr), bits)


def test_decoding_is_deterministic():
    sc, bits, y, cfr = _frame(FrameConfig(scheme="qostftc-4state"), N0=0.3)
    assert np.array_equal(sc.decode_bits(y, cfr), sc.decode_bits(y, cfr))


def test_viterbi_wrapper_returns_decoded_frame():
    cfg = FrameConfig(scheme="qostftc-4state", Mr=2)
    sc, bits, y, cfr = _frame(cfg, F=1)
    out = viterbi_decode(y[0], cfr[0], sc.trellis, cfg)
    assert np.array_equal(out.bits, bits[0])
    assert out.path_metric == pytest.approx(0, abs=1e-9)
    assert out.states.shape == (sc.num_blocks + 1,)
