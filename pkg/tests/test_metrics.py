import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qostf.codebook import qostbc4, qostftc8
from qostf.metrics import (
    PairwiseMetrics,
    cgd,
    closed_form_cgd,
    difference_matrix,
    distance_matrix,
    diversity_bound,
    generalized_cgd,
    hamming_distance,
    matrix_rank,
    mpd,
    pair_table,
    pairwise_metrics,
    write_metric_table,
)

rng = np.random.default_rng(7)
QPSK = np.array([1, 1j, -1, -1j])
QPSK_R = QPSK * np.exp(1j * np.pi / 4)


def crandn(*shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_qpsk_word():
    return np.concatenate([rng.choice(QPSK, 4), rng.choice(QPSK_R, 4)])


def test_distance_matrix_of_equal_codewords_is_zero():
    c = qostftc8(*random_qpsk_word())
    assert np.all(distance_matrix(c, c) == 0)


def test_distance_matrix_hermitian_psd():
    for _ in range(50):
        A = distance_matrix(qostftc8(*crandn(8)), qostftc8(*crandn(8)))
        assert np.allclose(A, A.conj().T)
        assert np.linalg.eigvalsh(A).min() >= -1e-12


def test_distance_matrix_symmetric_in_arguments():
    c, e = qostftc8(*crandn(8)), qostftc8(*crandn(8))
    assert np.allclose(distance_matrix(c, e), distance_matrix(e, c))


def test_single_symbol_difference_trace():
    c = crandn(4)
    e = c.copy()
    e[0] = c[0] + 0.7 - 0.2j
    A = distance_matrix(qostbc4(*c), qostbc4(*e))
    assert np.trace(A).real == pytest.approx(4 * abs(c[0] - e[0]) ** 2)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        distance_matrix(np.zeros((8, 4)), np.zeros((4, 4)))


def test_cgd_trivial_values():
    assert cgd([]) == 0
    assert cgd([np.zeros((4, 4))]) == 0
    assert cgd([np.eye(4)]) == pytest.approx(1)


def test_cgd_single_qpsk_symbol_difference():
    # D = (1/2)[Q(d e1); Q(d e1)] gives A = |d|^2/2 I, so det = |d|^8 / 16 = 1 for d = 1 - 1j
    x = random_qpsk_word()
    y = x.copy()
    y[0] = x[0] * 1j
    A = distance_matrix(qostftc8(*x), qostftc8(*y))
    assert cgd([A]) == pytest.approx(abs(x[0] - y[0]) ** 8 / 16)
    assert cgd([A]) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0))
def test_cgd_scale_law(s):
    A = distance_matrix(qostftc8(*crandn(8)), qostftc8(*crandn(8)))
    assert cgd([s**2 * A]) == pytest.approx(s**8 * cgd([A]), rel=1e-8)


def test_cgd_clamps_tiny_negative():
    v = np.array([1, 1, 0, 0], complex)
    A = np.outer(v, v.conj()) - 1e-18 * np.eye(4)
    assert cgd([A]) == 0.0


def test_mpd_values():
    assert mpd([]) == 1
    D = np.zeros((8, 4))
    D[0, 0], D[1, 1], D[2, 2] = 1, 1, 1
    assert mpd([D]) == pytest.approx(4)
    D1, D2 = crandn(8, 4), crandn(8, 4)
    expected = (1 + np.sum(np.abs(D1) ** 2)) * (1 + np.sum(np.abs(D2) ** 2))
    assert mpd([D1, D2]) == pytest.approx(expected)


def test_closed_form_cgd_values():
    x = random_qpsk_word()
    assert closed_form_cgd(x, x) == 0
    y = x.copy()
    d = 0.3 - 0.4j
    y[0] += d
    assert closed_form_cgd(x, y) == pytest.approx(abs(d) ** 2 / 4)
    with pytest.raises(ValueError):
        closed_form_cgd(x[:4], y[:4])


def test_hamming_distance():
    seq = [qostftc8(*random_qpsk_word()) for _ in range(8)]
    assert hamming_distance(seq, seq) == 0
    other = [qostftc8(*(w.symbols * 1j)) for w in seq]
    assert hamming_distance(seq, other) == 8
    one = list(seq)
    one[3] = other[3]
    assert hamming_distance(seq, one) == 1
    with pytest.raises(ValueError):
        hamming_distance(seq, seq[:2])


@pytest.mark.parametrize("dh, L, Mr, expected", [(4, 4, 1, 16), (4, 4, 2, 32), (0, 4, 1, 0), (2, 4, 1, 8)])
def test_diversity_bound(dh, L, Mr, expected):
    assert diversity_bound(dh, L, Mr) == expected


def test_pairwise_metrics_invariants():
    for _ in range(30):
        a = [qostftc8(*random_qpsk_word()) for _ in range(3)]
        b = [qostftc8(*random_qpsk_word()) if rng.random() < 0.7 else w for w in a]
        m = pairwise_metrics(a, b)
        assert isinstance(m, PairwiseMetrics)
        assert m.cgd >= 0 and m.mpd >= 1 and 0 <= m.delta_h <= 3
        if m.cgd > 0:
            assert m.rank == 4
        assert m.product == pytest.approx(m.cgd * m.mpd)


def test_rank_and_generalized_cgd():
    A = np.diag([2.0, 3.0, 0.0, 0.0])
    assert matrix_rank(A) == 2
    assert generalized_cgd(A) == (2, pytest.approx(6.0))
    assert generalized_cgd(np.zeros((4, 4))) == (0, 0.0)


def test_pair_table_matches_direct_metrics():
    words = [qostftc8(*random_qpsk_word()).matrix for _ in range(12)]
    t = pair_table(np.array(words))
    for i in range(12):
        for j in range(12):
            A = distance_matrix(words[i], words[j])
            assert t["cgd"][i, j] == pytest.approx(cgd([A]), abs=1e-9)
            assert t["mpd"][i, j] == pytest.approx(mpd([difference_matrix(words[i], words[j])]))
            assert t["rank"][i, j] == matrix_rank(A)


def test_metric_table_csv(tmp_path):
    m = PairwiseMetrics(2.0, 3.0, 4, 1, 4)
    path = write_metric_table([("0-1", m)], tmp_path / "m.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["pair_id", "cgd", "mpd", "rank", "product"]
    assert rows[1] == ["0-1", "2.0", "3.0", "4", "6.0"]
