import math
import warnings

import numpy as np
import pytest

from sparsepat.codec import build_codebook
from sparsepat.decode import wmd_decode
from sparsepat.model import complex_normal, draw_block, make_spec, simulate_frame
from sparsepat.support import (
    dasd_decode,
    hypothesis_order,
    pase_detect,
    pase_detect_fixed_support,
    pase_residuals,
    projector_complement,
)

from conftest import desk_spec, noiseless


def pilots(spec, i, taps, noise):
    return math.sqrt(spec.snr_linear * spec.n_block) * spec.pilot_values * (taps @ spec.pilot_dft[i].T) + noise


# --- PASE ------------------------------------------------------------------


def test_noise_free_residuals(rng):
    spec = desk_spec(30.0, n_pilots=3, pilot_values=[1, 1j, -1j])
    for _ in range(100):
        i = int(rng.integers(6))
        res = pase_detect(spec, pilots(spec, i, complex_normal(rng, 2, 0.5), 0))
        assert res.residuals[i] < 1e-12 and res.chosen_index == i
        assert np.all(np.delete(res.residuals, i) > 1e-10)


def test_single_hypothesis_always_chosen(rng):
    spec = make_spec(7, 2, 2, n_pilots=3)
    for _ in range(10):
        assert pase_detect(spec, complex_normal(rng, 3)).chosen_index == 0


def test_projectors(rng):
    spec = desk_spec(n_pilots=4)
    for i in range(spec.n_hypotheses):
        pi = projector_complement(spec, i)
        f = spec.pilot_dft[i]
        textbook = np.eye(4) - f @ np.linalg.inv(f.conj().T @ f) @ f.conj().T
        assert np.max(np.abs(pi @ pi - pi)) < 1e-10
        assert np.max(np.abs(pi - pi.conj().T)) < 1e-10
        assert np.max(np.abs(pi - textbook)) < 1e-10


def test_residuals_match_projector(rng):
    spec = desk_spec(5.0, n_pilots=3)
    y = complex_normal(rng, 3, 4.0)
    z = y * spec.pilot_values.conj() / math.sqrt(spec.snr_linear * 7)
    ref = [np.linalg.norm(projector_complement(spec, i) @ z) ** 2 for i in range(6)]
    assert np.allclose(pase_residuals(spec, y), ref, rtol=1e-12)


def test_warns_when_pilots_equal_sparsity(rng):
    spec = desk_spec(n_pilots=2)
    with pytest.warns(UserWarning):
        pase_detect(spec, complex_normal(rng, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pase_detect(desk_spec(n_pilots=3), complex_normal(rng, 3))


def pase_error_rate(spec, rng, trials):
    truth = rng.integers(6, size=trials)
    taps = complex_normal(rng, (trials, 2), 0.5)
    noise = complex_normal(rng, (trials, 3))
    y = np.empty((trials, 3), complex)
    for i in range(6):
        sel = truth == i
        y[sel] = pilots(spec, i, taps[sel], noise[sel])
    return np.mean(np.argmin(pase_residuals(spec, y), axis=1) != truth)


def test_pase_error_decreases_with_snr():
    rng = np.random.default_rng(31)
    rates = [pase_error_rate(desk_spec(d, n_pilots=3), rng, 10_000) for d in (20.0, 30.0, 40.0)]
    assert rates[0] > rates[1] > rates[2]
    assert rates[2] < 1e-2


def test_fixed_support_single_block_equals_pase(rng):
    spec = desk_spec(10.0, n_pilots=3)
    for _ in range(50):
        y = complex_normal(rng, 3, 10.0)
        assert pase_detect_fixed_support(spec, [y]) == pase_detect(spec, y).chosen_index


def test_fixed_support_noise_free(rng):
    spec = desk_spec(20.0, n_pilots=3)
    ys = pilots(spec, 5, complex_normal(rng, (8, 2), 0.5), 0)
    assert pase_residuals(spec, ys).mean(axis=0)[5] < 1e-12
    assert pase_detect_fixed_support(spec, ys) == 5


def test_fixed_support_error_decreases_with_k():
    rng = np.random.default_rng(32)
    spec = desk_spec(20.0, n_pilots=3)
    trials = 10_000
    wrong = np.zeros(3)
    for _ in range(trials):
        i = int(rng.integers(6))
        ys = pilots(spec, i, complex_normal(rng, (16, 2), 0.5), complex_normal(rng, (16, 3)))
        res = pase_residuals(spec, ys)
        wrong += [np.argmin(res[:k].mean(axis=0)) != i for k in (1, 4, 16)]
    assert wrong[0] > wrong[1] > wrong[2] or (wrong[0] > wrong[1] and wrong[1] == wrong[2] == 0)


# --- DASD ------------------------------------------------------------------


def coded(spec, rng, info_bits=2, crc_bits=4, noise_free=False):
    book = build_codebook(spec, info_bits, crc_bits, int(rng.integers(2**31)))
    message = int(rng.integers(1 << info_bits))
    blocks = [draw_block(spec, rng) for _ in range(spec.k_blocks)]
    if noise_free:
        blocks = [noiseless(b) for b in blocks]
    frame = simulate_frame(spec, blocks, book.codewords[book.encode(message)])
    return book, message, tuple(b.support_index for b in blocks), frame


def test_dasd_single_hypothesis_is_wmd(rng):
    spec = make_spec(7, 3, 3, n_pilots=3, snr_db=0.0)
    for _ in range(20):
        book, message, truth, frame = coded(spec, rng)
        out = dasd_decode(spec, book, frame)
        assert out.n_tried == 1
        assert out.codeword_index == wmd_decode(spec, book, frame, [0]).codeword_index
        assert out.crc_passed == book.check(out.codeword_index)


def test_dasd_true_hypothesis_decodes_noise_free(rng):
    # degenerate prior puts the truth at (0, 0), the first hypothesis tried
    spec = desk_spec(30.0, n_pilots=2, k_blocks=2, support_prior=[1, 0, 0, 0, 0, 0])
    for _ in range(100):
        book, message, truth, frame = coded(spec, rng, crc_bits=6, noise_free=True)
        out = dasd_decode(spec, book, frame, true_hypothesis=truth, true_message=message)
        assert truth == (0, 0) and out.n_tried == 1
        assert out.message == message and out.crc_passed and out.event is None


def test_dasd_stop_rule_and_event_partition():
    spec = desk_spec(10.0, n_pilots=2, k_blocks=2)
    last = tuple(hypothesis_order(spec, 2))[-1]
    events = {"E1": 0, "E2": 0, "E3": 0, None: 0}
    for t in range(300):
        rng = np.random.default_rng([41, t])
        book, message, truth, frame = coded(spec, rng, crc_bits=3)
        out = dasd_decode(spec, book, frame, true_hypothesis=truth, true_message=message)
        # only the final check may pass; earlier ones all failed
        assert all(not passed for _, _, passed in out.checks[:-1])
        assert out.crc_passed or out.stop_hypothesis == last
        assert out.checks[-1][1] == out.codeword_index and out.checks[-1][0] == out.stop_hypothesis
        if out.message == message:
            assert out.event is None
        else:
            labels = [
                out.stop_hypothesis == truth,
                out.stop_hypothesis != truth and out.stop_hypothesis == last,
                out.stop_hypothesis not in (truth, last),
            ]
            assert sum(labels) == 1
            assert out.event == ("E1", "E2", "E3")[labels.index(True)]
        events[out.event] += 1
    assert sum(events.values()) == 300


def test_hypothesis_orders_cover_the_product(rng):
    spec = desk_spec(20.0, n_pilots=3, k_blocks=2)
    lex = list(hypothesis_order(spec, 2))
    assert lex[0] == (0, 0) and lex[-1] == (5, 5) and lex == sorted(lex) and len(lex) == 36
    book, _, _, frame = coded(spec, rng)
    ranked = list(hypothesis_order(spec, 2, frame, by_pase=True))
    assert sorted(ranked) == lex


def test_missed_detection_rate_of_random_decodes():
    rng = np.random.default_rng(51)
    spec = desk_spec()
    trials, crc = 10_000, 8
    passes = 0
    for _ in range(trials):
        book = build_codebook(spec, 2, crc, int(rng.integers(2**31)))
        passes += book.check(int(rng.integers(len(book))))
    p = 2.0**-crc
    assert abs(passes / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)
