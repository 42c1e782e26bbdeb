import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsepat.codec import (
    BinningFunction,
    bits_to_int,
    build_codebook,
    check_crc,
    compose,
    crc_bin,
    int_to_bits,
    split_composite,
)

from conftest import desk_spec, within_se


def test_codebook_size_and_shape():
    spec = desk_spec(n_pilots=3, k_blocks=2)
    book = build_codebook(spec, 2, 1, 0)
    assert len(book) == 8 and book.codewords.shape == (8, 2, 4)


def test_codebook_power():
    spec = desk_spec(k_blocks=4)
    book = build_codebook(spec, 6, 4, 3)
    ok, stats = within_se(np.abs(book.codewords.ravel()) ** 2, 1.0)
    assert ok, stats


def test_codebook_determinism():
    spec = desk_spec(k_blocks=2)
    a, b = build_codebook(spec, 3, 3, 77), build_codebook(spec, 3, 3, 77)
    assert a.codewords.tobytes() == b.codewords.tobytes()
    assert [a.binning(w) for w in range(8)] == [b.binning(w) for w in range(8)]
    assert not np.array_equal(a.codewords, build_codebook(spec, 3, 3, 78).codewords)


def test_codebook_size_guard_and_covariance():
    spec = desk_spec()
    with pytest.raises(ValueError):
        build_codebook(spec, 10, 7, 0)
    with pytest.raises(np.linalg.LinAlgError):
        build_codebook(spec, 1, 0, 0, data_cov=-np.eye(5))


def test_codewords_follow_data_covariance():
    spec = desk_spec(k_blocks=1)
    r = np.diag([0.25, 0.5, 1.0, 1.5, 1.75]).astype(complex)
    book = build_codebook(spec, 12, 0, 4, data_cov=r)
    power = np.mean(np.abs(book.codewords[:, 0]) ** 2, axis=0)
    assert np.allclose(power, np.diag(r).real, rtol=0.05)


def test_no_check_bits():
    assert crc_bin([1, 0, 1], 0, 5).size == 0
    spec = desk_spec()
    book = build_codebook(spec, 3, 0, 1)
    assert all(book.check(i) for i in range(len(book)))


def test_binning_is_a_function():
    mu = BinningFunction.from_seed(5, 4, 9)
    assert [mu(w) for w in range(32)] == [mu(w) for w in range(32)]
    bits = int_to_bits(13, 5)
    assert bits_to_int(crc_bin(bits, 4, 9)) == mu(13)


@pytest.mark.parametrize("crc_bits", [2, 4, 8])
def test_collision_probability(crc_bits):
    draws = 10_000
    collisions = 0
    for seed in range(draws):
        mu = BinningFunction.from_seed(6, crc_bits, seed)
        collisions += mu(5) == mu(42)
    p = 2.0**-crc_bits
    assert abs(collisions / draws - p) <= 3 * math.sqrt(p * (1 - p) / draws)


@given(seed=st.integers(0, 2**32 - 1), w1=st.integers(0, 63), w2=st.integers(0, 63))
def test_binning_is_affine(seed, w1, w2):
    mu = BinningFunction.from_seed(6, 5, seed)
    assert mu(w1 ^ w2) ^ mu(0) == mu(w1) ^ mu(w2)


def test_round_trip_exhaustive():
    info, crc = 3, 2
    seen = set()
    for idx in range(1 << (info + crc)):
        w, u = split_composite(idx, info, crc)
        assert compose(w, u, crc) == idx and 0 <= w < 8 and 0 <= u < 4
        seen.add((w, u))
    assert len(seen) == 32
    with pytest.raises(ValueError):
        split_composite(32, info, crc)


def test_check_and_bit_flip():
    spec = desk_spec()
    book = build_codebook(spec, 3, 4, 12)
    u = book.binning(3)
    assert check_crc(3, u, book.binning)
    for bit in range(4):
        assert not check_crc(3, u ^ (1 << bit), book.binning)
    idx = book.encode(3)
    assert book.split(idx) == (3, u) and book.check(idx)
    with pytest.raises(ValueError):
        book.encode(8)


@given(value=st.integers(0, 2**12 - 1))
def test_bit_conversions(value):
    assert bits_to_int(int_to_bits(value, 12)) == value
