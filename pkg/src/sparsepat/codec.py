"""
Gaussian codebooks with random-binning check bits.

A composite message ``(w, u)`` carries ``info_bits`` information bits ``w``
and ``crc_bits`` check bits ``u = mu(w)``; it maps to codeword index
``w * 2**crc_bits + u``. The binning function ``mu`` is a seeded random
affine map over GF(2), ``mu(w) = A w + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ChannelSpec, complex_normal

MAX_CODEBOOK_BITS = 16


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Big-endian bit vector of ``value``."""
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    return ((int(value) >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8).reshape(-1):
        out = (out << 1) | int(b)
    return out


@dataclass(frozen=True, eq=False)
class BinningFunction:
    """Affine map ``w -> A w xor b`` from ``info_bits`` to ``crc_bits`` bits."""

    matrix: np.ndarray
    offset: np.ndarray

    @classmethod
    def from_seed(cls, info_bits: int, crc_bits: int, seed) -> "BinningFunction":
        # separate stream from codeword draws that share the same seed
        rng = np.random.default_rng([0xB1, int(seed)])
        matrix = rng.integers(0, 2, size=(crc_bits, info_bits), dtype=np.uint8)
        offset = rng.integers(0, 2, size=crc_bits, dtype=np.uint8)
        return cls(matrix, offset)

    @property
    def info_bits(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def crc_bits(self) -> int:
        return int(self.matrix.shape[0])

    def bits(self, message_bits) -> np.ndarray:
        w = np.asarray(message_bits, dtype=np.int64).reshape(-1)
        if w.size != self.info_bits:
            raise ValueError(f"expected {self.info_bits} message bits, got {w.size}")
        return ((self.matrix.astype(np.int64) @ w + self.offset) % 2).astype(np.uint8)

    def __call__(self, w: int) -> int:
        return bits_to_int(self.bits(int_to_bits(w, self.info_bits)))


def crc_bin(message_bits, crc_bits: int, seed) -> np.ndarray:
    """Check bits of a message under the binning function drawn from ``seed``."""
    message_bits = np.asarray(message_bits, dtype=np.uint8).reshape(-1)
    return BinningFunction.from_seed(message_bits.size, crc_bits, seed).bits(message_bits)


def compose(w: int, u: int, crc_bits: int) -> int:
    return (int(w) << crc_bits) | int(u)


def split_composite(codeword_index: int, info_bits: int, crc_bits: int) -> tuple[int, int]:
    """Inverse of :func:`compose`: codeword index -> (message, check)."""
    if not 0 <= codeword_index < 1 << (info_bits + crc_bits):
        raise ValueError(f"codeword index {codeword_index} out of range")
    return int(codeword_index) >> crc_bits, int(codeword_index) & ((1 << crc_bits) - 1)


def check_crc(w: int, u: int, binning: BinningFunction) -> bool:
    return binning(w) == u


@dataclass(frozen=True, eq=False)
class Codebook:
    """i.i.d. Gaussian codewords, stored with shape ``(|C|, K, N-P)``."""

    codewords: np.ndarray
    data_cov: np.ndarray
    info_bits: int
    crc_bits: int
    binning_seed: int
    binning: BinningFunction = field(repr=False)

    def __len__(self) -> int:
        return int(self.codewords.shape[0])

    def encode(self, w: int) -> int:
        """Codeword index of message ``w`` with its check bits attached."""
        if not 0 <= w < 1 << self.info_bits:
            raise ValueError(f"message {w} out of range")
        return compose(w, self.binning(w), self.crc_bits)

    def split(self, codeword_index: int) -> tuple[int, int]:
        return split_composite(codeword_index, self.info_bits, self.crc_bits)

    def check(self, codeword_index: int) -> bool:
        w, u = self.split(codeword_index)
        return check_crc(w, u, self.binning)


def build_codebook(
    spec: ChannelSpec,
    info_bits: int,
    crc_bits: int,
    seed: int,
    *,
    data_cov: np.ndarray | None = None,
    binning_seed: int | None = None,
) -> Codebook:
    """Draw ``2**(info_bits + crc_bits)`` codewords spanning ``spec.k_blocks`` blocks.

    Each block segment is ``CN(0, data_cov)`` (identity by default). The
    binning function is seeded by ``binning_seed``, defaulting to ``seed``.
    """
    if info_bits < 0 or crc_bits < 0:
        raise ValueError("bit counts must be nonnegative")
    if info_bits + crc_bits > MAX_CODEBOOK_BITS:
        raise ValueError(
            f"codebook of 2^{info_bits + crc_bits} words exceeds the 2^{MAX_CODEBOOK_BITS} limit"
        )
    nd = spec.n_data
    cov = np.eye(nd, dtype=complex) if data_cov is None else np.asarray(data_cov, dtype=complex)
    if cov.shape != (nd, nd):
        raise ValueError(f"data covariance must be {nd}x{nd}")
    chol = np.linalg.cholesky(cov)  # raises unless positive definite
    size = 1 << (info_bits + crc_bits)
    rng = np.random.default_rng(seed)
    white = complex_normal(rng, (size, spec.k_blocks, nd))
    words = white @ chol.T
    words.setflags(write=False)
    bseed = seed if binning_seed is None else binning_seed
    return Codebook(
        codewords=words,
        data_cov=cov,
        info_bits=info_bits,
        crc_bits=crc_bits,
        binning_seed=bseed,
        binning=BinningFunction.from_seed(info_bits, crc_bits, bseed),
    )
