"""
Sparse block-fading channel, DFT submatrices and pilot-aided framing.

A fading block carries ``N`` frequency-domain symbols. ``P`` of them are
known pilots, the remaining ``N - P`` carry data. The time-domain impulse
response has length ``L`` with exactly ``S`` nonzero taps; the support is
one of ``M = C(L, S)`` hypotheses, indexed (0-based) in lexicographic order.

Per block the received frequency-domain signal is::

    y_pilot = sqrt(rho N) Diag(x_pilot) F[pilot rows, support] h_nz + v_pilot
    y_data  = sqrt(rho N) Diag(x_data)  F[data rows,  support] h_nz + v_data

with ``F`` the unitary N-point DFT matrix, ``h_nz ~ CN(0, I/S)`` and unit
variance complex white noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

SupportSet = tuple[int, ...]


def is_prime(n: int) -> bool:
    """Trial-division primality test."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def enumerate_supports(l_taps: int, s_sparsity: int) -> list[SupportSet]:
    """All ``S``-element subsets of ``{0, ..., L-1}`` in lexicographic order.

    The position of a subset in this list is its hypothesis index.
    """
    if l_taps < 1 or not 1 <= s_sparsity <= l_taps:
        raise ValueError(f"need 1 <= S <= L, got L={l_taps}, S={s_sparsity}")
    return list(itertools.combinations(range(l_taps), s_sparsity))


def dft_submatrix(n_block: int, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Rows ``rows`` and columns ``cols`` of the unitary N-point DFT matrix.

    Entry ``(a, b)`` is ``exp(-2j pi rows[a] cols[b] / N) / sqrt(N)``.
    """
    rows = np.asarray(rows, dtype=int).reshape(-1)
    cols = np.asarray(cols, dtype=int).reshape(-1)
    if rows.size and (rows.min() < 0 or rows.max() >= n_block):
        raise ValueError(f"row index out of range [0, {n_block})")
    if cols.size and (cols.min() < 0 or cols.max() >= n_block):
        raise ValueError(f"column index out of range [0, {n_block})")
    # reduce the exponent mod N before scaling so large products stay exact
    phase = np.outer(rows, cols) % n_block
    return np.exp(-2j * np.pi * phase / n_block) / np.sqrt(n_block)


@dataclass(frozen=True)
class PilotPatternReport:
    passed: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.passed


def _is_coset_of_subgroup(indices: frozenset[int], n: int) -> tuple[bool, bool]:
    """Return (is_subgroup, is_coset) for a subset of Z_n.

    Subgroups of Z_n are ``d Z_n`` for divisors ``d`` of ``n``; a coset is a
    translate of one. Only proper, nontrivial subgroups are of interest; the
    whole group and singletons ({0} and its cosets) are excluded because any
    1x1 DFT submatrix is nonzero and the whole index set never arises as a
    pilot pattern with data subcarriers.
    """
    size = len(indices)
    if size <= 1 or size >= n or n % size:
        return False, False
    step = n // size
    subgroup = frozenset(range(0, n, step))
    if indices == subgroup:
        return True, False
    offset = min(indices) % step
    coset = frozenset((g + offset) % n for g in subgroup)
    return False, indices == coset


def check_pilot_pattern(n_block: int, pilot_indices: Sequence[int], l_taps: int) -> PilotPatternReport:
    """Pilot-placement conditions that keep pilot DFT submatrices full rank.

    Prime ``N`` needs no restriction. Otherwise the pilot set must be neither
    a subgroup of Z_N nor a coset of one, and ``L < N/2``.
    """
    if is_prime(n_block):
        return PilotPatternReport(True)
    indices = frozenset(int(i) for i in pilot_indices)
    is_subgroup, is_coset = _is_coset_of_subgroup(indices, n_block)
    if is_subgroup:
        return PilotPatternReport(
            False, f"pilot indices form a subgroup of Z_{n_block} (N is not prime)"
        )
    if is_coset:
        return PilotPatternReport(
            False, f"pilot indices form a coset of a subgroup of Z_{n_block} (N is not prime)"
        )
    if not 2 * l_taps < n_block:
        return PilotPatternReport(
            False, f"channel length L={l_taps} must satisfy L < N/2 when N={n_block} is not prime"
        )
    return PilotPatternReport(True)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Static problem definition shared by every block of a codeword.

    Array-valued fields are stored as read-only numpy arrays. Construction
    validates all invariants; for non-prime ``N`` the pilot pattern is
    checked and construction fails if it is unsafe.
    """

    n_block: int
    l_taps: int
    s_sparsity: int
    snr_linear: float
    pilot_indices: np.ndarray
    pilot_values: np.ndarray | None = None
    support_prior: np.ndarray | None = None
    k_blocks: int = 1
    _validate_pattern: bool = field(default=True, repr=False)

    def __post_init__(self):
        n, l, s = int(self.n_block), int(self.l_taps), int(self.s_sparsity)
        if n < 2:
            raise ValueError(f"block length must be >= 2, got {n}")
        if not 1 <= l < n:
            raise ValueError(f"need 1 <= L < N, got L={l}, N={n}")
        if not 1 <= s <= l:
            raise ValueError(f"need 1 <= S <= L, got S={s}, L={l}")
        if not np.isfinite(self.snr_linear) or self.snr_linear < 0:
            raise ValueError(f"snr must be a finite nonnegative number, got {self.snr_linear}")
        if int(self.k_blocks) < 1:
            raise ValueError(f"k_blocks must be positive, got {self.k_blocks}")

        pilots = np.asarray(self.pilot_indices, dtype=int).reshape(-1)
        if pilots.size == 0 or pilots.size >= n:
            raise ValueError(f"need 1 <= P < N pilots, got P={pilots.size}")
        if np.any(np.diff(pilots) <= 0):
            raise ValueError("pilot indices must be strictly increasing")
        if pilots[0] < 0 or pilots[-1] >= n:
            raise ValueError(f"pilot indices must lie in [0, {n})")

        if self.pilot_values is None:
            values = np.ones(pilots.size, dtype=complex)
        else:
            values = np.asarray(self.pilot_values, dtype=complex).reshape(-1)
        if values.size != pilots.size:
            raise ValueError("pilot_values must have one entry per pilot index")
        if np.max(np.abs(np.abs(values) - 1.0)) > 1e-12:
            raise ValueError("pilot values must have unit modulus")

        m = math.comb(l, s)
        if self.support_prior is None:
            prior = np.full(m, 1.0 / m)
        else:
            prior = np.asarray(self.support_prior, dtype=float).reshape(-1)
        if prior.size != m:
            raise ValueError(f"support prior must have C(L,S)={m} entries, got {prior.size}")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("support prior must be nonnegative and sum to 1")

        object.__setattr__(self, "n_block", n)
        object.__setattr__(self, "l_taps", l)
        object.__setattr__(self, "s_sparsity", s)
        object.__setattr__(self, "snr_linear", float(self.snr_linear))
        object.__setattr__(self, "k_blocks", int(self.k_blocks))
        object.__setattr__(self, "pilot_indices", _readonly(pilots))
        object.__setattr__(self, "pilot_values", _readonly(values))
        object.__setattr__(self, "support_prior", _readonly(prior))

        if self._validate_pattern:
            report = check_pilot_pattern(n, pilots, l)
            if not report:
                raise ValueError(f"invalid pilot pattern: {report.reason}")

    @property
    def n_pilots(self) -> int:
        return int(self.pilot_indices.size)

    @property
    def n_data(self) -> int:
        return self.n_block - self.n_pilots

    @property
    def n_hypotheses(self) -> int:
        return int(self.support_prior.size)

    @cached_property
    def data_indices(self) -> np.ndarray:
        mask = np.ones(self.n_block, dtype=bool)
        mask[self.pilot_indices] = False
        return _readonly(np.flatnonzero(mask))

    @cached_property
    def supports(self) -> list[SupportSet]:
        return enumerate_supports(self.l_taps, self.s_sparsity)

    @cached_property
    def pilot_dft(self) -> np.ndarray:
        """Stack ``(M, P, S)`` of pilot-row DFT submatrices, one per hypothesis."""
        return _readonly(
            np.stack([dft_submatrix(self.n_block, self.pilot_indices, s) for s in self.supports])
        )

    @cached_property
    def data_dft(self) -> np.ndarray:
        """Stack ``(M, N-P, S)`` of data-row DFT submatrices, one per hypothesis."""
        return _readonly(
            np.stack([dft_submatrix(self.n_block, self.data_indices, s) for s in self.supports])
        )

    def support_index(self, support: Sequence[int]) -> int:
        return self.supports.index(tuple(int(i) for i in support))

    def with_snr(self, snr_linear: float) -> "ChannelSpec":
        return replace(self, snr_linear=snr_linear)


def make_spec(
    n_block: int = 7,
    l_taps: int = 4,
    s_sparsity: int = 2,
    n_pilots: int | None = None,
    snr_db: float = 20.0,
    *,
    pilot_indices: Sequence[int] | None = None,
    pilot_values: Sequence[complex] | None = None,
    support_prior: Sequence[float] | None = None,
    k_blocks: int = 1,
) -> ChannelSpec:
    """Build a :class:`ChannelSpec` with the usual defaults.

    Pilots default to the first ``P`` subcarriers (``P = S`` if not given),
    pilot values to all ones and the support prior to uniform.
    """
    if pilot_indices is None:
        p = s_sparsity if n_pilots is None else n_pilots
        pilot_indices = range(p)
    elif n_pilots is not None and n_pilots != len(pilot_indices):
        raise ValueError("n_pilots disagrees with pilot_indices")
    return ChannelSpec(
        n_block=n_block,
        l_taps=l_taps,
        s_sparsity=s_sparsity,
        snr_linear=db_to_linear(snr_db),
        pilot_indices=np.asarray(list(pilot_indices), dtype=int),
        pilot_values=pilot_values,
        support_prior=support_prior,
        k_blocks=k_blocks,
    )


def validate_pilot_pattern(spec: ChannelSpec) -> PilotPatternReport:
    return check_pilot_pattern(spec.n_block, spec.pilot_indices, spec.l_taps)


def db_to_linear(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 10.0))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian draws with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True, eq=False)
class BlockRealization:
    """One fading block: true support (hypothesis index), nonzero taps, noise."""

    support_index: int
    taps_nz: np.ndarray
    noise_freq: np.ndarray

    def check(self, spec: ChannelSpec) -> None:
        if not 0 <= self.support_index < spec.n_hypotheses:
            raise ValueError(f"support index {self.support_index} out of range")
        if self.taps_nz.shape != (spec.s_sparsity,):
            raise ValueError(f"taps must have shape ({spec.s_sparsity},)")
        if self.noise_freq.shape != (spec.n_block,):
            raise ValueError(f"noise must have shape ({spec.n_block},)")

    def impulse_response(self, spec: ChannelSpec) -> np.ndarray:
        """Length-``N`` zero-padded time-domain channel vector."""
        h = np.zeros(spec.n_block, dtype=complex)
        h[list(spec.supports[self.support_index])] = self.taps_nz
        return h


def draw_block(spec: ChannelSpec, rng: np.random.Generator) -> BlockRealization:
    support_index = int(rng.choice(spec.n_hypotheses, p=spec.support_prior))
    taps = complex_normal(rng, spec.s_sparsity, 1.0 / spec.s_sparsity)
    noise = complex_normal(rng, spec.n_block)
    return BlockRealization(support_index, taps, noise)


def transmit_receive(
    spec: ChannelSpec, block: BlockRealization, x_data: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Pilot and data observations of one block carrying ``x_data``."""
    block.check(spec)
    x_data = np.asarray(x_data, dtype=complex)
    if x_data.shape != (spec.n_data,):
        raise ValueError(f"x_data must have shape ({spec.n_data},), got {x_data.shape}")
    gain = np.sqrt(spec.snr_linear * spec.n_block)
    i = block.support_index
    y_pilot = gain * spec.pilot_values * (spec.pilot_dft[i] @ block.taps_nz)
    y_data = gain * x_data * (spec.data_dft[i] @ block.taps_nz)
    return (
        y_pilot + block.noise_freq[spec.pilot_indices],
        y_data + block.noise_freq[spec.data_indices],
    )


@dataclass(frozen=True, eq=False)
class Frame:
    """Pilot/data signals of ``K`` blocks; per-block arrays are stacked on axis 0."""

    x_pilot: np.ndarray
    x_data: np.ndarray
    y_pilot: np.ndarray
    y_data: np.ndarray

    def __post_init__(self):
        k = self.x_data.shape[0]
        if self.y_pilot.shape[0] != k or self.y_data.shape[0] != k:
            raise ValueError("all per-block collections must have length K")

    @property
    def k_blocks(self) -> int:
        return int(self.x_data.shape[0])


def simulate_frame(
    spec: ChannelSpec, blocks: Sequence[BlockRealization], x_data: np.ndarray
) -> Frame:
    """Send a codeword (shape ``(K, N-P)``) through the given block realizations."""
    x_data = np.asarray(x_data, dtype=complex)
    if x_data.shape != (len(blocks), spec.n_data):
        raise ValueError(f"codeword must have shape ({len(blocks)}, {spec.n_data})")
    ys = [transmit_receive(spec, b, x) for b, x in zip(blocks, x_data)]
    return Frame(
        x_pilot=spec.pilot_values,
        x_data=x_data,
        y_pilot=np.stack([y[0] for y in ys]),
        y_data=np.stack([y[1] for y in ys]),
    )
