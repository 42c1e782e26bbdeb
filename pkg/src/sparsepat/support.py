"""
Channel-support decoders.

PASE picks the support whose pilot column space leaves the least energy in
the normalized pilot observations after projection. DASD walks through
support-vector hypotheses, decoding with WMD under each one, and stops at the
first decoded message whose check bits verify.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .decode import _check_frame, _codewords, wmd_metric_table
from .model import ChannelSpec, Frame, dft_submatrix


@dataclass(frozen=True, eq=False)
class PaseResult:
    chosen_index: int
    residuals: np.ndarray


@lru_cache(maxsize=64)
def _orthonormal_bases(key: tuple) -> np.ndarray:
    n_block, pilots, supports = key
    return np.stack([np.linalg.qr(dft_submatrix(n_block, pilots, s))[0] for s in supports])


def pilot_bases(spec: ChannelSpec) -> np.ndarray:
    """Orthonormal bases ``(M, P, S)`` of every pilot DFT column space."""
    key = (spec.n_block, tuple(int(i) for i in spec.pilot_indices), tuple(spec.supports))
    return _orthonormal_bases(key)


def projector_complement(spec: ChannelSpec, hypothesis: int) -> np.ndarray:
    """``I - Q Q^H`` for the orthonormal basis ``Q`` of hypothesis ``hypothesis``."""
    q = pilot_bases(spec)[hypothesis]
    return np.eye(spec.n_pilots) - q @ q.conj().T


def normalized_pilots(spec: ChannelSpec, y_pilot: np.ndarray) -> np.ndarray:
    return np.asarray(y_pilot) * spec.pilot_values.conj() / np.sqrt(spec.snr_linear * spec.n_block)


def pase_residuals(spec: ChannelSpec, y_pilot: np.ndarray) -> np.ndarray:
    """Projection-error energy for every hypothesis, shape ``(..., M)``.

    Works on batches: ``y_pilot`` may have any leading dimensions.
    """
    if spec.n_pilots < spec.s_sparsity + 1:
        warnings.warn(
            "PASE with P = S pilots cannot distinguish supports (every column space is C^P)",
            stacklevel=2,
        )
    z = normalized_pilots(spec, y_pilot)
    q = pilot_bases(spec)
    coef = np.einsum("mps,...p->...ms", q.conj(), z)
    err = z[..., None, :] - np.einsum("mps,...ms->...mp", q, coef)
    return np.sum(np.abs(err) ** 2, axis=-1)


def pase_detect(spec: ChannelSpec, y_pilot: np.ndarray) -> PaseResult:
    """Pilot-aided support estimate for one block."""
    res = pase_residuals(spec, np.asarray(y_pilot, dtype=complex))
    return PaseResult(int(np.argmin(res)), res)


def pase_detect_fixed_support(spec: ChannelSpec, y_pilots: Sequence[np.ndarray]) -> int:
    """Support estimate from ``K`` blocks that share one support (averaged residuals)."""
    res = pase_residuals(spec, np.asarray(y_pilots, dtype=complex))
    return int(np.argmin(res.mean(axis=0)))


@dataclass
class DasdOutcome:
    """Result of a DASD run.

    ``checks`` lists ``(hypothesis tuple, codeword index, crc passed)`` for
    every hypothesis tried. ``event`` is set only when ground truth was
    supplied: ``None`` for a correct decode, else ``"E1"``, ``"E2"`` or ``"E3"``.
    """

    message: int
    codeword_index: int
    stop_hypothesis: tuple[int, ...]
    crc_passed: bool
    checks: list[tuple[tuple[int, ...], int, bool]] = field(default_factory=list)
    event: str | None = None

    @property
    def n_tried(self) -> int:
        return len(self.checks)


def hypothesis_order(spec: ChannelSpec, k_blocks: int, frame: Frame | None = None, by_pase: bool = False):
    """Iterate support-vector hypotheses.

    Lexicographic over ``{0..M-1}^K`` by default. With ``by_pase`` each
    block's hypotheses are ranked by ascending PASE residual first and the
    product is taken over those ranked lists.
    """
    per_block = [list(range(spec.n_hypotheses))] * k_blocks
    if by_pase:
        if frame is None:
            raise ValueError("PASE ordering needs the received frame")
        res = pase_residuals(spec, frame.y_pilot)
        per_block = [list(np.argsort(r, kind="stable")) for r in res]
    return itertools.product(*per_block)


def label_event(
    outcome: DasdOutcome, true_hypothesis: Sequence[int], true_message: int, last_hypothesis: tuple[int, ...]
) -> str | None:
    """Classify a DASD decode into the mutually exclusive error events.

    E1: stopped at the true hypothesis but decoded the wrong message.
    E2: stopped at the final hypothesis (not the true one) with a wrong
    message, which implies the check failed under the true hypothesis.
    E3: stopped at an intermediate wrong hypothesis whose check passed, with
    a wrong message.
    """
    if outcome.message == true_message:
        return None
    true_hypothesis = tuple(int(i) for i in true_hypothesis)
    if outcome.stop_hypothesis == true_hypothesis:
        return "E1"
    if outcome.stop_hypothesis == last_hypothesis:
        return "E2"
    return "E3"


def dasd_decode(
    spec: ChannelSpec,
    codebook,
    frame: Frame,
    *,
    true_hypothesis: Sequence[int] | None = None,
    true_message: int | None = None,
    order_by_pase: bool = False,
) -> DasdOutcome:
    """Data-aided support decoding.

    For each support-vector hypothesis, decode with WMD, split the codeword
    index into ``(w, u)`` and stop when ``mu(w) == u`` or when the hypothesis
    list is exhausted. The WMD metric is separable across blocks, so the
    per-(block, hypothesis, codeword) terms are computed once up front.

    If ``true_hypothesis`` and ``true_message`` are given the outcome carries
    the error-event label.
    """
    words = _codewords(codebook)
    _check_frame(spec, words, frame)
    k = frame.k_blocks
    table = wmd_metric_table(spec, words, frame, codebook.data_cov)
    hyps = list(hypothesis_order(spec, k, frame, order_by_pase))
    last = tuple(int(i) for i in hyps[-1])
    checks = []
    blocks = np.arange(k)
    for n, hyp in enumerate(hyps):
        hyp = tuple(int(i) for i in hyp)
        total = table[blocks, list(hyp)].sum(axis=0)
        idx = int(np.argmin(total))
        passed = codebook.check(idx)
        checks.append((hyp, idx, passed))
        if passed or n == len(hyps) - 1:
            break
    w, _ = codebook.split(idx)
    outcome = DasdOutcome(w, idx, hyp, passed, checks)
    if true_hypothesis is not None and true_message is not None:
        outcome.event = label_event(outcome, true_hypothesis, true_message, last)
    return outcome
