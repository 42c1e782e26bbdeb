"""
Codeword decoders for pilot-aided transmission.

* :func:`ml_decode_sparse` -- joint channel/data ML decoding that averages the
  per-block likelihood over all support hypotheses, weighted by their pilot
  posteriors.
* :func:`ml_decode_nonsparse` -- the same decoder for a dense length-``L``
  channel (a single hypothesis covering every tap).
* :func:`wmd_decode` -- decoupled decoding: support-hypothesized channel
  estimates followed by a whitened minimum-distance search.

All metrics are accumulated in the log domain. Ties resolve to the lowest
codeword index (``np.argmax``/``np.argmin`` semantics).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.special import logsumexp

from .estimation import gaussian_tap_posterior, nonsparse_columns, support_posterior
from .model import ChannelSpec, Frame

if TYPE_CHECKING:
    from .codec import Codebook


@dataclass(frozen=True)
class DecodeResult:
    codeword_index: int
    metric_value: float
    per_block_support: tuple[int, ...] | None = None


def _codewords(codebook) -> np.ndarray:
    """Codeword array of shape ``(|C|, K, N-P)`` from a Codebook or raw array."""
    return np.asarray(getattr(codebook, "codewords", codebook), dtype=complex)


def _check_frame(spec: ChannelSpec, words: np.ndarray, frame: Frame) -> None:
    if words.shape[0] == 0:
        raise ValueError("codebook is empty")
    if words.shape[1:] != (frame.k_blocks, spec.n_data):
        raise ValueError(
            f"codewords have shape {words.shape[1:]}, frame needs ({frame.k_blocks}, {spec.n_data})"
        )


def block_log_metric(
    f_data: np.ndarray,
    gain: float,
    h_pilot: np.ndarray,
    precision_pilot: np.ndarray,
    x_data: np.ndarray,
    y_data: np.ndarray,
    *,
    normalized: bool = False,
) -> np.ndarray:
    """Joint channel/data log-metric of one block for a batch of data hypotheses.

    With ``A = gain Diag(x) F_data`` and pilot-aided tap posterior
    ``CN(h_pilot, Sigma)`` the unnormalized metric is::

        -log det(A^H A + Sigma^{-1}) - ||y - A h(x)||^2 - ||h(x) - h_pilot||^2_{Sigma^{-1}}

    where ``h(x)`` is the data-refined tap estimate. With ``normalized=True``
    the hypothesis-dependent constant ``log det(Sigma^{-1}) - n log(pi)`` is
    added, so the result is exactly ``log p(y_data | x, pilots, support)``.

    Parameters
    ----------
    f_data : np.ndarray
        Data-row DFT submatrix, ``(n, S)``.
    gain : float
        ``sqrt(rho N)``.
    h_pilot, precision_pilot : np.ndarray
        Pilot-aided tap mean ``(S,)`` and its precision ``(S, S)``.
    x_data : np.ndarray
        Candidate data vectors, ``(C, n)``.
    y_data : np.ndarray
        Observed data-subcarrier signal, ``(n,)``.

    Returns
    -------
    np.ndarray
        One log-metric per candidate, shape ``(C,)``.
    """
    x_data = np.atleast_2d(x_data)
    a = gain * x_data[:, :, None] * f_data[None]  # (C, n, S)
    a_h = np.conj(np.swapaxes(a, 1, 2))
    post_prec = precision_pilot[None] + a_h @ a
    rhs = (precision_pilot @ h_pilot)[None, :, None] + a_h @ y_data[None, :, None]
    chol = np.linalg.cholesky(post_prec)
    h_x = np.linalg.solve(post_prec, rhs)[..., 0]  # (C, S)
    resid = y_data[None] - np.einsum("cns,cs->cn", a, h_x)
    dev = h_x - h_pilot[None]
    quad = np.real(np.einsum("cs,st,ct->c", dev.conj(), precision_pilot, dev))
    logdet = 2.0 * np.sum(np.log(np.real(np.diagonal(chol, axis1=1, axis2=2))), axis=1)
    out = -logdet - np.sum(np.abs(resid) ** 2, axis=1) - quad
    if normalized:
        sign, logdet_prior = np.linalg.slogdet(precision_pilot)
        out = out + logdet_prior - y_data.size * np.log(np.pi)
    return out


def sparse_block_scores(spec: ChannelSpec, words: np.ndarray, frame: Frame, k: int) -> np.ndarray:
    """``log sum_i posterior_i p(y_data | x, pilots, L_i)`` for block ``k`` and every codeword."""
    gain = np.sqrt(spec.snr_linear * spec.n_block)
    z = frame.y_pilot[k] * spec.pilot_values.conj()
    posterior = support_posterior(spec, frame.y_pilot[k])
    per_hyp = []
    for i in range(spec.n_hypotheses):
        if posterior[i] == 0.0:
            continue
        h_p, _, prec = gaussian_tap_posterior(spec.pilot_dft[i], spec.s_sparsity, gain, z)
        metric = block_log_metric(
            spec.data_dft[i], gain, h_p, prec, words[:, k], frame.y_data[k], normalized=True
        )
        per_hyp.append(np.log(posterior[i]) + metric)
    return logsumexp(np.stack(per_hyp), axis=0)


def ml_decode_sparse(spec: ChannelSpec, codebook: "Codebook | np.ndarray", frame: Frame) -> DecodeResult:
    """Maximum-likelihood codeword for the sparse channel (Bayes model averaging over supports)."""
    words = _codewords(codebook)
    _check_frame(spec, words, frame)
    total = sum(sparse_block_scores(spec, words, frame, k) for k in range(frame.k_blocks))
    best = int(np.argmax(total))
    return DecodeResult(best, float(total[best]))


def nonsparse_objective(spec: ChannelSpec, words: np.ndarray, frame: Frame) -> np.ndarray:
    """Per-codeword objective of the dense-channel ML decoder (smaller is better)."""
    f_pilot, f_data = nonsparse_columns(spec)
    gain = np.sqrt(spec.snr_linear * spec.n_block)
    total = np.zeros(words.shape[0])
    for k in range(frame.k_blocks):
        z = frame.y_pilot[k] * spec.pilot_values.conj()
        h_p, _, prec = gaussian_tap_posterior(f_pilot, spec.l_taps, gain, z)
        total -= block_log_metric(f_data, gain, h_p, prec, words[:, k], frame.y_data[k])
    return total


def ml_decode_nonsparse(spec: ChannelSpec, codebook: "Codebook | np.ndarray", frame: Frame) -> DecodeResult:
    """Maximum-likelihood codeword treating the channel as ``L`` dense taps with variance ``1/L``."""
    words = _codewords(codebook)
    _check_frame(spec, words, frame)
    total = nonsparse_objective(spec, words, frame)
    best = int(np.argmin(total))
    return DecodeResult(best, float(total[best]))


def effective_noise_cov(snr_linear: float, sigma_f_data: np.ndarray, data_cov: np.ndarray) -> np.ndarray:
    """Covariance of ``sqrt(rho) Diag(x) h_err + v`` averaged over Gaussian data.

    ``E[Diag(x) Sigma Diag(x)^H] = R o Sigma`` (Hadamard product) for
    ``x ~ CN(0, R)``, which is diagonal whenever ``R`` is.
    """
    sigma_f_data = np.asarray(sigma_f_data, dtype=complex)
    data_cov = np.asarray(data_cov, dtype=complex)
    if sigma_f_data.shape != data_cov.shape or sigma_f_data.ndim != 2:
        raise ValueError("covariances must be square and of equal size")
    for name, mat in (("sigma_f_data", sigma_f_data), ("data_cov", data_cov)):
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.conj().T)) > 1e-10 * scale:
            raise ValueError(f"{name} is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min() < -1e-10 * scale:
            raise ValueError(f"{name} is not positive semidefinite")
    n = sigma_f_data.shape[0]
    cov = snr_linear * data_cov * sigma_f_data + np.eye(n)
    return 0.5 * (cov + cov.conj().T)


def inverse_sqrt(cov: np.ndarray) -> np.ndarray:
    """Inverse Hermitian square root via eigendecomposition."""
    w, v = np.linalg.eigh(cov)
    return (v / np.sqrt(w)) @ v.conj().T


def support_conditional_channel(spec: ChannelSpec, hypothesis: int, y_pilot: np.ndarray):
    """Frequency-domain channel estimate and error covariance on data subcarriers."""
    gain = np.sqrt(spec.snr_linear * spec.n_block)
    z = y_pilot * spec.pilot_values.conj()
    h_nz, sigma_nz, _ = gaussian_tap_posterior(spec.pilot_dft[hypothesis], spec.s_sparsity, gain, z)
    f_d = spec.data_dft[hypothesis]
    root_n = np.sqrt(spec.n_block)
    return root_n * (f_d @ h_nz), spec.n_block * (f_d @ sigma_nz @ f_d.conj().T)


def wmd_block_metrics(
    snr_linear: float,
    x_data: np.ndarray,
    y_data: np.ndarray,
    h_f_data: np.ndarray,
    sigma_f_data: np.ndarray,
    data_cov: np.ndarray,
) -> np.ndarray:
    """``||Q (y - sqrt(rho) Diag(x) h)||^2`` for every candidate row of ``x_data``."""
    q = inverse_sqrt(effective_noise_cov(snr_linear, sigma_f_data, data_cov))
    resid = y_data[None] - np.sqrt(snr_linear) * x_data * h_f_data[None]
    return np.sum(np.abs(resid @ q.T) ** 2, axis=1)


def wmd_metric_table(spec: ChannelSpec, words: np.ndarray, frame: Frame, data_cov: np.ndarray) -> np.ndarray:
    """WMD metric of every (block, hypothesis, codeword), shape ``(K, M, |C|)``."""
    table = np.empty((frame.k_blocks, spec.n_hypotheses, words.shape[0]))
    for k in range(frame.k_blocks):
        for i in range(spec.n_hypotheses):
            h_f, sigma_f = support_conditional_channel(spec, i, frame.y_pilot[k])
            table[k, i] = wmd_block_metrics(
                spec.snr_linear, words[:, k], frame.y_data[k], h_f, sigma_f, data_cov
            )
    return table


def wmd_decode(
    spec: ChannelSpec,
    codebook: "Codebook | np.ndarray",
    frame: Frame,
    support_hypotheses: Sequence[int],
    data_cov: np.ndarray | None = None,
) -> DecodeResult:
    """Weighted minimum-distance decoding under a per-block support hypothesis."""
    words = _codewords(codebook)
    _check_frame(spec, words, frame)
    hyps = tuple(int(i) for i in support_hypotheses)
    if len(hyps) != frame.k_blocks or not all(0 <= i < spec.n_hypotheses for i in hyps):
        raise ValueError("need one valid hypothesis index per block")
    if data_cov is None:
        data_cov = getattr(codebook, "data_cov", np.eye(spec.n_data))
    total = np.zeros(words.shape[0])
    for k, i in enumerate(hyps):
        h_f, sigma_f = support_conditional_channel(spec, i, frame.y_pilot[k])
        total += wmd_block_metrics(spec.snr_linear, words[:, k], frame.y_data[k], h_f, sigma_f, data_cov)
    best = int(np.argmin(total))
    return DecodeResult(best, float(total[best]), hyps)
