"""Achievable-rate evaluation, slope fitting and the quadrature check of the ML metric."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..decode import effective_noise_cov


def achievable_rate(
    snr_linear: float,
    h_f_data: np.ndarray,
    sigma_f_data: np.ndarray,
    data_cov: np.ndarray,
    n_block: int,
) -> np.ndarray:
    """Rate in bits per channel use of Gaussian coding with a channel estimate.

    ``log2 det(I + rho C^{-1} Diag(h) R Diag(h)^H) / N`` where ``C`` is the
    effective-noise covariance. Accepts a batch of estimates ``(T, n)`` with
    matching error covariances ``(T, n, n)`` (or a single shared one).
    """
    h = np.atleast_2d(h_f_data)
    sig = np.asarray(sigma_f_data)
    if sig.ndim == 2:
        sig = np.broadcast_to(sig, (h.shape[0],) + sig.shape)
    cov = np.stack([effective_noise_cov(snr_linear, s, data_cov) for s in sig])
    signal = snr_linear * h[:, :, None] * data_cov[None] * h.conj()[:, None, :]
    # det(I + C^{-1} B) = det(C + B) / det(C), both Hermitian positive definite
    _, num = np.linalg.slogdet(cov + signal)
    _, den = np.linalg.slogdet(cov)
    return (num - den) / (n_block * np.log(2.0))


def ols_slope(x, y) -> float:
    """Least-squares slope of ``y`` against ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(x, y, 1)[0])


def quadrature_log_predictive(
    a_matrix: np.ndarray,
    y_data: np.ndarray,
    h_pilot: complex,
    sigma_pilot: float,
    *,
    half_width: float,
    points: int = 201,
) -> float:
    """``log integral p(y | h) p(h | pilots) dh`` for one complex tap, by 2-D quadrature.

    ``p(y | h) = CN(y; A h, I)`` and ``p(h | pilots) = CN(h; h_pilot, sigma_pilot)``.
    The trapezoid rule runs over the square ``[-half_width, half_width]^2`` of
    (real, imaginary) parts.
    """
    a = np.asarray(a_matrix, dtype=complex).reshape(-1)
    y = np.asarray(y_data, dtype=complex).reshape(-1)
    grid = np.linspace(-half_width, half_width, points)
    step = grid[1] - grid[0]
    re, im = np.meshgrid(grid, grid, indexing="ij")
    h = re + 1j * im
    resid = y[None, None, :] - a[None, None, :] * h[..., None]
    log_lik = -np.sum(np.abs(resid) ** 2, axis=-1) - y.size * np.log(np.pi)
    log_prior = -np.abs(h - h_pilot) ** 2 / sigma_pilot - np.log(np.pi * sigma_pilot)
    w = np.ones(points)
    w[[0, -1]] = 0.5
    log_w = np.log(np.outer(w, w) * step**2)
    return float(logsumexp(log_lik + log_prior + log_w))
