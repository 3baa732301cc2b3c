"""Uplink data phase: quantized reception, effective noise and ZF detection.

The central processor treats the estimated channel as the true one, so
the received data decomposes into sqrt(rho_u)*alpha*G_hat*x plus an
effective noise z collecting estimation-error leakage, scaled thermal
noise and quantizer distortion. z is modeled as uncorrelated across APs
with per-AP variance Lambda_m; zero forcing is applied either directly
or after whitening by Lambda^{-1/2}.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .quantizer import BussgangFactors, QuantizerSpec, quantize_complex
from .rng import complex_normal

_TINY = np.finfo(float).tiny


def receive_data(gains: np.ndarray, symbols: np.ndarray, rho_u: float, rng) -> np.ndarray:
    """Received uplink data y = sqrt(rho_u) G x + w with unit-variance noise.

    ``symbols`` has shape (..., K) or (..., K, S) for S symbols at once.
    """
    clean = np.sqrt(rho_u) * (gains @ symbols)
    return clean + complex_normal(rng, clean.shape)


def quantize_data(
    y_data: np.ndarray,
    beta_row_sums: np.ndarray,
    rho_u: float,
    quantizer: QuantizerSpec | None,
) -> np.ndarray:
    """Quantize received data per AP against its a-priori power.

    The per-component scale at AP m is sqrt((rho_u * sum_k beta_mk + 1)/2).
    ``y_data`` has shape (..., M) or (..., M, S).
    """
    if quantizer is None:
        return y_data
    sigma = np.sqrt((rho_u * np.asarray(beta_row_sums) + 1.0) / 2.0)
    if y_data.ndim >= 2 and y_data.shape[-1] != sigma.shape[-1]:
        sigma = sigma[..., None]  # trailing symbol axis
    return quantize_complex(y_data, quantizer, sigma)


def lambda_diagonal(
    eps_q: np.ndarray,
    beta: np.ndarray,
    rho_u: float,
    factors: BussgangFactors,
) -> np.ndarray:
    """Diagonal of the effective noise covariance, one entry per AP.

    Lambda_m = sigma_d^2(m) + alpha^2 * sigma_n^2 + rho_u * alpha^2 * sum_k eps_mk
    with the quantizer distortion sigma_d^2(m) = (lam - alpha^2) *
    (rho_u * sum_k beta_mk + 1) and unit thermal noise.
    """
    input_power = rho_u * np.asarray(beta).sum(axis=-1) + 1.0
    lam = (
        factors.distortion_factor * input_power
        + factors.alpha**2
        + rho_u * factors.alpha**2 * np.asarray(eps_q).sum(axis=-1)
    )
    if np.any(lam <= 0):
        raise ValueError("effective noise variance must be positive; inconsistent factors")
    return lam


def _qr_full_rank(matrix: np.ndarray):
    q, r = np.linalg.qr(matrix)
    diag = np.abs(np.diagonal(r))
    k = matrix.shape[-1]
    if diag.min() <= k * np.finfo(float).eps * diag.max():
        cond = diag.max() / max(diag.min(), _TINY)
        raise np.linalg.LinAlgError(
            f"estimated channel matrix is rank deficient (R-diagonal condition {cond:.3e})"
        )
    return q, r


def zf_exact_sinr(
    g_hat: np.ndarray, lam: np.ndarray, rho_u: float, alpha: float
) -> np.ndarray:
    """Per-user SINR of plain ZF, with the effective noise covariance Lambda.

    SINR_k = rho_u * alpha^2 / [A^H Lambda A]_kk where A^H is the
    pseudo-inverse of g_hat. Solved through the QR factorization; a rank
    deficient matrix raises with a condition diagnostic.
    """
    q, r = _qr_full_rank(g_hat)
    core = (q.conj().T * np.asarray(lam)) @ q
    x = solve_triangular(r, core, lower=False)
    d = solve_triangular(r, x.conj().T, lower=False).conj().T
    return rho_u * alpha**2 / np.real(np.diagonal(d))


def zf_whitened_sinr(
    g_hat: np.ndarray, lam: np.ndarray, rho_u: float, alpha: float
) -> np.ndarray:
    """Per-user SINR of ZF after whitening by Lambda^{-1/2}.

    SINR_k = rho_u * alpha^2 / [(G_hat^H Lambda^{-1} G_hat)^{-1}]_kk.
    """
    g_w = g_hat / np.sqrt(np.asarray(lam))[:, None]
    _, r = _qr_full_rank(g_w)
    r_inv = solve_triangular(r, np.eye(r.shape[0], dtype=r.dtype), lower=False)
    diag = (np.abs(r_inv) ** 2).sum(axis=1)
    return rho_u * alpha**2 / diag


def zf_whitened_detect(r_data: np.ndarray, g_hat: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Whitened ZF detection (G^H Lambda^{-1} G)^{-1} G^H Lambda^{-1} r."""
    scale = np.sqrt(np.asarray(lam))
    g_w = g_hat / scale[:, None]
    r_w = r_data / scale
    q, r = _qr_full_rank(g_w)
    return solve_triangular(r, q.conj().T @ r_w, lower=False)


def zf_approx_sinr(
    g_hat: np.ndarray, lam: np.ndarray, rho_u: float, alpha: float
) -> np.ndarray:
    """Closed-form approximation of the whitened ZF SINR.

    SINR_k ~= rho_u * alpha^2 * (M-K+1)/M * g_hat_k^H Lambda^{-1} g_hat_k.
    Supports leading batch axes on ``g_hat``.
    """
    g_hat = np.asarray(g_hat)
    m, k = g_hat.shape[-2], g_hat.shape[-1]
    weighted = (np.abs(g_hat) ** 2 / np.asarray(lam)[..., :, None]).sum(axis=-2)
    return rho_u * alpha**2 * ((m - k + 1) / m) * weighted


def conditional_sinr(h_eff: np.ndarray, symbols: np.ndarray, detected: np.ndarray, cap: float) -> np.ndarray:
    """Empirical SINR of a linear detector from transmitted/detected symbols.

    Signal power uses the known conditional-mean coefficient ``h_eff``
    per user; everything left over counts as interference plus noise.
    """
    err = detected - h_eff[..., None] * symbols
    resid = np.mean(np.abs(err) ** 2, axis=-1)
    signal = np.abs(h_eff) ** 2 * np.mean(np.abs(symbols) ** 2, axis=-1)
    sinr = signal / np.maximum(resid, _TINY)
    return np.minimum(sinr, cap)


def mrc_local_baseline(
    gains: np.ndarray, rho_u: float, rng, symbols: int, cap: float = 1e9
) -> np.ndarray:
    """Empirical per-user SINR of maximum ratio combining with local CSI.

    The combiner uses the true channel (infinite-resolution local CSI,
    no fronthaul quantization): x_hat_k = sum_m g_mk^* y_m, measured over
    ``symbols`` unit-power Gaussian symbols. SINR is capped at ``cap``
    (an interference-free single-user link is otherwise unbounded).
    """
    gains = np.asarray(gains)
    k = gains.shape[-1]
    x = complex_normal(rng, (*gains.shape[:-2], k, symbols))
    y = receive_data(gains, x, rho_u, rng)
    detected = np.swapaxes(gains, -1, -2).conj() @ y
    h_eff = np.sqrt(rho_u) * (np.abs(gains) ** 2).sum(axis=-2)
    return conditional_sinr(h_eff, x, detected, cap)


def user_rate(sinr) -> np.ndarray:
    """Achievable rate log2(1 + SINR) in bits per symbol."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be nonnegative")
    return np.log2(1.0 + sinr)


def net_throughput(bandwidth_hz: float, tau_p: int, tau_c: int, rate) -> np.ndarray:
    """Net per-user throughput B * (1 - tau_p/tau_c)/2 * rate, in bit/s.

    The factor charges the pilot overhead tau_p/tau_c (identical for
    both CSI transfer schemes) and the fixed one-half time split.
    """
    if not 0 < tau_p < tau_c:
        raise ValueError(f"need 0 < tau_p < tau_c, got tau_p={tau_p}, tau_c={tau_c}")
    return bandwidth_hz * (1.0 - tau_p / tau_c) / 2.0 * np.asarray(rate)
