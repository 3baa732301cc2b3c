"""Pilot transmission, LMMSE channel estimation and quantized CSI transfer.

Two fronthaul strategies are implemented on top of the ideal LMMSE
estimator:

* estimate-and-quantize (``eq``): each AP estimates its channel
  coefficients at full precision and forwards the quantized estimates;
* quantize-and-estimate (``qe``): each AP forwards the quantized raw
  pilot observations and the central processor estimates from those.

Both come with closed-form per-link mean squared errors derived from the
Bussgang linearization of the quantizer, plus a Monte-Carlo MSE oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantizer import (
    PASS_THROUGH,
    BussgangFactors,
    QuantizerSpec,
    bussgang_factors,
    quantize_complex,
)
from .rng import complex_normal

#: Links with estimate power below this are treated as carrying no
#: information (the estimate is pinned to zero instead of dividing by ~0).
GAMMA_FLOOR = 1e-30


@dataclass(frozen=True)
class PilotBook:
    """Orthonormal constant-modulus pilot sequences, one column per user."""

    tau_p: int
    sequences: np.ndarray  # (tau_p, K), unit-norm columns

    @property
    def user_count(self) -> int:
        return self.sequences.shape[1]

    def theta(self, rho_p: float) -> np.ndarray:
        """Transmitted pilot matrix sqrt(tau_p * rho_p) * [phi_1 ... phi_K]."""
        return np.sqrt(self.tau_p * rho_p) * self.sequences

    def cross_gains(self) -> np.ndarray:
        """K x K matrix of |<phi_k, phi_k'>|^2 (identity for orthogonal pilots)."""
        g = self.sequences.conj().T @ self.sequences
        return np.abs(g) ** 2


@dataclass(frozen=True)
class PowerSplit:
    """Equal-energy split of the coherence interval between pilot and data."""

    rho: float
    rho_p: float
    rho_u: float
    tau_c: int
    tau_p: int
    tau_u: int


@dataclass(frozen=True)
class EstimationStatistics:
    """Per-link second-order statistics of a CSI acquisition scheme.

    ``c`` is the estimator coefficient applied to the (possibly
    quantized) pilot projection, ``gamma`` the mean square of the
    resulting estimate, ``epsilon`` the per-link MSE. ``a`` is the pilot
    projection power (tau_p*rho_p*sum beta|phi^H phi|^2 + 1) and ``b``
    the per-AP received pilot power per symbol (rho_p*sum beta + 1).
    """

    scheme: str
    c: np.ndarray
    gamma: np.ndarray
    epsilon: np.ndarray
    a: np.ndarray
    b: np.ndarray
    factors: BussgangFactors = PASS_THROUGH

    @property
    def beta(self) -> np.ndarray:
        """Large-scale gains implied by the ideal split beta = gamma + epsilon."""
        if self.scheme == "ideal":
            return self.gamma + self.epsilon
        raise AttributeError("beta is only recoverable from ideal statistics")


@dataclass(frozen=True)
class CsiEstimate:
    """Estimated channel matrix (last two axes M x K) plus its statistics."""

    g_hat: np.ndarray
    scheme: str
    stats: EstimationStatistics


def make_pilots(tau_p: int, user_count: int) -> PilotBook:
    """First ``user_count`` columns of the unitary DFT of size tau_p.

    Constant modulus 1/sqrt(tau_p) per entry and exactly orthonormal,
    which also makes every received pilot sample have equal variance at
    a given AP.
    """
    if user_count > tau_p:
        raise ValueError(
            f"orthogonal pilots need user_count <= tau_p, got {user_count} > {tau_p}"
        )
    if user_count < 1:
        raise ValueError("need at least one user")
    n = np.arange(tau_p)[:, None]
    k = np.arange(user_count)[None, :]
    seq = np.exp(-2j * np.pi * n * k / tau_p) / np.sqrt(tau_p)
    return PilotBook(tau_p=tau_p, sequences=seq)


def power_split(rho: float, tau_c: int, tau_p: int) -> PowerSplit:
    """Allocate half the frame energy to pilots and half to data."""
    if not 0 < tau_p < tau_c:
        raise ValueError(f"need 0 < tau_p < tau_c, got tau_p={tau_p}, tau_c={tau_c}")
    tau_u = tau_c - tau_p
    return PowerSplit(
        rho=rho,
        rho_p=rho * tau_c / (2.0 * tau_p),
        rho_u=rho * tau_c / (2.0 * tau_u),
        tau_c=tau_c,
        tau_p=tau_p,
        tau_u=tau_u,
    )


def receive_pilots(gains: np.ndarray, pilots: PilotBook, rho_p: float, rng) -> np.ndarray:
    """Received pilot block, row m = sqrt(tau_p*rho_p) sum_k g_mk phi_k^T + noise.

    ``gains`` may carry leading batch axes; the result has shape
    (..., M, tau_p) with unit-variance complex noise.
    """
    clean = np.sqrt(pilots.tau_p * rho_p) * (gains @ pilots.sequences.T)
    return clean + complex_normal(rng, clean.shape)


def project_pilot(y_row: np.ndarray, phi: np.ndarray):
    """Projection phi^H y of one received pilot row (or batch of rows)."""
    out = np.asarray(y_row) @ phi.conj()
    if out.ndim == 0:
        return complex(out)
    return out


def _project_all(y_pilot: np.ndarray, pilots: PilotBook) -> np.ndarray:
    """Projections onto every pilot: (..., M, tau_p) -> (..., M, K)."""
    return y_pilot @ pilots.sequences.conj()


def ideal_statistics(beta: np.ndarray, pilots: PilotBook, rho_p: float) -> EstimationStatistics:
    """LMMSE coefficients and errors for estimation over ideal fronthaul.

    a = tau_p*rho_p * sum_k' beta_mk' |phi_k^H phi_k'|^2 + 1,
    c = sqrt(tau_p*rho_p) * beta / a, gamma = tau_p*rho_p * beta^2 / a,
    epsilon = beta - gamma.
    """
    beta = np.asarray(beta, dtype=float)
    snr = pilots.tau_p * rho_p
    a = snr * beta @ pilots.cross_gains().T + 1.0
    c = np.sqrt(snr) * beta / a
    gamma = snr * beta**2 / a
    b = rho_p * beta.sum(axis=-1) + 1.0
    return EstimationStatistics(
        scheme="ideal", c=c, gamma=gamma, epsilon=beta - gamma, a=a, b=b
    )


def estimate_ideal(y_pilot: np.ndarray, pilots: PilotBook, stats: EstimationStatistics) -> CsiEstimate:
    """LMMSE estimate g_hat_mk = c_mk * phi_k^H y_m over ideal fronthaul."""
    return CsiEstimate(stats.c * _project_all(y_pilot, pilots), "ideal", stats)


def estimate_eq(
    y_pilot: np.ndarray,
    pilots: PilotBook,
    stats: EstimationStatistics,
    quantizer: QuantizerSpec | None,
) -> tuple[CsiEstimate, EstimationStatistics]:
    """Estimate at full precision, then quantize the estimates.

    Each estimate is quantized against its own a-priori scale
    sqrt(gamma/2) per real component. The post-quantization MSE is
    epsilon_eq = beta - (2*alpha - lam) * gamma; links with vanishing
    gamma carry no information and are pinned to zero.
    """
    ideal = estimate_ideal(y_pilot, pilots, stats)
    beta = stats.beta
    if quantizer is None:
        eq_stats = EstimationStatistics(
            scheme="eq", c=stats.c, gamma=stats.gamma, epsilon=stats.epsilon,
            a=stats.a, b=stats.b, factors=PASS_THROUGH,
        )
        return CsiEstimate(ideal.g_hat, "eq", eq_stats), eq_stats
    factors = bussgang_factors(quantizer.step, quantizer.levels)
    live = stats.gamma > GAMMA_FLOOR
    sigma = np.sqrt(np.where(live, stats.gamma, 1.0) / 2.0)
    g_q = np.where(live, quantize_complex(ideal.g_hat, quantizer, sigma), 0.0)
    shrink = 2.0 * factors.alpha - factors.lam
    eq_stats = EstimationStatistics(
        scheme="eq",
        c=stats.c,
        gamma=np.where(live, factors.lam * stats.gamma, 0.0),
        epsilon=np.where(live, beta - shrink * stats.gamma, beta),
        a=stats.a,
        b=stats.b,
        factors=factors,
    )
    return CsiEstimate(g_q, "eq", eq_stats), eq_stats


def qe_statistics(stats: EstimationStatistics, factors: BussgangFactors) -> EstimationStatistics:
    """Statistics of LMMSE estimation from quantized pilots.

    The estimator coefficient picks up the Bussgang gain and the pilot
    distortion: c_qe = c * alpha*a / (alpha^2*a + (lam - alpha^2)*b),
    and the estimate power shrinks by alpha^2*a / (alpha^2*a +
    (lam - alpha^2)*b) relative to the ideal gamma.
    """
    a = stats.a
    b = np.expand_dims(stats.b, axis=-1)
    denom = factors.alpha**2 * a + factors.distortion_factor * b
    shrink = factors.alpha**2 * a / denom
    gamma_qe = stats.gamma * shrink
    return EstimationStatistics(
        scheme="qe",
        c=stats.c * factors.alpha * a / denom,
        gamma=gamma_qe,
        epsilon=stats.beta - gamma_qe,
        a=stats.a,
        b=stats.b,
        factors=factors,
    )


def estimate_qe(
    y_pilot: np.ndarray,
    pilots: PilotBook,
    stats: EstimationStatistics,
    quantizer: QuantizerSpec | None,
) -> tuple[CsiEstimate, EstimationStatistics]:
    """Quantize the raw pilot block, then estimate at the central processor.

    Pilot samples at AP m are quantized against their a-priori scale
    sqrt(b_m/2) per real component, projected onto each pilot sequence
    and scaled by the quantization-aware LMMSE coefficient.
    """
    if quantizer is None:
        qe_stats = EstimationStatistics(
            scheme="qe", c=stats.c, gamma=stats.gamma, epsilon=stats.epsilon,
            a=stats.a, b=stats.b, factors=PASS_THROUGH,
        )
        return CsiEstimate(estimate_ideal(y_pilot, pilots, stats).g_hat, "qe", qe_stats), qe_stats
    factors = bussgang_factors(quantizer.step, quantizer.levels)
    sigma = np.sqrt(np.expand_dims(stats.b, axis=-1) / 2.0)
    y_q = quantize_complex(y_pilot, quantizer, sigma)
    qe_stats = qe_statistics(stats, factors)
    return CsiEstimate(qe_stats.c * _project_all(y_q, pilots), "qe", qe_stats), qe_stats


def estimate_for_scheme(
    y_pilot: np.ndarray,
    pilots: PilotBook,
    stats: EstimationStatistics,
    scheme: str,
    quantizer: QuantizerSpec | None,
) -> tuple[CsiEstimate, EstimationStatistics]:
    """Dispatch to the ideal, eq or qe estimator."""
    if scheme == "ideal":
        return estimate_ideal(y_pilot, pilots, stats), stats
    if scheme == "eq":
        return estimate_eq(y_pilot, pilots, stats, quantizer)
    if scheme == "qe":
        return estimate_qe(y_pilot, pilots, stats, quantizer)
    raise ValueError(f"unknown CSI scheme {scheme!r}")


def empirical_mse(
    scheme: str,
    beta: np.ndarray,
    pilots: PilotBook,
    split: PowerSplit,
    quantizer: QuantizerSpec | None,
    trials: int,
    rng,
    chunk: int = 200,
) -> np.ndarray:
    """Monte-Carlo per-link MSE mean |g - g_hat|^2 at fixed large-scale gains.

    Averages over ``trials`` independent small-scale fading and noise
    draws; deterministic given the generator state.
    """
    trials = int(trials)
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    from .propagation import draw_fading

    stats = ideal_statistics(beta, pilots, split.rho_p)
    acc = np.zeros_like(np.asarray(beta, dtype=float))
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        gains = draw_fading(beta, rng, n)
        y_pilot = receive_pilots(gains, pilots, split.rho_p, rng)
        est, _ = estimate_for_scheme(y_pilot, pilots, stats, scheme, quantizer)
        acc += (np.abs(gains - est.g_hat) ** 2).sum(axis=0)
        done += n
    return acc / trials
