"""Monte-Carlo oracles backing the closed-form expressions.

Each check returns a plain dict (name, passed, measured, tolerance,
details) so the validation suite can report failures as data rather
than exceptions.
"""

from __future__ import annotations

import numpy as np

from . import csi, detection, propagation
from .config import SimulationConfig
from .quantizer import (
    QuantizerSpec,
    alpha_factor,
    bussgang_factors,
    lambda_factor,
    optimal_step,
    quantize_complex,
    quantize_real,
)
from .rng import complex_normal, seed_substream


def _check(name: str, measured: float, tolerance: float, **details) -> dict:
    return {
        "check": name,
        "passed": bool(measured <= tolerance),
        "measured": float(measured),
        "tolerance": float(tolerance),
        **details,
    }


# ---------------------------------------------------------------------------
# Bussgang factors: closed form vs Monte Carlo
# ---------------------------------------------------------------------------

def bussgang_deviation(
    spec: QuantizerSpec, alpha: float, lam: float, samples: int, rng
) -> dict:
    """Deviation of given factors from a fresh Monte-Carlo estimate.

    Returns deviations and delta-method standard errors of the two
    ratio estimators, so callers can apply an n-aware tolerance.
    """
    x = rng.standard_normal(int(samples))
    q = quantize_real(x, spec, 1.0)
    mean_xx = np.mean(x * x)
    alpha_hat = np.mean(x * q) / mean_xx
    lam_hat = np.mean(q * q) / mean_xx
    se_alpha = np.std(x * q - alpha_hat * x * x) / (mean_xx * np.sqrt(len(x)))
    se_lam = np.std(q * q - lam_hat * x * x) / (mean_xx * np.sqrt(len(x)))
    return {
        "alpha_dev": abs(alpha_hat - alpha),
        "lam_dev": abs(lam_hat - lam),
        "se_alpha": float(se_alpha),
        "se_lam": float(se_lam),
    }


def check_bussgang_factors(config: SimulationConfig) -> list[dict]:
    """Closed-form alpha/lam against Monte Carlo over the level/step grid."""
    samples = config.validate_bussgang_samples
    # Tolerance: three standard errors with an absolute floor calibrated
    # to ~1e-3 at 1e7 samples.
    floor = 1e-3 * np.sqrt(1e7 / samples)
    checks = []
    finite_levels = [int(v) for v in config.levels if np.isfinite(v)]
    for trial, levels in enumerate(finite_levels):
        steps = (0.5, optimal_step(levels), 2.0)
        for j, step in enumerate(steps):
            spec = QuantizerSpec(levels=levels, step=step)
            rng = seed_substream(config.master_seed, trial * 8 + j, "validate-bussgang")
            dev = bussgang_deviation(
                spec, alpha_factor(step, levels), lambda_factor(step, levels), samples, rng
            )
            checks.append(
                _check(
                    f"bussgang-alpha-L{levels}-step{step:.4g}",
                    dev["alpha_dev"],
                    max(3.0 * dev["se_alpha"], floor),
                    samples=samples,
                )
            )
            checks.append(
                _check(
                    f"bussgang-lambda-L{levels}-step{step:.4g}",
                    dev["lam_dev"],
                    max(3.0 * dev["se_lam"], floor),
                    samples=samples,
                )
            )
    return checks


# ---------------------------------------------------------------------------
# Quantize-and-estimate coefficient: closed form vs moment estimation
# ---------------------------------------------------------------------------

def moment_qe_coefficient(
    beta_row: np.ndarray,
    pilots: csi.PilotBook,
    rho_p: float,
    user_index: int,
    quantizer: QuantizerSpec,
    draws: int,
    rng,
    chunk: int = 100_000,
) -> float:
    """LMMSE coefficient Re(E{r_q^* g}) / E{|r_q|^2} straight from moments.

    Simulates the received pilot row of one AP, quantizes and projects
    it, and estimates the two moments by Monte Carlo.
    """
    beta_row = np.asarray(beta_row, dtype=float)
    k = beta_row.size
    phi = pilots.sequences[:, user_index]
    b_m = rho_p * beta_row.sum() + 1.0
    sigma = np.sqrt(b_m / 2.0)
    scale = np.sqrt(pilots.tau_p * rho_p)
    num = 0.0
    den = 0.0
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        g = np.sqrt(beta_row) * complex_normal(rng, (n, k))
        y = scale * (g @ pilots.sequences.T) + complex_normal(rng, (n, pilots.tau_p))
        y_q = quantize_complex(y, quantizer, sigma)
        r_q = y_q @ phi.conj()
        num += float(np.real(r_q.conj() * g[:, user_index]).sum())
        den += float((np.abs(r_q) ** 2).sum())
        done += n
    return num / den


def check_qe_coefficient(config: SimulationConfig) -> list[dict]:
    """Closed-form c_qe against the moment oracle.

    Two tiers: an algebra check on a uniform-gain link, where the full
    DFT pilot book makes the received pilot samples independent and the
    closed form is exact up to Monte-Carlo noise, and a network check on
    randomly chosen links, where the neglected distortion correlation
    across pilot symbols leaves a model error of up to tens of percent
    on links dominated by a single user.
    """
    rng_net = seed_substream(config.master_seed, 0, "validate-qe-network")
    net = propagation.draw_network(config.geometry(), config.path_loss(), rng_net)
    pilots = csi.make_pilots(config.pilot_symbols, config.user_count)
    split = csi.power_split(
        config.rho_from_dbw(config.mse_power_dbw), config.coherence_symbols, config.pilot_symbols
    )
    stats = csi.ideal_statistics(net.beta, pilots, split.rho_p)
    median_beta = float(np.median(net.beta))
    uniform_row = np.full(config.user_count, median_beta)
    uniform_stats = csi.ideal_statistics(uniform_row[None, :], pilots, split.rho_p)
    picker = seed_substream(config.master_seed, 1, "validate-qe-links")
    m_idx = picker.integers(0, config.ap_count, size=config.validate_moment_links)
    k_idx = picker.integers(0, config.user_count, size=config.validate_moment_links)
    checks = []
    finite_levels = [int(v) for v in config.levels if np.isfinite(v)]
    for levels in finite_levels:
        quantizer = QuantizerSpec(levels=levels, step=optimal_step(levels))
        factors = bussgang_factors(quantizer.step, quantizer.levels)
        rng = seed_substream(config.master_seed, levels, "validate-qe-algebra")
        c_hat = moment_qe_coefficient(
            uniform_row, pilots, split.rho_p, 0, quantizer,
            config.validate_moment_draws, rng,
        )
        c_closed = csi.qe_statistics(uniform_stats, factors).c[0, 0]
        checks.append(
            _check(
                f"qe-coefficient-algebra-L{levels}",
                abs(c_hat - c_closed) / c_closed,
                0.02,
                draws=int(config.validate_moment_draws),
            )
        )
        qe_stats = csi.qe_statistics(stats, factors)
        devs = []
        for j, (m, k) in enumerate(zip(m_idx, k_idx)):
            rng = seed_substream(config.master_seed, levels * 1000 + j, "validate-qe-moments")
            c_link = moment_qe_coefficient(
                net.beta[m], pilots, split.rho_p, int(k), quantizer,
                config.validate_moment_draws, rng,
            )
            devs.append(abs(c_link - qe_stats.c[m, k]) / qe_stats.c[m, k])
        checks.append(
            _check(
                f"qe-coefficient-network-L{levels}",
                float(np.median(devs)),
                0.30,
                links=int(config.validate_moment_links),
                draws=int(config.validate_moment_draws),
            )
        )
    return checks


# ---------------------------------------------------------------------------
# Per-link MSE: closed forms vs Monte Carlo
# ---------------------------------------------------------------------------

def check_empirical_mse(config: SimulationConfig) -> list[dict]:
    """Analytic per-link MSE against the Monte-Carlo oracle, all schemes."""
    rng_net = seed_substream(config.master_seed, 0, "validate-mse-network")
    net = propagation.draw_network(config.geometry(), config.path_loss(), rng_net)
    pilots = csi.make_pilots(config.pilot_symbols, config.user_count)
    split = csi.power_split(
        config.rho_from_dbw(config.mse_power_dbw), config.coherence_symbols, config.pilot_symbols
    )
    stats = csi.ideal_statistics(net.beta, pilots, split.rho_p)
    trials = config.validate_mse_fading
    cases = [("ideal", None, stats.epsilon, 0.05)]
    finite_levels = [int(v) for v in config.levels if np.isfinite(v)]
    if finite_levels:
        levels = finite_levels[0]
        quantizer = QuantizerSpec(levels=levels, step=optimal_step(levels))
        factors = bussgang_factors(quantizer.step, quantizer.levels)
        shrink = 2.0 * factors.alpha - factors.lam
        cases.append(("eq", quantizer, stats.beta - shrink * stats.gamma, 0.10))
        cases.append(("qe", quantizer, csi.qe_statistics(stats, factors).epsilon, 0.10))
    checks = []
    for i, (scheme, quantizer, analytic, tol) in enumerate(cases):
        rng = seed_substream(config.master_seed, i, "validate-mse-trials")
        measured = csi.empirical_mse(scheme, net.beta, pilots, split, quantizer, trials, rng)
        rel = np.abs(measured - analytic) / analytic
        checks.append(
            _check(
                f"empirical-mse-{scheme}",
                float(np.median(rel)),
                tol,
                trials=int(trials),
            )
        )
    return checks


# ---------------------------------------------------------------------------
# Symbol-level SINR vs the diagonal effective-noise model
# ---------------------------------------------------------------------------

def symbol_sinr_oracle(
    beta: np.ndarray,
    pilots: csi.PilotBook,
    split: csi.PowerSplit,
    scheme: str,
    quantizer: QuantizerSpec | None,
    blocks: int,
    symbols: int,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Decode Gaussian symbols through the full chain, per coherence block.

    Returns (empirical per-user SINR, model per-user SINR), both pooled
    over blocks: the empirical error power comes from detected symbols,
    the model error power from [A^H Lambda A]_kk averaged over blocks.
    """
    from .quantizer import PASS_THROUGH

    beta = np.asarray(beta, dtype=float)
    k = beta.shape[1]
    stats0 = csi.ideal_statistics(beta, pilots, split.rho_p)
    factors = PASS_THROUGH if quantizer is None else bussgang_factors(
        quantizer.step, quantizer.levels
    )
    err_acc = np.zeros(k)
    den_acc = np.zeros(k)
    beta_sums = beta.sum(axis=1)
    for _ in range(blocks):
        gains = propagation.draw_fading(beta, rng, 1)[0]
        y_pilot = csi.receive_pilots(gains, pilots, split.rho_p, rng)
        est, sch_stats = csi.estimate_for_scheme(y_pilot, pilots, stats0, scheme, quantizer)
        lam = detection.lambda_diagonal(sch_stats.epsilon, beta, split.rho_u, factors)
        x = complex_normal(rng, (k, symbols))
        y = detection.receive_data(gains, x, split.rho_u, rng)
        r = detection.quantize_data(y, beta_sums, split.rho_u, quantizer)
        q, rr = np.linalg.qr(est.g_hat)
        detected = np.linalg.solve(rr, q.conj().T @ r)
        err = detected - np.sqrt(split.rho_u) * factors.alpha * x
        err_acc += (np.abs(err) ** 2).mean(axis=1)
        core = (q.conj().T * lam) @ q
        rr_inv = np.linalg.solve(rr, np.eye(k, dtype=rr.dtype))
        den_acc += np.real(np.diagonal(rr_inv @ core @ rr_inv.conj().T))
    scale = split.rho_u * factors.alpha**2
    return scale * blocks / err_acc, scale * blocks / den_acc


def check_symbol_sinr(config: SimulationConfig) -> list[dict]:
    """End-to-end decoded SINR against the model at high resolution."""
    rng_net = seed_substream(config.master_seed, 0, "validate-sinr-network")
    net = propagation.draw_network(config.geometry(), config.path_loss(), rng_net)
    pilots = csi.make_pilots(config.pilot_symbols, config.user_count)
    split = csi.power_split(
        config.rho_from_dbw(config.mse_power_dbw), config.coherence_symbols, config.pilot_symbols
    )
    finite = [int(v) for v in config.levels if np.isfinite(v)]
    fine = max(finite) if finite else None
    cases = [("ideal", None)]
    if fine is not None:
        cases.append(("qe", QuantizerSpec(levels=fine, step=optimal_step(fine))))
    checks = []
    for i, (scheme, quantizer) in enumerate(cases):
        rng = seed_substream(config.master_seed, i, "validate-sinr-trials")
        empirical, model = symbol_sinr_oracle(
            net.beta, pilots, split, scheme, quantizer,
            config.validate_sinr_blocks, config.validate_sinr_symbols, rng,
        )
        rel = np.abs(empirical - model) / model
        tag = "inf" if quantizer is None else str(quantizer.levels)
        checks.append(
            _check(
                f"symbol-sinr-{scheme}-L{tag}",
                float(np.median(rel)),
                0.10,
                blocks=int(config.validate_sinr_blocks),
            )
        )
    return checks


# ---------------------------------------------------------------------------
# Cheap structural identities
# ---------------------------------------------------------------------------

def check_structural(config: SimulationConfig) -> list[dict]:
    model = config.path_loss()
    left = propagation.path_loss_db(config.d1_km * (1 - 1e-13), model)
    right = propagation.path_loss_db(config.d1_km * (1 + 1e-13), model)
    cont_d1 = abs(left - right)
    left0 = propagation.path_loss_db(config.d0_km * (1 - 1e-13), model)
    right0 = propagation.path_loss_db(config.d0_km * (1 + 1e-13), model)
    cont_d0 = abs(left0 - right0)
    pilots = csi.make_pilots(config.pilot_symbols, config.user_count)
    rho_p = 3.7
    theta = pilots.theta(rho_p)
    gram_err = np.abs(
        theta.conj().T @ theta - pilots.tau_p * rho_p * np.eye(pilots.user_count)
    ).max() / (pilots.tau_p * rho_p)
    checks = [
        _check("pathloss-continuity-d1", cont_d1, 1e-10),
        _check("pathloss-continuity-d0", cont_d0, 1e-10),
        _check("pilot-gram-identity", gram_err, 1e-10),
    ]
    finite = [int(v) for v in config.levels if np.isfinite(v)]
    worst = 0.0
    for levels in finite:
        f = bussgang_factors(optimal_step(levels), levels)
        worst = max(worst, abs(f.alpha**2 + f.distortion_factor - f.lam))
    checks.append(_check("quantizer-power-conservation", worst, 1e-12))
    return checks


def run_all_checks(config: SimulationConfig) -> list[dict]:
    checks = []
    checks.extend(check_bussgang_factors(config))
    checks.extend(check_qe_coefficient(config))
    checks.extend(check_empirical_mse(config))
    checks.extend(check_symbol_sinr(config))
    checks.extend(check_structural(config))
    return checks
