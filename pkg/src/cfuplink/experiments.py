"""Experiment drivers with deterministic parallel Monte-Carlo orchestration.

The outer loop draws network geometry and shadowing, the inner loop
small-scale fading and noise. Every trial derives its own random
substreams from (master seed, trial index, stage tag) and trials are
reduced in index order, so outputs are identical for any worker count.
Both CSI transfer schemes within a trial see the same channel and noise
draws, which sharpens scheme comparisons at no statistical cost.
"""

from __future__ import annotations

import csv as _csv
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import csi, detection, propagation
from .config import SimulationConfig
from .quantizer import (
    PASS_THROUGH,
    QuantizerSpec,
    bussgang_factors,
    optimal_step,
    sdnr,
)
from .rng import complex_normal, seed_substream

#: Number of (value, cumulative probability) pairs emitted per CDF curve.
CDF_GRID_POINTS = 513


@dataclass
class AggregateResult:
    """Everything one experiment produced: tables for CSV, scalar metrics."""

    experiment: str
    config: SimulationConfig
    tables: dict = field(default_factory=dict)  # name -> (fieldnames, rows)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def _run_trials(task, count: int, threads: int) -> list:
    """Run trials 0..count-1, in-order results regardless of scheduling."""
    if threads <= 1:
        return [task(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(count)))


def _level_label(levels: float) -> str:
    return "inf" if math.isinf(levels) else str(int(levels))


def _quantizer_bank(config: SimulationConfig) -> dict:
    bank = {}
    for lv in config.levels:
        if math.isfinite(lv):
            bank[int(lv)] = QuantizerSpec(levels=int(lv), step=optimal_step(int(lv)))
    return bank


def _curve_list(config: SimulationConfig) -> list[tuple[str, float]]:
    """(scheme, levels) pairs swept by the throughput experiment."""
    finite = sorted(int(v) for v in config.levels if math.isfinite(v))
    has_inf = any(math.isinf(v) for v in config.levels)
    curves = []
    for scheme in config.schemes:
        if scheme == "ideal":
            continue
        for lv in finite:
            curves.append((scheme, float(lv)))
        if has_inf:
            curves.append((scheme, math.inf))
    if "ideal" in config.schemes:
        curves.append(("ideal", math.inf))
    return curves


def ks_distance(a, b) -> float:
    """Kolmogorov-Smirnov distance between two empirical sample sets."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def _cdf_rows(samples: np.ndarray) -> list[tuple[float, float]]:
    probs = np.linspace(0.0, 1.0, CDF_GRID_POINTS)
    values = np.quantile(np.asarray(samples, dtype=float), probs)
    return list(zip(values, probs))


# ---------------------------------------------------------------------------
# Quantizer table
# ---------------------------------------------------------------------------

def run_quantizer_table(levels) -> AggregateResult:
    """SDNR-optimal step plus Bussgang factors per level count."""
    start = time.perf_counter()
    rows = []
    for lv in levels:
        if math.isinf(lv):
            rows.append(
                {"levels": "inf", "delta_star": "", "alpha": 1.0, "lambda": 1.0,
                 "sdnr_db": math.inf}
            )
            continue
        lv = int(lv)
        step = optimal_step(lv)
        f = bussgang_factors(step, lv)
        rows.append(
            {"levels": str(lv), "delta_star": step, "alpha": f.alpha, "lambda": f.lam,
             "sdnr_db": 10.0 * math.log10(sdnr(step, lv))}
        )
    result = AggregateResult(experiment="quantizer_table", config=None)
    result.tables["quantizer_table"] = (
        ["levels", "delta_star", "alpha", "lambda", "sdnr_db"], rows,
    )
    result.timings["total_s"] = time.perf_counter() - start
    return result


# ---------------------------------------------------------------------------
# MSE CDF experiment
# ---------------------------------------------------------------------------

def _mse_cases(config: SimulationConfig, bank: dict) -> list[tuple[str, float]]:
    cases = []
    for scheme in config.schemes:
        if scheme == "ideal":
            cases.append(("ideal", math.inf))
            continue
        for lv in config.levels:
            cases.append((scheme, float(lv) if math.isfinite(lv) else math.inf))
    return cases


def _mse_geometry_task(config, pilots, bank, cases, split, geo_index):
    rng_geo = seed_substream(config.master_seed, geo_index, "geometry")
    net = propagation.draw_network(config.geometry(), config.path_loss(), rng_geo)
    beta = net.beta
    stats0 = csi.ideal_statistics(beta, pilots, split.rho_p)
    rng = seed_substream(config.master_seed, geo_index, "mse-fading")
    trials = config.trials_fading
    chunk = max(1, min(trials, 200))
    acc = {case: np.zeros_like(beta) for case in cases}
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        gains = propagation.draw_fading(beta, rng, n)
        y_pilot = csi.receive_pilots(gains, pilots, split.rho_p, rng)
        for scheme, lv in cases:
            quantizer = bank.get(int(lv)) if math.isfinite(lv) else None
            est, _ = csi.estimate_for_scheme(y_pilot, pilots, stats0, scheme, quantizer)
            acc[(scheme, lv)] += (np.abs(gains - est.g_hat) ** 2).sum(axis=0)
        done += n
    out = {}
    for scheme, lv in cases:
        quantizer = bank.get(int(lv)) if math.isfinite(lv) else None
        factors = PASS_THROUGH if quantizer is None else bussgang_factors(
            quantizer.step, quantizer.levels
        )
        if scheme == "ideal" or quantizer is None:
            analytic = stats0.epsilon
        elif scheme == "eq":
            analytic = stats0.beta - (2.0 * factors.alpha - factors.lam) * stats0.gamma
        else:
            analytic = csi.qe_statistics(stats0, factors).epsilon
        out[(scheme, lv)] = (analytic.ravel(), (acc[(scheme, lv)] / trials).ravel())
    return out


def run_mse_cdf(config: SimulationConfig) -> AggregateResult:
    """Analytic and Monte-Carlo per-link MSE distributions per scheme and level."""
    start = time.perf_counter()
    pilots = csi.make_pilots(config.pilot_symbols, config.user_count)
    bank = _quantizer_bank(config)
    cases = _mse_cases(config, bank)
    split = csi.power_split(
        config.rho_from_dbw(config.mse_power_dbw),
        config.coherence_symbols,
        config.pilot_symbols,
    )

    def task(geo_index):
        return _mse_geometry_task(config, pilots, bank, cases, split, geo_index)

    per_geo = _run_trials(task, config.trials_geometry, config.threads)
    sim_done = time.perf_counter()

    rows = []
    ks = {}
    qe_worse = {}
    pooled = {}
    for case in cases:
        analytic = np.concatenate([r[case][0] for r in per_geo])
        empirical = np.concatenate([r[case][1] for r in per_geo])
        pooled[case] = analytic
        scheme, lv = case
        label = _level_label(lv)
        ks[f"{scheme}-L{label}"] = ks_distance(analytic, empirical)
        for kind, samples in (("analytic", analytic), ("empirical", empirical)):
            for value, prob in _cdf_rows(samples):
                rows.append(
                    {"scheme": scheme, "levels": label, "kind": kind,
                     "value": value, "cum_prob": prob}
                )
    for lv in sorted({c[1] for c in cases if math.isfinite(c[1])}):
        eq_case, qe_case = ("eq", lv), ("qe", lv)
        if eq_case in pooled and qe_case in pooled:
            qe_worse[_level_label(lv)] = float(
                np.mean(pooled[qe_case] > pooled[eq_case])
            )

    result = AggregateResult(experiment="mse_cdf", config=config)
    result.tables["mse_cdf"] = (["scheme", "levels", "kind", "value", "cum_prob"], rows)
    result.metrics["ks_distance"] = ks
    if qe_worse:
        result.metrics["qe_worse_than_eq_fraction"] = qe_worse
    result.timings["simulate_s"] = sim_done - start
    result.timings["total_s"] = time.perf_counter() - start
    return result


# ---------------------------------------------------------------------------
# Throughput sweep experiment
# ---------------------------------------------------------------------------

def _throughput_geometry_task(config, pilots, bank, curves, geo_index):
    rng_geo = seed_substream(config.master_seed, geo_index, "geometry")
    net = propagation.draw_network(config.geometry(), config.path_loss(), rng_geo)
    beta = net.beta
    m, k = beta.shape
    n = config.trials_fading

    rng_fading = seed_substream(config.master_seed, geo_index, "fading")
    gains = propagation.draw_fading(beta, rng_fading, n)
    w_pilot = complex_normal(rng_fading, (n, m, pilots.tau_p))
    gains_phi = gains @ pilots.sequences.T

    rng_mrc = seed_substream(config.master_seed, geo_index, "mrc")
    x_sym = complex_normal(rng_mrc, (n, k, config.mrc_symbols))
    w_data = complex_normal(rng_mrc, (n, m, config.mrc_symbols))
    gains_h = np.swapaxes(gains, -1, -2).conj()
    gram_x = (gains_h @ gains) @ x_sym
    ghw = gains_h @ w_data
    col_power = (np.abs(gains) ** 2).sum(axis=1)

    out = {}
    for power in config.powers_dbw:
        rho = config.rho_from_dbw(power)
        split = csi.power_split(rho, config.coherence_symbols, config.pilot_symbols)
        stats0 = csi.ideal_statistics(beta, pilots, split.rho_p)
        y_pilot = np.sqrt(pilots.tau_p * split.rho_p) * gains_phi + w_pilot
        for scheme, lv in curves:
            quantizer = bank.get(int(lv)) if math.isfinite(lv) else None
            est, st = csi.estimate_for_scheme(y_pilot, pilots, stats0, scheme, quantizer)
            lam = detection.lambda_diagonal(st.epsilon, beta, split.rho_u, st.factors)
            sinr = detection.zf_approx_sinr(est.g_hat, lam, split.rho_u, st.factors.alpha)
            entry = {"rate": float(np.log2(1.0 + sinr).mean())}
            if config.exact_sinr:
                exact = np.empty((n, k))
                for i in range(n):
                    exact[i] = detection.zf_exact_sinr(
                        est.g_hat[i], lam, split.rho_u, st.factors.alpha
                    )
                entry["exact_rate"] = float(np.log2(1.0 + exact).mean())
            out[(scheme, lv, power)] = entry
        x_hat = np.sqrt(split.rho_u) * gram_x + ghw
        h_eff = np.sqrt(split.rho_u) * col_power
        sinr = detection.conditional_sinr(h_eff, x_sym, x_hat, config.sinr_cap)
        out[("mrc", math.inf, power)] = {"rate": float(np.log2(1.0 + sinr).mean())}
    return out


def run_throughput_sweep(config: SimulationConfig) -> AggregateResult:
    """Average per-user net throughput over the transmit-power sweep.

    Every configured (scheme, levels) pair is swept alongside the
    unquantized zero-forcing reference (scheme ``ideal``) and the
    infinite-resolution local-CSI MRC baseline (scheme ``mrc``).
    """
    start = time.perf_counter()
    pilots = csi.make_pilots(config.pilot_symbols, config.user_count)
    bank = _quantizer_bank(config)
    curves = _curve_list(config)

    def task(geo_index):
        return _throughput_geometry_task(config, pilots, bank, curves, geo_index)

    per_geo = _run_trials(task, config.trials_geometry, config.threads)
    sim_done = time.perf_counter()

    overhead = (1.0 - config.pilot_symbols / config.coherence_symbols) / 2.0
    to_bps = config.bandwidth_hz * overhead
    all_curves = curves + [("mrc", math.inf)]
    rows = []
    n_geo = config.trials_geometry
    for scheme, lv in all_curves:
        for power in config.powers_dbw:
            rates = np.array([g[(scheme, lv, power)]["rate"] for g in per_geo])
            row = {
                "scheme": scheme,
                "levels": _level_label(lv),
                "power_dbw": power,
                "mean_rate_bits_per_symbol": rates.mean(),
                "mean_user_throughput_bps": to_bps * rates.mean(),
                "median_user_throughput_bps": to_bps * float(np.median(rates)),
                "ci_half_width_bps": (
                    to_bps * 1.96 * rates.std(ddof=1) / math.sqrt(n_geo)
                    if n_geo > 1 else 0.0
                ),
                "exact_mean_rate_bits_per_symbol": "",
                "exact_mean_user_throughput_bps": "",
            }
            if config.exact_sinr and scheme != "mrc":
                exact = np.array([g[(scheme, lv, power)]["exact_rate"] for g in per_geo])
                row["exact_mean_rate_bits_per_symbol"] = exact.mean()
                row["exact_mean_user_throughput_bps"] = to_bps * exact.mean()
            rows.append(row)

    result = AggregateResult(experiment="throughput_sweep", config=config)
    result.tables["throughput_sweep"] = (
        [
            "scheme", "levels", "power_dbw", "mean_rate_bits_per_symbol",
            "mean_user_throughput_bps", "median_user_throughput_bps",
            "ci_half_width_bps", "exact_mean_rate_bits_per_symbol",
            "exact_mean_user_throughput_bps",
        ],
        rows,
    )
    result.metrics["overhead_factor"] = overhead
    result.timings["simulate_s"] = sim_done - start
    result.timings["total_s"] = time.perf_counter() - start
    return result


def extract_curve(result: AggregateResult, scheme: str, levels: float,
                  column: str = "mean_user_throughput_bps") -> tuple[np.ndarray, np.ndarray]:
    """(powers, values) for one scheme/levels pair of a throughput sweep."""
    label = _level_label(levels)
    _, rows = result.tables["throughput_sweep"]
    picked = [(r["power_dbw"], r[column]) for r in rows
              if r["scheme"] == scheme and r["levels"] == label]
    picked.sort()
    powers = np.array([p for p, _ in picked], dtype=float)
    values = np.array([v for _, v in picked], dtype=float)
    return powers, values


def crossing_power(powers: np.ndarray, values: np.ndarray, target: float) -> float:
    """First power at which a nondecreasing curve reaches ``target``.

    Linear interpolation between the bracketing sweep points; raises if
    the curve never reaches the target inside the sweep.
    """
    values = np.asarray(values, dtype=float)
    above = np.nonzero(values >= target)[0]
    if above.size == 0:
        raise ValueError(f"curve never reaches {target}; max is {values.max():.4g}")
    j = int(above[0])
    if j == 0:
        return float(powers[0])
    p0, p1 = powers[j - 1], powers[j]
    v0, v1 = values[j - 1], values[j]
    return float(p0 + (target - v0) * (p1 - p0) / (v1 - v0))


# ---------------------------------------------------------------------------
# Validation suite
# ---------------------------------------------------------------------------

def run_validation(config: SimulationConfig) -> AggregateResult:
    """Run every Monte-Carlo oracle; failures are rows, not exceptions."""
    from . import validation

    start = time.perf_counter()
    checks = validation.run_all_checks(config)
    rows = [
        {"check": c["check"], "passed": c["passed"], "measured": c["measured"],
         "tolerance": c["tolerance"]}
        for c in checks
    ]
    result = AggregateResult(experiment="validate", config=config)
    result.tables["validate"] = (["check", "passed", "measured", "tolerance"], rows)
    result.metrics["checks_total"] = len(checks)
    result.metrics["checks_failed"] = int(sum(not c["passed"] for c in checks))
    result.metrics["all_passed"] = result.metrics["checks_failed"] == 0
    result.timings["total_s"] = time.perf_counter() - start
    return result


# ---------------------------------------------------------------------------
# Output serialization
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format_cell(row[name]) for name in fieldnames])


def write_result(result: AggregateResult, out_dir) -> dict:
    """Write one CSV per table plus the JSON run manifest; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, (fieldnames, rows) in result.tables.items():
        path = out / f"{name}.csv"
        write_csv(path, fieldnames, rows)
        paths[name] = path
    manifest = {
        "experiment": result.experiment,
        "config": result.config.to_dict() if result.config is not None else None,
        "master_seed": result.config.master_seed if result.config is not None else None,
        "config_hash": result.config.config_hash() if result.config is not None else None,
        "metrics": result.metrics,
        "timings": result.timings,
        "versions": {
            "cfuplink": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    manifest_path = out / f"{result.experiment}_manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["manifest"] = manifest_path
    return paths


def export_networks(config: SimulationConfig, out_dir, count: int | None = None) -> list:
    """Write the geometry realizations used by the experiments as JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = config.trials_geometry if count is None else count
    paths = []
    for g in range(count):
        rng = seed_substream(config.master_seed, g, "geometry")
        net = propagation.draw_network(config.geometry(), config.path_loss(), rng)
        path = out / f"network_{g:04d}.json"
        propagation.save_network(net, path)
        paths.append(path)
    return paths
