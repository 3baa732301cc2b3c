"""L-level uniform quantization and its Bussgang linearization.

The quantizer is midrise with step size ``step`` defined for an input
normalized to unit standard deviation per real component: interior
thresholds sit at (l - L/2)*step and the L reconstruction points at
(l - (L-1)/2)*step, so each reconstruction is the midpoint of its finite
cell. Inputs beyond the extreme thresholds saturate to the outermost
reconstruction. Cells are half-open on the left, (t_l, t_{l+1}], so an
input exactly on a threshold (including 0) falls into the lower cell.

For zero-mean Gaussian input the output decomposes as
Q(x) = alpha*x + d with d uncorrelated with x. ``alpha_factor`` and
``lambda_factor`` give the linear gain and the output/input power ratio
in closed form; ``empirical_bussgang`` is the Monte-Carlo cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Search bracket and relative tolerance for the optimal step size.
STEP_BRACKET = (1e-3, 6.0)
STEP_REL_TOL = 1e-6


def _validate_levels(levels: int) -> int:
    levels = int(levels)
    if levels < 2 or levels % 2 != 0:
        raise ValueError(f"level count must be an even integer >= 2, got {levels}")
    return levels


def gaussian_tail(x):
    """Upper-tail probability 1 - Phi(x) of the standard normal.

    Uses the complementary error function, which stays accurate deep in
    the tail where 1 - Phi(x) would cancel.
    """
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def gaussian_cdf(x):
    """Standard normal CDF Phi(x), erfc-based."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform midrise quantizer with ``levels`` cells of width ``step``.

    ``step`` is normalized to a unit-standard-deviation input; callers
    pass the a-priori sigma of the physical signal when quantizing.
    """

    levels: int
    step: float

    def __post_init__(self):
        _validate_levels(self.levels)
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"step size must be finite and positive, got {self.step}")

    @property
    def thresholds(self) -> np.ndarray:
        """Interior cell boundaries t_l = (l - L/2)*step, l = 1..L-1."""
        return (np.arange(1, self.levels) - self.levels / 2.0) * self.step

    @property
    def reconstructions(self) -> np.ndarray:
        """Reconstruction points q_l = (l - (L-1)/2)*step, l = 0..L-1."""
        return (np.arange(self.levels) - (self.levels - 1) / 2.0) * self.step

    @property
    def bits(self) -> float:
        return math.log2(self.levels)


@dataclass(frozen=True)
class BussgangFactors:
    """Linear gain ``alpha`` and output/input power ratio ``lam``."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if self.lam < self.alpha**2 - 1e-12:
            raise ValueError(
                f"power ratio {self.lam} below alpha^2 {self.alpha**2}; "
                "distortion power would be negative"
            )

    @property
    def distortion_factor(self) -> float:
        """Distortion power per unit input power, lam - alpha^2."""
        return self.lam - self.alpha**2


#: Transparent fronthaul (infinite resolution): Q(x) = x.
PASS_THROUGH = BussgangFactors(alpha=1.0, lam=1.0)


def quantize_real(x, spec: QuantizerSpec, sigma):
    """Quantize a real scalar or array with a-priori standard deviation sigma.

    Returns sigma * q_l where x/sigma falls in cell l; values beyond the
    extreme thresholds clamp to the outermost reconstruction.
    """
    x = np.asarray(x, dtype=float)
    sigma_arr = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("quantizer input must be finite")
    if not np.all(np.isfinite(sigma_arr)) or np.any(sigma_arr <= 0):
        raise ValueError("sigma must be finite and positive")
    u = x / sigma_arr
    # side="left" counts thresholds strictly below u, matching (t_l, t_{l+1}].
    idx = np.searchsorted(spec.thresholds, u, side="left")
    out = spec.reconstructions[idx] * sigma_arr
    if np.isscalar(x) or out.ndim == 0:
        return float(out)
    return out


def quantize_complex(x, spec: QuantizerSpec, sigma_component):
    """Quantize real and imaginary parts separately.

    ``sigma_component`` is the per-component (real/imaginary) standard
    deviation; for a circularly symmetric signal of power P that is
    sqrt(P/2).
    """
    x = np.asarray(x)
    out = quantize_real(x.real, spec, sigma_component) + 1j * quantize_real(
        x.imag, spec, sigma_component
    )
    if x.ndim == 0:
        return complex(out)
    return out


def alpha_factor(delta: float, levels: int) -> float:
    """Bussgang linear gain for unit-variance Gaussian input.

    alpha = delta/sqrt(2*pi) * (1 + 2*sum_{l=1}^{L/2-1} exp(-l^2 delta^2 / 2)),
    i.e. delta times the Gaussian density summed over the interior
    thresholds.
    """
    levels = _validate_levels(levels)
    if not delta > 0:
        raise ValueError(f"step size must be positive, got {delta}")
    l = np.arange(1, levels // 2)
    return delta / _SQRT_2PI * (1.0 + 2.0 * np.exp(-0.5 * (l * delta) ** 2).sum())


def lambda_factor(delta: float, levels: int) -> float:
    """Output/input power ratio for unit-variance Gaussian input.

    lam = delta^2 * (1/4 + 4*sum_{l=1}^{L/2-1} l*(1 - Phi(l*delta))).
    """
    levels = _validate_levels(levels)
    if not delta > 0:
        raise ValueError(f"step size must be positive, got {delta}")
    l = np.arange(1, levels // 2)
    return delta**2 * (0.25 + 4.0 * (l * gaussian_tail(l * delta)).sum())


def bussgang_factors(delta: float, levels: int) -> BussgangFactors:
    return BussgangFactors(alpha_factor(delta, levels), lambda_factor(delta, levels))


def distortion_power(input_power: float, factors: BussgangFactors) -> float:
    """Variance of the Bussgang distortion term, (lam - alpha^2) * input power."""
    if input_power < 0:
        raise ValueError(f"input power must be nonnegative, got {input_power}")
    return factors.distortion_factor * input_power


def sdnr(delta: float, levels: int) -> float:
    """Signal-to-distortion-noise ratio alpha^2 / (lam - alpha^2) at the output."""
    f = bussgang_factors(delta, levels)
    return f.alpha**2 / f.distortion_factor


def quantizer_mse(delta: float, levels: int) -> float:
    """Reconstruction MSE E{(Q(x)-x)^2} for unit-variance Gaussian input."""
    f = bussgang_factors(delta, levels)
    return f.lam - 2.0 * f.alpha + 1.0


def _golden_min(fn, lo: float, hi: float, rel_tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > rel_tol * 0.5 * (a + b):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def optimal_step(levels: int) -> float:
    """Step size maximizing the SDNR, by golden-section search.

    For levels == 2 the SDNR does not depend on the step, so the tie is
    broken by minimizing the unit-input reconstruction MSE instead.
    """
    levels = _validate_levels(levels)
    lo, hi = STEP_BRACKET
    if levels == 2:
        return _golden_min(lambda d: quantizer_mse(d, 2), lo, hi, STEP_REL_TOL)
    return _golden_min(lambda d: -sdnr(d, levels), lo, hi, STEP_REL_TOL)


def empirical_bussgang(spec: QuantizerSpec, samples: int, seed) -> BussgangFactors:
    """Monte-Carlo estimate of the Bussgang factors on Gaussian draws.

    alpha_hat = sum(x*Q(x)) / sum(x^2) and lam_hat = sum(Q(x)^2) / sum(x^2)
    over unit-variance real Gaussian samples. Deterministic given seed.
    """
    samples = int(samples)
    if samples < 100_000:
        raise ValueError(f"need at least 1e5 samples for a stable estimate, got {samples}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(samples)
    q = quantize_real(x, spec, 1.0)
    denom = float(np.dot(x, x))
    return BussgangFactors(float(np.dot(x, q)) / denom, float(np.dot(q, q)) / denom)
