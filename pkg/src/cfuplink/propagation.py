"""Network geometry, large-scale fading and Rayleigh channel generation.

APs and users are dropped uniformly in a square area; distances use the
torus (wrap-around) metric by default to suppress boundary effects. The
large-scale gain of every AP-user link combines a three-slope path loss
with log-normal shadowing; small-scale fading is i.i.d. circularly
symmetric complex Gaussian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

#: Thermal-noise constant (J/K) used in the noise power budget.
BOLTZMANN = 1.381e-23


@dataclass(frozen=True)
class GeometryConfig:
    """Square service area with ``ap_count`` APs and ``user_count`` users."""

    ap_count: int
    user_count: int
    area_side_km: float = 1.0
    wrap: bool = True

    def __post_init__(self):
        if self.user_count < 1:
            raise ValueError("need at least one user")
        if self.ap_count < self.user_count:
            raise ValueError(
                f"zero forcing needs ap_count >= user_count, got "
                f"{self.ap_count} < {self.user_count}"
            )
        if not self.area_side_km > 0:
            raise ValueError("area side must be positive")


@dataclass(frozen=True)
class PathLossModel:
    """Three-slope path loss with log-normal shadowing.

    ``freq_mhz`` enters the attenuation constant in MHz. Distances below
    ``d0_km`` see a constant near-field loss, distances up to ``d1_km``
    a 20 dB/decade slope, and beyond that 35 dB/decade.
    """

    freq_mhz: float = 1900.0
    ap_height_m: float = 15.0
    user_height_m: float = 1.65
    d0_km: float = 0.01
    d1_km: float = 0.05
    shadow_std_db: float = 8.0

    def __post_init__(self):
        if not (0 < self.d0_km < self.d1_km):
            raise ValueError("breakpoints must satisfy 0 < d0 < d1")
        if self.shadow_std_db < 0:
            raise ValueError("shadowing standard deviation must be nonnegative")
        if self.freq_mhz <= 0 or self.ap_height_m <= 0 or self.user_height_m <= 0:
            raise ValueError("frequency and antenna heights must be positive")


@dataclass(frozen=True)
class NetworkRealization:
    """One drop: positions in km and the M x K large-scale gain matrix."""

    ap_positions: np.ndarray
    user_positions: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class ChannelRealization:
    """One small-scale fading draw g_mk = h_mk * sqrt(beta_mk)."""

    gains: np.ndarray
    network: NetworkRealization


def wrap_distance(p, q, side: float):
    """Minimum distance between points on the side x side torus.

    Equivalent to the minimum over the nine translated copies of q.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff = np.abs(p - q)
    diff = np.minimum(diff, side - diff)
    return np.sqrt((diff**2).sum(axis=-1))


def _pair_distances(aps, users, side, wrap):
    diff = np.abs(aps[:, None, :] - users[None, :, :])
    if wrap:
        diff = np.minimum(diff, side - diff)
    return np.sqrt((diff**2).sum(axis=-1))


def attenuation_constant(model: PathLossModel) -> float:
    """Fixed attenuation term of the three-slope model, in dB."""
    lf = np.log10(model.freq_mhz)
    return (
        46.3
        + 33.9 * lf
        - 13.83 * np.log10(model.ap_height_m)
        - (1.1 * lf - 0.7) * model.user_height_m
        + (1.56 * lf - 0.8)
    )


def path_loss_db(d, model: PathLossModel):
    """Three-slope path loss in dB at distance d (km, scalar or array)."""
    d = np.asarray(d, dtype=float)
    att = attenuation_constant(model)
    mid_const = -att - 15.0 * np.log10(model.d1_km)
    # Guard the log for the constant near-field branch (covers d = 0).
    safe = np.maximum(d, model.d0_km / 2.0)
    far = -att - 35.0 * np.log10(safe)
    mid = mid_const - 20.0 * np.log10(safe)
    near = mid_const - 20.0 * np.log10(model.d0_km)
    out = np.where(d > model.d1_km, far, np.where(d > model.d0_km, mid, near))
    if out.ndim == 0:
        return float(out)
    return out


def draw_network(geom: GeometryConfig, model: PathLossModel, rng) -> NetworkRealization:
    """Drop positions uniformly and draw shadowing; returns linear-scale beta."""
    side = geom.area_side_km
    aps = rng.uniform(0.0, side, size=(geom.ap_count, 2))
    users = rng.uniform(0.0, side, size=(geom.user_count, 2))
    d = _pair_distances(aps, users, side, geom.wrap)
    pl_db = path_loss_db(d, model)
    shadow_db = model.shadow_std_db * rng.standard_normal(d.shape)
    beta = 10.0 ** ((pl_db + shadow_db) / 10.0)
    return NetworkRealization(ap_positions=aps, user_positions=users, beta=beta)


def draw_fading(beta: np.ndarray, rng, draws: int) -> np.ndarray:
    """Stack of ``draws`` channel matrices with per-entry variance beta."""
    shape = (draws, *beta.shape)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.sqrt(beta) * h


def draw_channel(net: NetworkRealization, rng) -> ChannelRealization:
    """One small-scale realization G = H .* sqrt(beta)."""
    return ChannelRealization(gains=draw_fading(net.beta, rng, 1)[0], network=net)


def noise_power(bandwidth_hz: float, noise_figure_db: float, temperature_k: float = 290.0) -> float:
    """Receiver noise power B * k_b * T0 * noise figure, in Watt."""
    if bandwidth_hz <= 0 or temperature_k <= 0:
        raise ValueError("bandwidth and temperature must be positive")
    return bandwidth_hz * BOLTZMANN * temperature_k * 10.0 ** (noise_figure_db / 10.0)


def normalized_snr(tx_power_w: float, noise_w: float) -> float:
    """Transmit power over noise power (the dimensionless rho)."""
    if noise_w <= 0:
        raise ValueError("noise power must be positive")
    return tx_power_w / noise_w


def network_to_dict(net: NetworkRealization) -> dict:
    """JSON-ready document: positions as [x, y] km, beta row-major linear."""
    return {
        "ap_positions": [[float(x), float(y)] for x, y in net.ap_positions],
        "user_positions": [[float(x), float(y)] for x, y in net.user_positions],
        "beta": [[float(v) for v in row] for row in net.beta],
    }


def network_from_dict(doc: dict) -> NetworkRealization:
    return NetworkRealization(
        ap_positions=np.asarray(doc["ap_positions"], dtype=float),
        user_positions=np.asarray(doc["user_positions"], dtype=float),
        beta=np.asarray(doc["beta"], dtype=float),
    )


def save_network(net: NetworkRealization, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)


def load_network(path) -> NetworkRealization:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))
