"""Simulation configuration with defaults matching the reference scenario.

A configuration can be loaded from a JSON file whose keys mirror the
dataclass fields exactly; unknown keys are rejected. The infinite
resolution entry in ``levels`` is spelled "inf" in files and on the
command line and behaves as a pass-through quantizer.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

from .propagation import GeometryConfig, PathLossModel, noise_power, normalized_snr

VALID_SCHEMES = ("eq", "qe", "ideal")


def _normalize_levels(values) -> tuple:
    out = []
    for v in values:
        if isinstance(v, str):
            if v.lower() not in ("inf", "infinity"):
                raise ValueError(f"unrecognized level {v!r}")
            out.append(math.inf)
            continue
        if math.isinf(v):
            out.append(math.inf)
            continue
        iv = int(v)
        if iv != v or iv < 2 or iv % 2 != 0:
            raise ValueError(f"quantization levels must be even integers >= 2 or inf, got {v}")
        out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class SimulationConfig:
    """Every knob of the Monte-Carlo experiments, with full-scale defaults."""

    # network geometry
    ap_count: int = 200
    user_count: int = 20
    area_side_km: float = 1.0
    wrap: bool = True
    # path loss / shadowing
    freq_mhz: float = 1900.0
    ap_height_m: float = 15.0
    user_height_m: float = 1.65
    d0_km: float = 0.01
    d1_km: float = 0.05
    shadow_std_db: float = 8.0
    # frame structure
    coherence_symbols: int = 200
    pilot_symbols: int = 20
    orthogonal_pilots: bool = True
    # noise budget
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 9.0
    noise_temperature_k: float = 290.0
    # experiment axes
    levels: tuple = (2, 4, 8, 32)
    schemes: tuple = ("eq", "qe", "ideal")
    powers_dbw: tuple = tuple(range(-10, 21, 2))
    mse_power_dbw: float = 0.0
    # Monte-Carlo structure: outer geometry/shadowing loop, inner fading loop
    trials_geometry: int = 100
    trials_fading: int = 200
    mrc_symbols: int = 50
    sinr_cap: float = 1e9
    master_seed: int = 20230915
    threads: int = 1
    exact_sinr: bool = False
    # validation suite sample sizes
    validate_bussgang_samples: int = 1_000_000
    validate_moment_draws: int = 200_000
    validate_moment_links: int = 6
    validate_mse_fading: int = 1_000
    validate_sinr_blocks: int = 150
    validate_sinr_symbols: int = 200

    def __post_init__(self):
        object.__setattr__(self, "levels", _normalize_levels(self.levels))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "powers_dbw", tuple(float(p) for p in self.powers_dbw))
        for scheme in self.schemes:
            if scheme not in VALID_SCHEMES:
                raise ValueError(f"unknown scheme {scheme!r}; valid: {VALID_SCHEMES}")
        if not self.schemes:
            raise ValueError("need at least one scheme")
        if not self.powers_dbw:
            raise ValueError("need at least one transmit power")
        if not 0 < self.pilot_symbols < self.coherence_symbols:
            raise ValueError("need 0 < pilot_symbols < coherence_symbols")
        if self.orthogonal_pilots and self.pilot_symbols != self.user_count:
            raise ValueError(
                "orthogonal pilot mode fixes pilot_symbols = user_count, got "
                f"{self.pilot_symbols} != {self.user_count}"
            )
        if self.user_count > self.pilot_symbols:
            raise ValueError("orthogonal pilots need user_count <= pilot_symbols")
        for name in ("trials_geometry", "trials_fading", "mrc_symbols", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")

    # ---- derived pieces -------------------------------------------------

    def geometry(self) -> GeometryConfig:
        return GeometryConfig(
            ap_count=self.ap_count,
            user_count=self.user_count,
            area_side_km=self.area_side_km,
            wrap=self.wrap,
        )

    def path_loss(self) -> PathLossModel:
        return PathLossModel(
            freq_mhz=self.freq_mhz,
            ap_height_m=self.ap_height_m,
            user_height_m=self.user_height_m,
            d0_km=self.d0_km,
            d1_km=self.d1_km,
            shadow_std_db=self.shadow_std_db,
        )

    def noise_power_w(self) -> float:
        return noise_power(self.bandwidth_hz, self.noise_figure_db, self.noise_temperature_k)

    def rho_from_dbw(self, power_dbw: float) -> float:
        """Normalized transmit SNR for a transmit power in dBW."""
        return normalized_snr(10.0 ** (power_dbw / 10.0), self.noise_power_w())

    @property
    def data_symbols(self) -> int:
        return self.coherence_symbols - self.pilot_symbols

    # ---- (de)serialization ----------------------------------------------

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["levels"] = ["inf" if math.isinf(v) else int(v) for v in self.levels]
        doc["schemes"] = list(self.schemes)
        doc["powers_dbw"] = list(self.powers_dbw)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "SimulationConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("configuration file must hold a JSON object")
        return cls.from_dict(doc)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)


def desk_scale_config(**overrides) -> SimulationConfig:
    """Reduced-size configuration for quick runs and the qualitative checks."""
    base = dict(
        ap_count=100,
        user_count=10,
        pilot_symbols=10,
        trials_geometry=20,
        trials_fading=100,
        levels=(2, 4, 8),
    )
    base.update(overrides)
    return SimulationConfig(**base)
