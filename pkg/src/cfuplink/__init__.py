"""Link-level simulator for the cell-free massive MIMO uplink with
coarsely quantized fronthaul."""

__version__ = "0.1.0"

from .config import SimulationConfig, desk_scale_config
from .quantizer import (
    BussgangFactors,
    QuantizerSpec,
    alpha_factor,
    bussgang_factors,
    lambda_factor,
    optimal_step,
    sdnr,
)
from .propagation import (
    ChannelRealization,
    GeometryConfig,
    NetworkRealization,
    PathLossModel,
    draw_channel,
    draw_network,
    noise_power,
    normalized_snr,
)
from .csi import (
    CsiEstimate,
    EstimationStatistics,
    PilotBook,
    PowerSplit,
    make_pilots,
    power_split,
)
from .experiments import (
    AggregateResult,
    run_mse_cdf,
    run_quantizer_table,
    run_throughput_sweep,
    run_validation,
)

__all__ = [
    "__version__",
    "AggregateResult",
    "BussgangFactors",
    "ChannelRealization",
    "CsiEstimate",
    "EstimationStatistics",
    "GeometryConfig",
    "NetworkRealization",
    "PathLossModel",
    "PilotBook",
    "PowerSplit",
    "QuantizerSpec",
    "SimulationConfig",
    "alpha_factor",
    "bussgang_factors",
    "desk_scale_config",
    "draw_channel",
    "draw_network",
    "lambda_factor",
    "make_pilots",
    "noise_power",
    "normalized_snr",
    "optimal_step",
    "power_split",
    "run_mse_cdf",
    "run_quantizer_table",
    "run_throughput_sweep",
    "run_validation",
    "sdnr",
]
