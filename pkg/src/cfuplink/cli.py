"""Command line front end for the simulator."""

from __future__ import annotations

import argparse
import math
import sys

from .config import SimulationConfig
from .experiments import (
    run_mse_cdf,
    run_quantizer_table,
    run_throughput_sweep,
    run_validation,
    export_networks,
    write_result,
)


def parse_levels(text: str) -> tuple:
    """Parse a level list like ``2,4,8,32,inf``."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        out.append(math.inf if item.lower() in ("inf", "infinity") else int(item))
    if not out:
        raise argparse.ArgumentTypeError("empty level list")
    return tuple(out)


def parse_powers(text: str) -> tuple:
    """Parse a power sweep: ``start:step:stop`` (inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("power range must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise argparse.ArgumentTypeError("power step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise argparse.ArgumentTypeError("empty power range")
        return tuple(start + i * step for i in range(count))
    return tuple(float(p) for p in text.split(","))


def _add_common(parser, levels=True, trials=True):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--threads", type=int, help="worker threads for the outer loop")
    if levels:
        parser.add_argument("--levels", type=parse_levels,
                            help="quantization levels, e.g. 2,4,8,32,inf")
    if trials:
        parser.add_argument("--trials-geo", type=int, dest="trials_geo",
                            help="geometry realizations")
        parser.add_argument("--trials-fading", type=int, dest="trials_fading",
                            help="small-scale fading realizations per geometry")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfuplink",
        description="Link-level Monte-Carlo simulator for the cell-free "
                    "massive MIMO uplink with coarsely quantized fronthaul.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mse-cdf", help="channel estimation MSE distributions")
    _add_common(p)
    p.add_argument("--power-dbw", type=float, dest="power_dbw",
                   help="transmit power for the MSE experiment")
    p.add_argument("--export-networks", action="store_true",
                   help="also write the geometry realizations as JSON")

    p = sub.add_parser("throughput-sweep", help="per-user net throughput vs power")
    _add_common(p)
    p.add_argument("--powers-dbw", type=parse_powers, dest="powers_dbw",
                   help="sweep as start:step:stop or comma list, in dBW")
    p.add_argument("--exact-sinr", action="store_true", dest="exact_sinr",
                   help="also record rates from the exact ZF SINR")

    p = sub.add_parser("quantizer-table", help="optimal step and factors per level")
    p.add_argument("--levels", type=parse_levels, default=(2, 4, 8, 32, math.inf))
    p.add_argument("--out", default="results")

    p = sub.add_parser("validate", help="run the Monte-Carlo validation suite")
    _add_common(p, levels=True, trials=False)
    return parser


def _config_from_args(args) -> SimulationConfig:
    if args.config:
        config = SimulationConfig.from_file(args.config)
    else:
        config = SimulationConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if getattr(args, "levels", None) is not None:
        overrides["levels"] = args.levels
    if getattr(args, "trials_geo", None) is not None:
        overrides["trials_geometry"] = args.trials_geo
    if getattr(args, "trials_fading", None) is not None:
        overrides["trials_fading"] = args.trials_fading
    if getattr(args, "powers_dbw", None) is not None:
        overrides["powers_dbw"] = args.powers_dbw
    if getattr(args, "power_dbw", None) is not None:
        overrides["mse_power_dbw"] = args.power_dbw
    if getattr(args, "exact_sinr", False):
        overrides["exact_sinr"] = True
    if overrides:
        config = config.replace(**overrides)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "quantizer-table":
        result = run_quantizer_table(args.levels)
        paths = write_result(result, args.out)
        for row in result.tables["quantizer_table"][1]:
            sdnr_db = row["sdnr_db"]
            sdnr_txt = "inf" if math.isinf(sdnr_db) else f"{sdnr_db:8.4f}"
            delta_txt = f"{row['delta_star']:.6f}" if row["delta_star"] != "" else "       -"
            print(f"L={row['levels']:>4}  delta*={delta_txt}  alpha={row['alpha']:.6f}  "
                  f"lambda={row['lambda']:.6f}  SDNR={sdnr_txt} dB")
        print(f"wrote {paths['quantizer_table']}")
        return 0

    config = _config_from_args(args)

    if args.command == "mse-cdf":
        result = run_mse_cdf(config)
        paths = write_result(result, args.out)
        if args.export_networks:
            export_networks(config, args.out)
        for name, value in sorted(result.metrics["ks_distance"].items()):
            print(f"KS distance {name}: {value:.4f}")
        print(f"wrote {paths['mse_cdf']}")
        return 0

    if args.command == "throughput-sweep":
        result = run_throughput_sweep(config)
        paths = write_result(result, args.out)
        print(f"swept {len(config.powers_dbw)} powers x "
              f"{len(result.tables['throughput_sweep'][1])} rows")
        print(f"wrote {paths['throughput_sweep']}")
        return 0

    if args.command == "validate":
        result = run_validation(config)
        paths = write_result(result, args.out)
        for row in result.tables["validate"][1]:
            status = "PASS" if row["passed"] else "FAIL"
            print(f"{status}  {row['check']}: measured={row['measured']:.3e} "
                  f"tolerance={row['tolerance']:.3e}")
        failed = result.metrics["checks_failed"]
        print(f"{result.metrics['checks_total'] - failed}/"
              f"{result.metrics['checks_total']} checks passed; "
              f"wrote {paths['validate']}")
        return 0

    return 2  # unreachable, subparsers are required


if __name__ == "__main__":
    sys.exit(main())
