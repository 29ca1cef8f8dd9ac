"""Command-line entry point.

    tpxcal <stage> [--config run.cfg] [--out-dir out] [key overrides...]

Stages: synth | cluster | centroid | pairs | diag | efficiency | full.
Flag values override config-file values, which override built-in defaults.
Exit codes: 0 success, 2 config error, 3 I/O error, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import errors
from .pipeline import PipelineConfig, PipelineRun, load_config, config_from_mapping

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tpxcal", description=__doc__.strip().splitlines()[0])
    p.add_argument("stage", choices=["synth", "cluster", "centroid", "pairs", "diag", "efficiency", "full"])
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--input", help="existing .tpxs stream to ingest instead of synthesizing")
    p.add_argument("--seed", type=int)
    p.add_argument("--pair-rate", dest="pair_rate", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--background-rate", dest="background_rate", type=float)
    p.add_argument("--efficiency-value", dest="efficiency_value", type=float)
    p.add_argument("--box-xy", dest="box_xy", type=int)
    p.add_argument("--box-t-ns", dest="box_t_ns", type=float)
    p.add_argument("--lookahead", type=int)
    p.add_argument("--toa-method", dest="toa_method", choices=["mean", "center", "min-toa", "max-tot"])
    p.add_argument("--dtoa-ns", dest="dtoa_ns", type=float)
    p.add_argument("--sigma-xy", dest="sigma_xy_px", type=float)
    p.add_argument("--diag-dtoa-ns", dest="diag_dtoa_ns", type=float)
    p.add_argument("--axis", choices=["x", "y"])
    p.add_argument("--radius-px", dest="radius_px", type=int)
    p.add_argument("--denom-floor", dest="denom_floor", type=float)
    p.add_argument("--dead-zone-px", dest="dead_zone_px", type=int)
    p.add_argument("--field-radius-px", dest="field_radius_px", type=float)
    p.add_argument("--transmission", type=float)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: TPXCAL_THREADS or 1); never changes results")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: str(value)
        for key, value in vars(args).items()
        if key not in ("stage", "config") and value is not None
    }
    if "threads" not in overrides and os.environ.get("TPXCAL_THREADS"):
        overrides["threads"] = os.environ["TPXCAL_THREADS"]
    try:
        if args.config:
            cfg = load_config(args.config, overrides)
        else:
            cfg = config_from_mapping(overrides, base=PipelineConfig())
        report = PipelineRun(cfg).run(args.stage)
    except errors.ConfigError as exc:
        print(f"tpxcal: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (errors.IoFailure, FileNotFoundError, OSError) as exc:
        print(f"tpxcal: i/o error [{args.stage}]: {exc}", file=sys.stderr)
        return EXIT_IO
    except errors.TpxcalError as exc:
        print(f"tpxcal: data error [{args.stage}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps({"stage": args.stage, **report}, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
