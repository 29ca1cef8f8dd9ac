#!/usr/bin/env python3
"""Small end-to-end demo: synthesize a photon-pair acquisition in the 7.4%
efficiency regime, run the full pipeline, and print the summary report.

Writes all artifacts (events.tpxs, eta.csv/.pgm, stats.txt, ...) into the
output directory. Roughly 4M raw events; takes a few seconds.
"""

import argparse
import json

from tpxcal.pipeline import PipelineConfig, PipelineRun


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="demo_out")
    ap.add_argument("--seed", type=int, default=20240501)
    ap.add_argument("--pair-rate", type=float, default=5e6)
    ap.add_argument("--duration", type=float, default=0.5)
    args = ap.parse_args()

    cfg = PipelineConfig(
        pair_rate=args.pair_rate,
        duration=args.duration,
        seed=args.seed,
        out_dir=args.out_dir,
    )
    report = PipelineRun(cfg).run("full")
    print(json.dumps(report, indent=2, sort_keys=True))
    eff = report["efficiency"]
    print(
        f"\nrecovered efficiency {eff['masked_mean']:.4f} +- {eff['masked_std']:.4f} "
        f"(truth {cfg.efficiency_value}), "
        f"timing FWHM {report['dtoa_fwhm_ns']:.2f} ns "
        f"-> resolution {report['temporal_resolution_ns']:.2f} ns"
    )


if __name__ == "__main__":
    main()
