#!/usr/bin/env python3
"""Compare the four cluster-ToA assignment methods on one synthetic run.

For each method, builds the split-sensor arrival-time-difference histogram
and reports its peak FWHM; exports every histogram as CSV for plotting.
Mean ToA is dragged wide by dim edge pixels with large time-walk delays;
taking the ToA of the brightest (max-ToT) pixel gives the best resolution,
with earliest-ToA and center-pixel close behind.
"""

import argparse
import os

from tpxcal import stream_io
from tpxcal.centroiding import ToAMethod, centroid_stream
from tpxcal.clustering import ClusterParams, identify_clusters
from tpxcal.coincidence import fwhm, split_sensor_dtoa, temporal_resolution
from tpxcal.synth import SynthConfig, generate_stream, uniform_efficiency


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="timing_out")
    ap.add_argument("--pairs", type=float, default=4e5, help="emitted pair count")
    ap.add_argument("--seed", type=int, default=101)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    cfg = SynthConfig(
        pair_rate=2e6,
        duration=args.pairs / 2e6,
        rng_seed=args.seed,
        efficiency_truth=uniform_efficiency(0.5),
        ring_radius_px=80.0,
        ring_sigma_px=25.0,
        anticorrelation_sigma_px=4.0,
        jitter_sigma_ns=2.815,  # one detection: 7.3 ns FWHM total
        psf_sigma_px=2.0,
        mean_cluster_size=10.0,
        timewalk_coeff_ns=200.0,
    )
    stream, _ = generate_stream(cfg)
    clusters = identify_clusters(stream, ClusterParams())
    print(f"{len(stream)} events -> {len(clusters)} clusters")
    print(f"{'method':>10s} {'FWHM ns':>9s} {'resolution ns':>14s}")
    for method in ToAMethod:
        cents = centroid_stream(clusters, method)
        hist = split_sensor_dtoa(cents, cfg.beam_center)
        stream_io.export_histogram(hist, os.path.join(args.out_dir, f"dtoa_{method.cli_name}.csv"))
        width = fwhm(hist)
        print(f"{method.cli_name:>10s} {width:9.2f} {temporal_resolution(width):14.2f}")


if __name__ == "__main__":
    main()
