"""Shared oracle runs and helpers.

The expensive synthetic runs are session fixtures so the unit tests and the
acceptance suite reuse one generation each. Configurations here are the
frozen acceptance configurations; see tests/test_acceptance.py for what
each one is sized to demonstrate.
"""

import numpy as np
import pytest

from tpxcal.centroiding import ToAMethod, centroid_stream
from tpxcal.clustering import ClusterParams, identify_clusters
from tpxcal.synth import SynthConfig, generate_stream, uniform_efficiency


def seed_labels(clusters, truth):
    """Photon label of each cluster's seed event (cluster id order).

    A cheap centroid->photon map: with purity > 0.99 the seed's label is the
    cluster's majority label except in a negligible tail.
    """
    indptr, indices = clusters.membership
    return truth.event_labels[indices[indptr[:-1]]]


# Timing chain: jitter calibrated so one detection carries 7.3 ns FWHM
# total timing error (jitter + max-tot time-walk scatter + tick rounding).
TIMING_CFG = SynthConfig(
    pair_rate=2e6,
    duration=0.2,
    rng_seed=101,
    efficiency_truth=uniform_efficiency(0.5),
    ring_radius_px=80.0,
    ring_sigma_px=25.0,
    anticorrelation_sigma_px=4.0,
    jitter_sigma_ns=2.815,
    psf_sigma_px=2.0,
    mean_cluster_size=10.0,
    timewalk_coeff_ns=200.0,
)

# Efficiency recovery: paper-regime truth (7.4%), ring sized so the
# disk-smoothing bias of the estimator stays below half a percent.
EFFICIENCY_CFG = SynthConfig(
    pair_rate=4e6,
    duration=0.3,
    rng_seed=31,
    efficiency_truth=uniform_efficiency(0.074),
    ring_radius_px=70.0,
    ring_sigma_px=30.0,
    anticorrelation_sigma_px=4.0,
    jitter_sigma_ns=2.815,
    psf_sigma_px=2.0,
    mean_cluster_size=10.0,
    timewalk_coeff_ns=150.0,
    background_rate=2000.0,
)

# Double-counting diagnostic: moderate rates so box-size effects dominate
# accidental pile-up.
DIAG_CFG = SynthConfig(
    pair_rate=1e6,
    duration=0.2,
    rng_seed=55,
    efficiency_truth=uniform_efficiency(0.3),
    ring_radius_px=80.0,
    ring_sigma_px=25.0,
    anticorrelation_sigma_px=4.0,
    jitter_sigma_ns=2.815,
    psf_sigma_px=2.0,
    mean_cluster_size=10.0,
    timewalk_coeff_ns=150.0,
)


@pytest.fixture(scope="session")
def timing_run():
    stream, truth = generate_stream(TIMING_CFG)
    clusters = identify_clusters(stream, ClusterParams())
    return TIMING_CFG, stream, truth, clusters


@pytest.fixture(scope="session")
def timing_centroids(timing_run):
    _, _, _, clusters = timing_run
    return {m: centroid_stream(clusters, m) for m in ToAMethod}


@pytest.fixture(scope="session")
def efficiency_run():
    stream, truth = generate_stream(EFFICIENCY_CFG)
    clusters = identify_clusters(stream, ClusterParams())
    centroids = centroid_stream(clusters, ToAMethod.MAX_TOT)
    return EFFICIENCY_CFG, stream, truth, clusters, centroids


@pytest.fixture(scope="session")
def diag_run():
    stream, truth = generate_stream(DIAG_CFG)
    return DIAG_CFG, stream, truth
