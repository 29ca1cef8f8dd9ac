"""Greedy 3-D box cluster identification plus oracle-based quality metrics.

The algorithm scans a toa-sorted stream: the earliest unassigned event
seeds a cluster and claims every unassigned event, among the following
``lookahead`` stream entries, that falls inside a box of full width
``box_xy`` pixels around the seed and within ``box_t_ns`` at or after the
seed. The box is anchored to the seed and never grows with membership, so
the partition is a pure deterministic function of (stream, params). Each
event lands in exactly one cluster; clusters come out in seed-toa order.

Undersized boxes split a flash into several clusters (one photon counted
many times); oversized ones merge nearby photons into one cluster.
``cluster_quality`` quantifies both failure modes against the synthetic
ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, LabelMismatch, UnsortedInput
from .model import Cluster, EventStream, ns_to_toa_ticks
from .synth import BACKGROUND, GroundTruth


@dataclass(frozen=True)
class ClusterParams:
    box_xy: int = 17  # full box width, odd
    box_t_ns: float = 300.0
    lookahead: int = 200  # stream entries examined after each seed

    def validate(self) -> None:
        if self.box_xy < 1 or self.box_xy % 2 == 0:
            raise ConfigError("box_xy must be an odd positive width")
        if self.box_t_ns <= 0:
            raise ConfigError("box_t_ns must be positive")
        if self.lookahead < 1:
            raise ConfigError("lookahead must be >= 1")

    @property
    def half_xy(self) -> int:
        return (self.box_xy - 1) // 2


class ClusterSet:
    """Partition of a stream into clusters, stored as per-event labels.

    Behaves as a sequence of Cluster; bulk consumers (centroiding) read the
    label arrays directly instead of materializing each cluster.
    """

    __slots__ = ("stream", "labels", "n_clusters", "_indptr", "_indices")

    def __init__(self, stream: EventStream, labels: np.ndarray, n_clusters: int):
        object.__setattr__(self, "stream", stream)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_clusters", int(n_clusters))
        object.__setattr__(self, "_indptr", None)
        object.__setattr__(self, "_indices", None)

    def __setattr__(self, *a):
        raise AttributeError("ClusterSet is immutable")

    def __len__(self) -> int:
        return self.n_clusters

    @property
    def membership(self):
        """(indptr, indices): member event indices grouped by cluster id."""
        if self._indptr is None:
            indptr, indices = _kernels.csr_from_labels(self.labels, self.n_clusters)
            object.__setattr__(self, "_indptr", indptr)
            object.__setattr__(self, "_indices", indices)
        return self._indptr, self._indices

    def __getitem__(self, c: int) -> Cluster:
        if not 0 <= c < self.n_clusters:
            raise IndexError(c)
        indptr, indices = self.membership
        mem = indices[indptr[c]:indptr[c + 1]]
        s = self.stream
        return Cluster(
            s.x[mem].astype(np.int64),
            s.y[mem].astype(np.int64),
            s.toa[mem].astype(np.int64),
            s.tot[mem].astype(np.int64),
            seed_index=0,
        )

    def __iter__(self):
        for c in range(self.n_clusters):
            yield self[c]


def identify_clusters(stream: EventStream, params: ClusterParams = ClusterParams()) -> ClusterSet:
    """Partition a sorted stream into clusters (see module docstring)."""
    params.validate()
    if not stream.sorted:
        raise UnsortedInput("identify_clusters requires a toa-sorted stream")
    labels, n_clusters = _kernels.cluster_labels(
        stream.x.astype(np.int64),
        stream.y.astype(np.int64),
        stream.toa.view(np.int64),
        np.int64(params.half_xy),
        np.int64(ns_to_toa_ticks(params.box_t_ns)),
        np.int64(params.lookahead),
    )
    return ClusterSet(stream, labels, n_clusters)


@dataclass(frozen=True)
class ClusterQuality:
    split_rate: float  # photons spread over >= 2 clusters / detected photons
    merge_rate: float  # clusters holding >= 2 photons / clusters
    purity: float  # majority-label fraction, averaged over clusters
    completeness: float  # photon's events in its majority cluster, averaged

    def __post_init__(self):
        for name in ("split_rate", "merge_rate", "purity", "completeness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1]")


def cluster_quality(clusters: ClusterSet, truth: GroundTruth) -> ClusterQuality:
    """Exact label bookkeeping of clustering failures against the oracle.

    Background-labeled events count toward cluster composition (a cluster
    of pure background is 100% pure) but never toward the photon-based
    split/completeness denominators.
    """
    labels = clusters.labels
    photon = truth.event_labels
    if len(photon) != len(labels):
        raise LabelMismatch(
            f"stream has {len(labels)} events but truth labels {len(photon)}"
        )
    n_clusters = clusters.n_clusters
    if n_clusters == 0:
        return ClusterQuality(0.0, 0.0, 1.0, 1.0)

    # run-length counts per (cluster, photon) pair
    order = np.lexsort((photon, labels))
    c_sorted = labels[order]
    p_sorted = photon[order]
    new_run = np.empty(len(order), dtype=bool)
    new_run[0] = True
    np.not_equal(c_sorted[1:], c_sorted[:-1], out=new_run[1:])
    new_run[1:] |= p_sorted[1:] != p_sorted[:-1]
    starts = np.flatnonzero(new_run)
    run_c = c_sorted[starts]
    run_p = p_sorted[starts]
    run_n = np.diff(np.append(starts, len(order)))

    cluster_size = np.bincount(labels, minlength=n_clusters)
    majority = np.zeros(n_clusters, dtype=np.int64)
    np.maximum.at(majority, run_c, run_n)
    purity = float(np.mean(majority / cluster_size))

    is_photon_run = run_p != BACKGROUND
    photons_in_cluster = np.bincount(run_c[is_photon_run], minlength=n_clusters)
    merge_rate = float(np.mean(photons_in_cluster >= 2))

    detected = int(truth.detected.sum())
    if detected == 0:
        return ClusterQuality(0.0, merge_rate, purity, 1.0)
    pr = run_p[is_photon_run]
    pn = run_n[is_photon_run]
    clusters_per_photon = np.bincount(pr, minlength=truth.n_photons)
    split_rate = float(np.sum(clusters_per_photon >= 2) / detected)
    photon_events = np.zeros(truth.n_photons, dtype=np.int64)
    np.add.at(photon_events, pr, pn)
    photon_major = np.zeros(truth.n_photons, dtype=np.int64)
    np.maximum.at(photon_major, pr, pn)
    has_events = photon_events > 0
    completeness = float(np.mean(photon_major[has_events] / photon_events[has_events]))
    return ClusterQuality(split_rate, merge_rate, purity, completeness)
