"""Timing-resolution estimation, coincidence pairing and correlation diagnostics.

Photon pairs are emitted simultaneously, so the arrival-time difference
between the two detections of a pair measures the camera's timing jitter
directly. The split-sensor histogram accumulates toa_T - toa_B over all
top/bottom centroid pairings inside a wide range: true pairs pile up in a
peak at zero, accidentals form a flat pedestal. FWHM(peak)/sqrt(2) is the
single-detection temporal resolution (two identical independent detections).

``find_pairs`` applies the three coincidence windows (time plus the two
spatial anti-correlation sums, evaluated in the beam frame) with exclusive
greedy matching so no photon is counted twice in the coincidence image.
``correlation_hist`` is the double-counting diagnostic: position-correlated
pairs (a diagonal band) are split clusters from one photon; anti-correlated
ones (anti-diagonal band) are genuine photon pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, EmptyHistogram, NoHalfCrossing, UnsortedInput
from .model import (
    SENSOR_SIZE,
    TOA_TICK_NS,
    CentroidArray,
    CoincidencePair,
    ns_to_toa_ticks,
)


@dataclass(frozen=True, eq=False)
class DtoaHistogram:
    """Arrival-time-difference histogram with zero-aligned contiguous bins.

    ``n_half`` bins on each side of zero, ``bin_width_ns`` wide, covering
    [-n_half*w, n_half*w). A difference of exactly zero lands in the first
    positive bin.
    """

    bin_width_ns: float = TOA_TICK_NS
    range_ns: float = 500.0
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bin_width_ns <= 0 or self.range_ns <= 0:
            raise ConfigError("bin width and range must be positive")
        counts = self.counts
        if counts is None:
            counts = np.zeros(2 * self.n_half, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (2 * self.n_half,):
            raise ConfigError(f"counts must have {2 * self.n_half} bins")
        if counts.size and counts.min() < 0:
            raise ConfigError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def n_half(self) -> int:
        return int(math.ceil(self.range_ns / self.bin_width_ns - 1e-9))

    @property
    def bin_centers_ns(self) -> np.ndarray:
        return (np.arange(2 * self.n_half) - self.n_half + 0.5) * self.bin_width_ns

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class PairWindows:
    dtoa_ns: float = 20.0
    sigma_xy_px: float = 20.0

    def validate(self) -> None:
        if self.dtoa_ns <= 0 or self.sigma_xy_px <= 0:
            raise ConfigError("pair windows must be positive")


@dataclass(frozen=True, eq=False)
class CorrHist2D:
    """(coord_1, coord_2) histogram of temporally close centroid pairs."""

    counts: np.ndarray  # 256x256, first index = earlier centroid's coordinate
    axis: str  # "x" or "y"
    sigma_xy_px: float
    total: int
    diag_fraction: float  # counts with |c2 - c1| <= sigma / total
    anti_fraction: float  # counts with |c1 + c2 - 2c| <= sigma / total


class PairSet:
    """Exclusive coincidence pairs as indices into a CentroidArray."""

    __slots__ = ("centroids", "a_idx", "b_idx", "dtoa")

    def __init__(self, centroids: CentroidArray, a_idx, b_idx):
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "a_idx", np.asarray(a_idx, dtype=np.int64))
        object.__setattr__(self, "b_idx", np.asarray(b_idx, dtype=np.int64))
        dtoa = centroids.toa[self.a_idx] - centroids.toa[self.b_idx]
        object.__setattr__(self, "dtoa", dtoa)

    def __setattr__(self, *a):
        raise AttributeError("PairSet is immutable")

    def __len__(self) -> int:
        return len(self.a_idx)

    def __getitem__(self, i: int) -> CoincidencePair:
        return CoincidencePair(
            self.centroids[int(self.a_idx[i])],
            self.centroids[int(self.b_idx[i])],
            int(self.dtoa[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def split_sensor_dtoa(
    centroids: CentroidArray,
    center,
    hist: DtoaHistogram | None = None,
) -> DtoaHistogram:
    """Histogram toa_T - toa_B over all top/bottom pairings within range.

    Top is y < cy, bottom y >= cy. Every (T, B) pairing inside the range
    contributes once; no exclusivity, so the accidental pedestal stays in.
    """
    if hist is None:
        hist = DtoaHistogram()
    if not centroids.is_sorted:
        raise UnsortedInput("split_sensor_dtoa requires toa-sorted centroids")
    cy = center[1]
    top = centroids.y < cy
    toa_t = centroids.toa[top]
    toa_b = centroids.toa[~top]
    counts = np.zeros(2 * hist.n_half, dtype=np.int64)
    _kernels.split_dtoa_hist(toa_t, toa_b, np.int64(hist.n_half), float(hist.bin_width_ns), counts)
    return DtoaHistogram(hist.bin_width_ns, hist.range_ns, counts)


def fwhm(hist: DtoaHistogram) -> float:
    """Full width at half maximum in ns, by linear interpolation.

    Walks outward from the maximum bin to the first bin below half max on
    each side and interpolates the crossing positions linearly. Parameter
    free and robust to the flat accidental pedestal; raises when the peak
    never falls below half max inside the range.
    """
    counts = hist.counts.astype(np.float64)
    if counts.sum() <= 0:
        raise EmptyHistogram("histogram has no counts")
    centers = hist.bin_centers_ns
    peak = int(np.argmax(counts))
    half = counts[peak] / 2.0

    left = None
    for i in range(peak - 1, -1, -1):
        if counts[i] < half:
            left = centers[i] + (centers[i + 1] - centers[i]) * (half - counts[i]) / (
                counts[i + 1] - counts[i]
            )
            break
    right = None
    for i in range(peak + 1, len(counts)):
        if counts[i] < half:
            right = centers[i - 1] + (centers[i] - centers[i - 1]) * (
                half - counts[i - 1]
            ) / (counts[i] - counts[i - 1])
            break
    if left is None or right is None:
        raise NoHalfCrossing("peak does not fall below half max inside the range")
    return float(right - left)


def temporal_resolution(fwhm_ns: float) -> float:
    """Single-detection resolution from a two-detection difference width.

    The difference of two identical independent detections is sqrt(2) wider
    than either one alone.
    """
    if fwhm_ns < 0:
        raise ConfigError("fwhm must be non-negative")
    return fwhm_ns / math.sqrt(2.0)


def find_pairs(
    centroids: CentroidArray,
    windows: PairWindows = PairWindows(),
    center=(128.0, 128.0),
) -> PairSet:
    """Greedy exclusive coincidence matching under the three windows.

    Scanning in toa order, each unmatched centroid takes the unmatched
    forward partner with the smallest arrival-time difference (tie: the
    smallest |x1+x2-2cx|) that satisfies the time window and both spatial
    anti-correlation windows in the beam frame. Each centroid appears in
    at most one pair; pair member ``a`` is the earlier centroid.
    """
    windows.validate()
    if not centroids.is_sorted:
        raise UnsortedInput("find_pairs requires toa-sorted centroids")
    a_idx, b_idx = _kernels.greedy_pairs(
        centroids.x.astype(np.float64),
        centroids.y.astype(np.float64),
        centroids.toa,
        np.int64(ns_to_toa_ticks(windows.dtoa_ns)),
        float(windows.sigma_xy_px),
        float(center[0]),
        float(center[1]),
    )
    return PairSet(centroids, a_idx, b_idx)


def correlation_hist(
    centroids: CentroidArray,
    dtoa_ns: float,
    center,
    axis: str = "x",
    sigma_xy_px: float = 20.0,
) -> CorrHist2D:
    """Fig-style double-counting diagnostic on one axis.

    Every centroid pair with arrival times within ``dtoa_ns`` of each other
    contributes (no spatial cut, no exclusivity), binned by the chosen
    coordinate of the earlier vs the later centroid. Band fractions count
    the pairs within ``sigma_xy_px`` of the correlated (c2 = c1) and
    anti-correlated (c2 = -c1 + 2c) lines.
    """
    if axis not in ("x", "y"):
        raise ConfigError(f"axis must be 'x' or 'y', got {axis!r}")
    if not centroids.is_sorted:
        raise UnsortedInput("correlation_hist requires toa-sorted centroids")
    coord = centroids.x if axis == "x" else centroids.y
    bc = center[0] if axis == "x" else center[1]
    hist = np.zeros((SENSOR_SIZE, SENSOR_SIZE), dtype=np.int64)
    total, diag, anti = _kernels.corr_hist2d(
        coord.astype(np.int64),
        centroids.toa,
        np.int64(ns_to_toa_ticks(dtoa_ns)),
        hist,
        float(sigma_xy_px),
        float(bc),
    )
    return CorrHist2D(
        counts=hist,
        axis=axis,
        sigma_xy_px=sigma_xy_px,
        total=int(total),
        diag_fraction=float(diag / total) if total else 0.0,
        anti_fraction=float(anti / total) if total else 0.0,
    )
