"""Core domain types shared by every pipeline stage.

Unit conventions, used consistently everywhere:

* arrival times (toa) are unsigned integer ticks of ``TOA_TICK_NS`` = 1.5625 ns
* time over threshold (tot) is unsigned integer ticks of ``TOT_TICK_NS`` = 25 ns
* pixel coordinates are integer indices 0..255 on a 256x256 sensor
* the beam center is a real-valued (cx, cy) pixel coordinate pair

All time windows are converted to integer ticks before any comparison, so
window predicates are exact integer comparisons with no float round-off.
Images are indexed ``values[y, x]`` (row = y), matching the CSV export layout.

All types are immutable value types after construction and can be shared
freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCluster, RangeError

SENSOR_SIZE = 256
TOA_TICK_NS = 1.5625  # exactly representable in binary (25/16)
TOT_TICK_NS = 25.0

# Allowed PixelImage unit tags.
UNITS_COUNTS = "counts"
UNITS_CPS = "counts-per-second"
UNITS_EFFICIENCY = "efficiency"
UNITS_DIMENSIONLESS = "dimensionless"
_VALID_UNITS = (UNITS_COUNTS, UNITS_CPS, UNITS_EFFICIENCY, UNITS_DIMENSIONLESS)


def ns_to_toa_ticks(ns: float) -> int:
    """Largest tick count whose duration does not exceed ``ns``.

    Used to turn nanosecond windows into exact integer-tick predicates:
    ``dt_ticks <= ns_to_toa_ticks(w)`` is equivalent to ``dt_ns <= w``.
    """
    return int(np.floor(ns / TOA_TICK_NS + 1e-9))


@dataclass(frozen=True)
class RawEvent:
    """One thresholded pixel firing."""

    x: int
    y: int
    toa: int  # ticks of TOA_TICK_NS
    tot: int  # ticks of TOT_TICK_NS

    def __post_init__(self):
        if not (0 <= self.x < SENSOR_SIZE and 0 <= self.y < SENSOR_SIZE):
            raise RangeError(f"pixel ({self.x},{self.y}) outside sensor")
        if self.tot < 1:
            raise RangeError("tot must be >= 1 tick (no event below threshold)")
        if self.toa < 0:
            raise RangeError("toa ticks must be non-negative")

    @property
    def toa_ns(self) -> float:
        return self.toa * TOA_TICK_NS

    @property
    def tot_ns(self) -> float:
        return self.tot * TOT_TICK_NS


class EventStream:
    """A sequence of RawEvent stored as column arrays.

    Column storage keeps 1e7-event acquisitions cheap to hold and scan;
    indexing still hands back RawEvent values. ``sorted`` asserts that toa
    is non-decreasing across the sequence (verified at construction).
    """

    __slots__ = ("x", "y", "toa", "tot", "duration", "sorted")

    def __init__(self, x, y, toa, tot, duration: float, sorted: bool | None = None):
        x = np.ascontiguousarray(x, dtype=np.uint16)
        y = np.ascontiguousarray(y, dtype=np.uint16)
        toa = np.ascontiguousarray(toa, dtype=np.uint64)
        tot = np.ascontiguousarray(tot, dtype=np.uint16)
        n = len(x)
        if not (len(y) == len(toa) == len(tot) == n):
            raise ValueError("column lengths disagree")
        if duration <= 0:
            raise RangeError("duration must be positive")
        if n and (x.max() >= SENSOR_SIZE or y.max() >= SENSOR_SIZE):
            raise RangeError("pixel index outside sensor")
        if n and tot.min() < 1:
            raise RangeError("tot must be >= 1 tick")
        is_sorted = bool(n < 2 or np.all(np.diff(toa.view(np.int64)) >= 0))
        if sorted is True and not is_sorted:
            raise RangeError("stream claimed sorted but toa decreases")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "toa", toa)
        object.__setattr__(self, "tot", tot)
        object.__setattr__(self, "duration", float(duration))
        object.__setattr__(self, "sorted", is_sorted if sorted is None else bool(sorted))

    def __setattr__(self, *a):  # immutable after construction
        raise AttributeError("EventStream is immutable")

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> RawEvent:
        return RawEvent(int(self.x[i]), int(self.y[i]), int(self.toa[i]), int(self.tot[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.duration == other.duration
            and len(self) == len(other)
            and bool(
                np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.toa, other.toa)
                and np.array_equal(self.tot, other.tot)
            )
        )

    @classmethod
    def from_events(cls, events, duration: float) -> "EventStream":
        ev = list(events)
        return cls(
            [e.x for e in ev],
            [e.y for e in ev],
            [e.toa for e in ev],
            [e.tot for e in ev],
            duration,
        )

    def time_sorted(self) -> "EventStream":
        """Stable-sorted copy by toa (no-op view semantics if already sorted)."""
        if self.sorted:
            return self
        order = np.argsort(self.toa, kind="stable")
        return EventStream(
            self.x[order], self.y[order], self.toa[order], self.tot[order], self.duration
        )


@dataclass(frozen=True, eq=False)
class Cluster:
    """Events grouped from one intensifier flash, in non-decreasing toa order.

    ``seed_index`` points at the earliest-toa member (index 0 by construction
    when produced by cluster identification, which emits members in stream
    order).
    """

    x: np.ndarray
    y: np.ndarray
    toa: np.ndarray
    tot: np.ndarray
    seed_index: int = 0

    def __post_init__(self):
        if len(self.x) == 0:
            raise EmptyCluster("cluster must have at least one member")
        if np.any(np.diff(self.toa.astype(np.int64)) < 0):
            raise RangeError("cluster members must be in non-decreasing toa order")

    def __len__(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class Centroid:
    """Single space-time coordinate assigned to one cluster."""

    x: int
    y: int
    toa: int  # ticks
    size: int  # member count
    total_tot: int  # summed tot ticks


class CentroidArray:
    """Column-stored sequence of Centroid, sorted by toa."""

    __slots__ = ("x", "y", "toa", "size", "total_tot", "cluster_index")

    def __init__(self, x, y, toa, size, total_tot, cluster_index=None):
        object.__setattr__(self, "x", np.ascontiguousarray(x, dtype=np.int32))
        object.__setattr__(self, "y", np.ascontiguousarray(y, dtype=np.int32))
        object.__setattr__(self, "toa", np.ascontiguousarray(toa, dtype=np.int64))
        object.__setattr__(self, "size", np.ascontiguousarray(size, dtype=np.int32))
        object.__setattr__(self, "total_tot", np.ascontiguousarray(total_tot, dtype=np.int64))
        # provenance: which cluster (pre-sort id) produced each centroid
        if cluster_index is None:
            cluster_index = np.arange(len(self.x), dtype=np.int64)
        object.__setattr__(self, "cluster_index", np.ascontiguousarray(cluster_index, dtype=np.int64))

    def __setattr__(self, *a):
        raise AttributeError("CentroidArray is immutable")

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> Centroid:
        return Centroid(
            int(self.x[i]), int(self.y[i]), int(self.toa[i]),
            int(self.size[i]), int(self.total_tot[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def is_sorted(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.toa) >= 0))


@dataclass(frozen=True)
class CoincidencePair:
    """Two centroids passing the coincidence windows; a is the earlier one."""

    a: Centroid
    b: Centroid
    dtoa: int  # signed ticks, toa_a - toa_b


@dataclass(frozen=True, eq=False)
class PixelImage:
    """256x256 scalar field with a units tag and optional validity mask.

    ``values[y, x]`` with y as the row, matching the CSV export orientation.
    ``mask`` (where present) is True on valid pixels.
    """

    values: np.ndarray
    units: str
    beam_center: tuple[float, float] | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (SENSOR_SIZE, SENSOR_SIZE):
            raise RangeError(f"image must be {SENSOR_SIZE}x{SENSOR_SIZE}, got {v.shape}")
        if self.units not in _VALID_UNITS:
            raise RangeError(f"unknown units tag {self.units!r}")
        if self.units in (UNITS_COUNTS, UNITS_CPS) and v.size and v.min() < 0:
            raise RangeError("counts/rate image must be non-negative")
        object.__setattr__(self, "values", v)
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != v.shape:
                raise RangeError("mask shape must match values")
            object.__setattr__(self, "mask", m)

    @classmethod
    def zeros(cls, units: str = UNITS_COUNTS, beam_center=None) -> "PixelImage":
        return cls(np.zeros((SENSOR_SIZE, SENSOR_SIZE)), units, beam_center)

    @classmethod
    def full(cls, value: float, units: str = UNITS_DIMENSIONLESS, beam_center=None) -> "PixelImage":
        return cls(np.full((SENSOR_SIZE, SENSOR_SIZE), float(value)), units, beam_center)

    def with_values(self, values, units=None) -> "PixelImage":
        return PixelImage(values, units or self.units, self.beam_center, self.mask)


def shift_to_beam_frame(p, center):
    """Shift pixel coordinates so the beam center sits at the origin.

    Accepts scalars or arrays; returns signed real coordinates (x-cx, y-cy).
    """
    x, y = p
    cx, cy = center
    return (np.asarray(x, dtype=np.float64) - cx, np.asarray(y, dtype=np.float64) - cy)


def shift_from_beam_frame(p, center):
    """Inverse of shift_to_beam_frame."""
    x, y = p
    cx, cy = center
    return (np.asarray(x, dtype=np.float64) + cx, np.asarray(y, dtype=np.float64) + cy)


def reflect_pixel(x, y, center):
    """Reflect integer pixel(s) through the real-valued beam center.

    Returns nearest-pixel indices; callers mask positions that land
    off-sensor. Applying the reflection twice is the identity for pixels
    whose reflection stays on-sensor.
    """
    cx, cy = center
    rx = np.floor(2.0 * cx - np.asarray(x) + 0.5).astype(np.int64)
    ry = np.floor(2.0 * cy - np.asarray(y) + 0.5).astype(np.int64)
    return rx, ry
