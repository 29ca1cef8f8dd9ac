"""Per-pixel efficiency map from singles, coincidences and accidentals.

The estimator exploits the pairwise nature of the source: a detection at
(x, y) guarantees a partner photon near the conjugate (reflected) position,
so the ratio of background-subtracted coincidences at a pixel to the
background-subtracted smoothed singles at its conjugate measures the
detection efficiency at that pixel:

    eta(x, y) = (C - C_B)(x, y) / (S_smooth - S_B_smooth)(conjugate)

The conjugate is not a single pixel because the momentum anti-correlation
has finite spread; the singles images are therefore disk-averaged with a
radius matching the spatial coincidence window before the division.
Accidental coincidences are modeled from the singles rates as

    C_B(x, y) = S(x, y) * S_smooth(reflected x, y) * dtoa_window_seconds

taken verbatim with a one-sided time window; see the module tests for the
Monte-Carlo convention this implies. In this regime accidentals are a
~1e-5 relative correction.

Pixels whose denominator falls below ``denom_floor`` (divide-by-noise
outside the beam) or whose reflection lands off-sensor are masked invalid
rather than clamped to zero, so summary statistics stay honest. Ratios
escaping [0, 1] through noise are clamped and flagged; the flag count is
itself a data-quality signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .coincidence import PairSet
from .errors import ConfigError, EmptyImage, GeometryMismatch, RangeError
from .model import (
    SENSOR_SIZE,
    UNITS_CPS,
    UNITS_EFFICIENCY,
    CentroidArray,
    PixelImage,
    reflect_pixel,
)


def singles_image(centroids: CentroidArray, duration: float, beam_center=None) -> PixelImage:
    """Per-pixel centroid rate in counts per second."""
    if duration <= 0:
        raise ConfigError("duration must be positive")
    flat = centroids.y.astype(np.int64) * SENSOR_SIZE + centroids.x.astype(np.int64)
    counts = np.bincount(flat, minlength=SENSOR_SIZE * SENSOR_SIZE)
    values = counts.reshape(SENSOR_SIZE, SENSOR_SIZE) / duration
    return PixelImage(values, UNITS_CPS, beam_center)


def estimate_beam_center(image: PixelImage) -> tuple[float, float]:
    """Intensity-weighted centroid of an image."""
    total = image.values.sum()
    if total <= 0:
        raise EmptyImage("cannot locate the beam in an all-zero image")
    yy, xx = np.mgrid[0:SENSOR_SIZE, 0:SENSOR_SIZE]
    cx = float((xx * image.values).sum() / total)
    cy = float((yy * image.values).sum() / total)
    return cx, cy


def disk_offsets(radius_px: int) -> np.ndarray:
    """Boolean disk footprint: lattice points with dx^2 + dy^2 <= r^2."""
    r = int(radius_px)
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    return (dx * dx + dy * dy) <= radius_px * radius_px


def smooth_image(image: PixelImage, radius_px: int = 20) -> PixelImage:
    """Disk mean: each pixel becomes the average over the disk around it.

    Disks poking past the sensor edge renormalize by the in-bounds pixel
    count, so a constant image stays exactly constant.
    """
    if radius_px < 1:
        raise ConfigError("radius must be >= 1")
    footprint = disk_offsets(radius_px).astype(np.float64)
    sums = ndimage.convolve(image.values, footprint, mode="constant", cval=0.0)
    norm = ndimage.convolve(np.ones_like(image.values), footprint, mode="constant", cval=0.0)
    return image.with_values(sums / norm)


def coincidence_image(pairs: PairSet, duration: float, beam_center=None) -> PixelImage:
    """Rate image of paired centroids: each pair marks both member pixels."""
    if duration <= 0:
        raise ConfigError("duration must be positive")
    c = pairs.centroids
    idx = np.concatenate([pairs.a_idx, pairs.b_idx])
    flat = c.y[idx].astype(np.int64) * SENSOR_SIZE + c.x[idx].astype(np.int64)
    counts = np.bincount(flat, minlength=SENSOR_SIZE * SENSOR_SIZE)
    values = counts.reshape(SENSOR_SIZE, SENSOR_SIZE) / duration
    return PixelImage(values, UNITS_CPS, beam_center)


def background_coincidence_image(
    s: PixelImage, s_smooth: PixelImage, center, dtoa_ns: float
) -> PixelImage:
    """Accidental-coincidence rate expected from uncorrelated singles.

    Per pixel: the raw singles rate times the smoothed singles rate at the
    reflected pixel times the coincidence window (in seconds, one-sided).
    Reflections landing off-sensor contribute zero.
    """
    if s.values.shape != s_smooth.values.shape:
        raise GeometryMismatch("singles and smoothed singles differ in shape")
    yy, xx = np.mgrid[0:SENSOR_SIZE, 0:SENSOR_SIZE]
    rx, ry = reflect_pixel(xx, yy, center)
    on = (rx >= 0) & (rx < SENSOR_SIZE) & (ry >= 0) & (ry < SENSOR_SIZE)
    conjugate = np.zeros_like(s.values)
    conjugate[on] = s_smooth.values[ry[on], rx[on]]
    values = s.values * conjugate * (dtoa_ns * 1e-9)
    return PixelImage(values, UNITS_CPS, tuple(center))


@dataclass(frozen=True, eq=False)
class EfficiencyResult:
    """Efficiency map with its validity mask and summary statistics.

    ``valid`` excludes pixels with an off-sensor reflection or a denominator
    under the floor; ``flagged`` marks valid pixels whose raw ratio exceeded
    1 and was clamped. ``mean``/``std`` run over valid, unflagged pixels.
    ``meta`` records the inputs that shaped the map.
    """

    eta: PixelImage
    valid: np.ndarray
    flagged: np.ndarray
    mean: float
    std: float
    meta: dict = field(default_factory=dict)


def efficiency_map(
    c_img: PixelImage,
    c_bg: PixelImage,
    s_smooth: PixelImage,
    s_bg_smooth: PixelImage,
    center,
    denom_floor: float = 1.0,
    meta: dict | None = None,
) -> EfficiencyResult:
    """Evaluate the efficiency ratio per pixel (see module docstring)."""
    images = (c_img, c_bg, s_smooth, s_bg_smooth)
    for img in images:
        if img.values.shape != (SENSOR_SIZE, SENSOR_SIZE):
            raise GeometryMismatch("all images must be full sensor frames")
        if img.units != UNITS_CPS:
            raise GeometryMismatch(f"expected rate images, got {img.units!r}")

    numerator = c_img.values - c_bg.values
    net_singles = s_smooth.values - s_bg_smooth.values

    yy, xx = np.mgrid[0:SENSOR_SIZE, 0:SENSOR_SIZE]
    rx, ry = reflect_pixel(xx, yy, center)
    on = (rx >= 0) & (rx < SENSOR_SIZE) & (ry >= 0) & (ry < SENSOR_SIZE)
    denominator = np.zeros((SENSOR_SIZE, SENSOR_SIZE))
    denominator[on] = net_singles[ry[on], rx[on]]

    valid = on & (denominator >= denom_floor)
    raw = np.zeros((SENSOR_SIZE, SENSOR_SIZE))
    raw[valid] = numerator[valid] / denominator[valid]
    # Ratios above 1 indicate an estimator pathology and are flagged out of
    # the statistics. Slightly negative ratios are just Poisson zeros minus
    # the (tiny) accidental estimate, so they clamp to 0 but stay counted;
    # flagging them would restrict the mean to pixels with >= 1 coincidence
    # and bias it high at finite statistics.
    flagged = valid & (raw > 1.0)
    eta = np.clip(raw, 0.0, 1.0)
    eta[~valid] = 0.0

    good = valid & ~flagged
    mean = float(eta[good].mean()) if good.any() else float("nan")
    std = float(eta[good].std()) if good.any() else float("nan")
    return EfficiencyResult(
        eta=PixelImage(eta, UNITS_EFFICIENCY, tuple(center), mask=good),
        valid=valid,
        flagged=flagged,
        mean=mean,
        std=std,
        meta=dict(meta or {}, denom_floor=denom_floor),
    )


def masked_stats(
    result: EfficiencyResult,
    dead_zone_px: int = 17,
    field_radius_px: float = 120.0,
) -> tuple[float, float]:
    """Mean/std excluding the clustering dead zone and uncovered corners.

    On top of the validity mask this drops the central dead_zone_px square
    around the beam center (where same-pair photons merge into one cluster)
    and everything beyond the intensifier's circular field.
    """
    cx, cy = result.eta.beam_center
    yy, xx = np.mgrid[0:SENSOR_SIZE, 0:SENSOR_SIZE]
    half = (dead_zone_px - 1) / 2.0
    in_dead_square = (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= half)
    in_field = (xx - cx) ** 2 + (yy - cy) ** 2 <= field_radius_px**2
    keep = result.valid & ~result.flagged & ~in_dead_square & in_field
    if not keep.any():
        return float("nan"), float("nan")
    vals = result.eta.values[keep]
    return float(vals.mean()), float(vals.std())


def detector_only_efficiency(eta_mean: float, optics_transmission: float = 0.927) -> float:
    """Remove the known transmission of the optics in front of the sensor."""
    if not 0.0 < optics_transmission <= 1.0:
        raise RangeError("optics transmission must be in (0, 1]")
    return eta_mean / optics_transmission
