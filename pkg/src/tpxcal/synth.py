"""Synthetic photon-pair + intensifier + camera forward model.

Generates labeled event streams that serve as the ground-truth oracle for
the whole pipeline. The physics, in generation order:

* pair emissions are Poisson in time; the first photon of a pair lands on
  a Gaussian ring (mean radius ``ring_radius_px``, radial width
  ``ring_sigma_px``) around the beam center; ``ring_radius_px = 0`` selects
  a plain isotropic 2-D Gaussian instead,
* the second photon is the first reflected through the beam center plus an
  independent Gaussian offset of ``anticorrelation_sigma_px`` per axis
  (momentum anti-correlation with finite spread),
* each photon is detected with the probability ``efficiency_truth`` holds
  at its pixel (photons falling off the sensor are lost),
* every detected photon makes one intensifier flash: a burst of >= 1 pixel
  events spread with ``psf_sigma_px``, sharing a single timing-jitter draw,
  each delayed by the time-walk of its own tot,
* background flashes are Poisson-uniform over sensor and duration.

Brighter members get larger tot and smaller time-walk delay, so the
earliest member of a flash is its brightest one. Within a pair the true
emission times are exactly equal, which makes the generator an exact null
hypothesis for the timing-resolution pipeline: all observed arrival-time
spread comes from jitter, time-walk and tick quantization.

Generation is deterministic for a fixed config: work is cut into fixed
time slices with sub-seeds derived per slice, so the result does not
depend on how many workers run the slices.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError
from .model import SENSOR_SIZE, UNITS_EFFICIENCY, EventStream, PixelImage, RawEvent

BACKGROUND = -1  # event label for background flashes

_TARGET_FLASHES_PER_SLICE = 1_000_000


def uniform_efficiency(value: float) -> PixelImage:
    """Flat detection-efficiency map."""
    return PixelImage.full(value, UNITS_EFFICIENCY)


def efficiency_with_patch(base: float, patch_center, patch_radius: float, patch_value: float) -> PixelImage:
    """Flat map with one circular patch at a different efficiency."""
    yy, xx = np.mgrid[0:SENSOR_SIZE, 0:SENSOR_SIZE]
    values = np.full((SENSOR_SIZE, SENSOR_SIZE), float(base))
    px, py = patch_center
    values[(xx - px) ** 2 + (yy - py) ** 2 <= patch_radius**2] = patch_value
    return PixelImage(values, UNITS_EFFICIENCY)


@dataclass(frozen=True)
class SynthConfig:
    pair_rate: float  # pairs/s
    duration: float  # s
    beam_center: tuple[float, float] = (128.0, 128.0)
    ring_radius_px: float = 80.0  # 0 selects a plain 2-D Gaussian profile
    ring_sigma_px: float = 30.0
    anticorrelation_sigma_px: float = 4.0
    efficiency_truth: PixelImage = field(default_factory=lambda: uniform_efficiency(0.074))
    jitter_sigma_ns: float = 3.1
    psf_sigma_px: float = 2.0
    mean_cluster_size: float = 10.0
    timewalk_coeff_ns: float = 150.0
    background_rate: float = 0.0  # uncorrelated flashes/s
    rng_seed: int = 0

    def validate(self) -> None:
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        for name in ("pair_rate", "ring_radius_px", "ring_sigma_px",
                     "anticorrelation_sigma_px", "jitter_sigma_ns",
                     "psf_sigma_px", "timewalk_coeff_ns", "background_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.mean_cluster_size <= 0:
            raise ConfigError("mean_cluster_size must be positive")
        eff = self.efficiency_truth.values
        if eff.min() < 0 or eff.max() > 1:
            raise ConfigError("efficiency_truth values must lie in [0, 1]")
        if self.pair_rate * self.duration > 2**30:
            raise ConfigError("configuration implies more than 2^30 pairs")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Oracle labels linking events back to emitted photons and pairs.

    Photon id is the row index; ``pair_id`` is shared by the two photons of
    a pair (-1 for none). ``event_labels`` holds, per stream event, the id
    of the photon whose flash produced it, or BACKGROUND.
    """

    pair_id: np.ndarray
    true_x: np.ndarray
    true_y: np.ndarray
    emit_time_ns: np.ndarray
    detected: np.ndarray
    event_labels: np.ndarray

    def __post_init__(self):
        labels = self.event_labels
        real = labels[labels != BACKGROUND]
        if real.size:
            if real.min() < 0 or real.max() >= len(self.pair_id):
                raise ConfigError("event label outside the photon table")
            if not self.detected[real].all():
                raise ConfigError("event labeled with an undetected photon")
        paired = self.pair_id[self.pair_id >= 0]
        if paired.size and not (np.bincount(paired) == 2).all():
            raise ConfigError("every pair id must own exactly two photons")

    @property
    def n_photons(self) -> int:
        return len(self.pair_id)

    def partner_of(self) -> np.ndarray:
        """Photon id of each photon's pair partner (-1 if unpaired)."""
        out = np.full(self.n_photons, -1, dtype=np.int64)
        ids = np.arange(self.n_photons)
        paired = self.pair_id >= 0
        # photons of one pair are adjacent rows (2k, 2k+1) by construction
        out[paired] = ids[paired] ^ 1
        return out


def time_walk(tot_ticks, coeff_ns: float):
    """Threshold-crossing delay in ns for a pulse of the given tot.

    Strictly decreasing in tot and vanishing for very bright pulses: a dim
    pulse crosses the fixed threshold late and stays above it briefly.
    """
    tot = np.asarray(tot_ticks, dtype=np.float64)
    if np.any(tot < 1):
        raise ConfigError("tot must be >= 1 tick")
    out = coeff_ns / tot
    return float(out) if np.isscalar(tot_ticks) else out


def intensify(position, time_ns: float, cfg: SynthConfig, rng: np.random.Generator):
    """One detected photon -> its burst of pixel events.

    Randomness comes from ``rng`` (one u32 draw seeds the flash kernel), so
    a caller holding a fixed generator gets reproducible flashes.
    """
    x, y = position
    if not (-0.5 <= x < SENSOR_SIZE - 0.5 and -0.5 <= y < SENSOR_SIZE - 0.5):
        raise ConfigError("flash position must be on the sensor")
    seed = int(rng.integers(0, 2**32))
    cap = 64 + int(8 * (cfg.mean_cluster_size + 6 * math.sqrt(cfg.mean_cluster_size)))
    while True:
        ex = np.empty(cap, dtype=np.uint16)
        ey = np.empty(cap, dtype=np.uint16)
        etoa = np.empty(cap, dtype=np.int64)
        etot = np.empty(cap, dtype=np.uint16)
        elabel = np.empty(cap, dtype=np.int64)
        n = _kernels.synth_flashes(
            seed,
            np.array([float(x)]),
            np.array([float(y)]),
            np.array([float(time_ns)]),
            np.array([0], dtype=np.int64),
            cfg.psf_sigma_px,
            cfg.mean_cluster_size,
            cfg.jitter_sigma_ns,
            cfg.timewalk_coeff_ns,
            ex, ey, etoa, etot, elabel,
        )
        if n >= 0:
            return [RawEvent(int(ex[i]), int(ey[i]), int(etoa[i]), int(etot[i])) for i in range(n)]
        cap *= 2


def _sample_ring_radius(g: np.random.Generator, n: int, r0: float, sigma_r: float) -> np.ndarray:
    """Radii whose 2-D point density is Gaussian in radius about r0.

    The intensity profile I(r) = exp(-(r-r0)^2 / 2 sigma_r^2) corresponds to
    a radial sample density r * I(r) (area element), drawn here by inverse
    CDF on a fine grid. r0 = 0 degenerates to the isotropic 2-D Gaussian.
    """
    if sigma_r == 0.0:
        return np.full(n, r0)
    lo = max(0.0, r0 - 8.0 * sigma_r)
    hi = r0 + 8.0 * sigma_r
    grid = np.linspace(lo, hi, 4096)
    weight = grid * np.exp(-((grid - r0) ** 2) / (2.0 * sigma_r**2))
    cdf = np.cumsum(weight)
    cdf /= cdf[-1]
    return np.interp(g.uniform(size=n), cdf, grid)


def _slice_plan(cfg: SynthConfig):
    """Deterministic slicing of the acquisition into bounded work units."""
    rate = max(cfg.pair_rate, cfg.background_rate, 1.0)
    slice_dur = min(cfg.duration, _TARGET_FLASHES_PER_SLICE / rate)
    n_slices = max(1, math.ceil(cfg.duration / slice_dur - 1e-12))
    edges = np.linspace(0.0, cfg.duration, n_slices + 1)

    ss = np.random.SeedSequence(cfg.rng_seed)
    children = ss.spawn(n_slices)
    root = np.random.default_rng(ss.spawn(1)[0])
    durs = np.diff(edges)
    n_pairs = root.poisson(cfg.pair_rate * durs)
    n_bg = root.poisson(cfg.background_rate * durs)
    pair_base = np.concatenate([[0], np.cumsum(n_pairs)])
    return edges, children, n_pairs.astype(np.int64), n_bg.astype(np.int64), pair_base.astype(np.int64)


def _run_slice(cfg: SynthConfig, t0_ns, t1_ns, child_seed, n_pairs, n_bg, pair_base):
    """Generate one time slice: photon table rows + unsorted labeled events."""
    g = np.random.default_rng(child_seed)
    kernel_seed = int(g.integers(0, 2**32))
    cx, cy = cfg.beam_center

    t_pair = g.uniform(t0_ns, t1_ns, n_pairs)
    r = _sample_ring_radius(g, n_pairs, cfg.ring_radius_px, cfg.ring_sigma_px)
    theta = g.uniform(0.0, 2.0 * np.pi, n_pairs)
    x1 = cx + r * np.cos(theta)
    y1 = cy + r * np.sin(theta)
    x2 = 2.0 * cx - x1 + g.normal(0.0, cfg.anticorrelation_sigma_px, n_pairs)
    y2 = 2.0 * cy - y1 + g.normal(0.0, cfg.anticorrelation_sigma_px, n_pairs)

    # interleave so photons of pair k sit at rows 2k, 2k+1
    px = np.empty(2 * n_pairs)
    py = np.empty(2 * n_pairs)
    px[0::2], px[1::2] = x1, x2
    py[0::2], py[1::2] = y1, y2
    pt = np.repeat(t_pair, 2)
    pair_id = pair_base + np.repeat(np.arange(n_pairs, dtype=np.int64), 2)

    ix = np.floor(px + 0.5).astype(np.int64)
    iy = np.floor(py + 0.5).astype(np.int64)
    on = (ix >= 0) & (ix < SENSOR_SIZE) & (iy >= 0) & (iy < SENSOR_SIZE)
    u = g.uniform(size=2 * n_pairs)
    prob = np.zeros(2 * n_pairs)
    prob[on] = cfg.efficiency_truth.values[iy[on], ix[on]]
    detected = on & (u < prob)

    t_bg = g.uniform(t0_ns, t1_ns, n_bg)
    x_bg = g.uniform(-0.5, SENSOR_SIZE - 0.5, n_bg)
    y_bg = g.uniform(-0.5, SENSOR_SIZE - 0.5, n_bg)

    photon_ids = 2 * pair_base + np.arange(2 * n_pairs, dtype=np.int64)
    fx = np.concatenate([px[detected], x_bg])
    fy = np.concatenate([py[detected], y_bg])
    ft = np.concatenate([pt[detected], t_bg])
    flabel = np.concatenate([photon_ids[detected], np.full(n_bg, BACKGROUND, dtype=np.int64)])

    n_flashes = len(fx)
    lam = cfg.mean_cluster_size + 1.0
    cap = 64 + int(n_flashes * lam + 8.0 * math.sqrt(n_flashes * lam + 1.0))
    while True:
        ex = np.empty(cap, dtype=np.uint16)
        ey = np.empty(cap, dtype=np.uint16)
        etoa = np.empty(cap, dtype=np.int64)
        etot = np.empty(cap, dtype=np.uint16)
        elabel = np.empty(cap, dtype=np.int64)
        n_ev = _kernels.synth_flashes(
            kernel_seed, fx, fy, ft, flabel,
            cfg.psf_sigma_px, cfg.mean_cluster_size,
            cfg.jitter_sigma_ns, cfg.timewalk_coeff_ns,
            ex, ey, etoa, etot, elabel,
        )
        if n_ev >= 0:
            break
        cap *= 2

    photons = (pair_id, px, py, pt, detected)
    events = (ex[:n_ev].copy(), ey[:n_ev].copy(), etoa[:n_ev].copy(),
              etot[:n_ev].copy(), elabel[:n_ev].copy())
    return photons, events


def iter_event_slices(cfg: SynthConfig):
    """Yield (photon table slice, unsorted event slice) per time slice.

    Memory-bounded path for very long acquisitions; generate_stream is the
    concatenation of these slices followed by one global sort.
    """
    cfg.validate()
    edges, children, n_pairs, n_bg, pair_base = _slice_plan(cfg)
    for s in range(len(children)):
        yield _run_slice(
            cfg, edges[s] * 1e9, edges[s + 1] * 1e9, children[s],
            int(n_pairs[s]), int(n_bg[s]), int(pair_base[s]),
        )


def generate_stream(cfg: SynthConfig, threads: int = 1):
    """Full forward model: returns (sorted EventStream, GroundTruth).

    Deterministic for a fixed config including seed; the thread count only
    parallelizes independent slices and never changes the output.
    """
    cfg.validate()
    edges, children, n_pairs, n_bg, pair_base = _slice_plan(cfg)
    n_slices = len(children)
    args = [
        (cfg, edges[s] * 1e9, edges[s + 1] * 1e9, children[s],
         int(n_pairs[s]), int(n_bg[s]), int(pair_base[s]))
        for s in range(n_slices)
    ]
    if threads > 1 and n_slices > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _run_slice(*a), args))
    else:
        results = [_run_slice(*a) for a in args]

    pair_id = np.concatenate([r[0][0] for r in results])
    true_x = np.concatenate([r[0][1] for r in results])
    true_y = np.concatenate([r[0][2] for r in results])
    emit_t = np.concatenate([r[0][3] for r in results])
    detected = np.concatenate([r[0][4] for r in results])

    ex = np.concatenate([r[1][0] for r in results])
    ey = np.concatenate([r[1][1] for r in results])
    etoa = np.concatenate([r[1][2] for r in results])
    etot = np.concatenate([r[1][3] for r in results])
    elabel = np.concatenate([r[1][4] for r in results])
    del results

    order = np.argsort(etoa, kind="stable")
    stream = EventStream(ex[order], ey[order], etoa[order], etot[order], cfg.duration)
    truth = GroundTruth(pair_id, true_x, true_y, emit_t, detected, elabel[order])
    return stream, truth


def export_ground_truth(truth: GroundTruth, photons_sink, labels_sink) -> None:
    """Write the photon table and per-event label table as CSV."""
    lines = ["photon_id,pair_id,true_x,true_y,emit_time_ns,detected"]
    for i in range(truth.n_photons):
        lines.append(
            f"{i},{int(truth.pair_id[i])},{truth.true_x[i]:.6f},{truth.true_y[i]:.6f},"
            f"{truth.emit_time_ns[i]:.4f},{int(truth.detected[i])}"
        )
    _write(photons_sink, "\n".join(lines) + "\n")
    lines = ["event_index,photon_id"]
    for i, lab in enumerate(truth.event_labels):
        lines.append(f"{i},{int(lab)}")
    _write(labels_sink, "\n".join(lines) + "\n")


def _write(sink, text: str) -> None:
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w") as fh:
            fh.write(text)
