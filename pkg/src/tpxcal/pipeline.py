"""Pipeline orchestration: configs, stages, artifacts and manifests.

Stages run in processing order (synthesis or ingest, cluster identification,
centroiding, pairing, diagnostics, efficiency), each reading and writing
files in one artifact directory so they compose: running stages one at a
time produces byte-identical artifacts to one `full` run. Every run writes
the fully-resolved config next to the artifacts (re-running from it
reproduces them) plus a manifest with the tool version and content hashes.

Config files are flat ``key = value`` text; unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__, stream_io
from .centroiding import ToAMethod, centroid_stream
from .clustering import ClusterParams, cluster_quality, identify_clusters
from .coincidence import (
    DtoaHistogram,
    PairWindows,
    correlation_hist,
    find_pairs,
    fwhm,
    split_sensor_dtoa,
    temporal_resolution,
)
from .efficiency import (
    background_coincidence_image,
    coincidence_image,
    detector_only_efficiency,
    efficiency_map,
    estimate_beam_center,
    masked_stats,
    singles_image,
    smooth_image,
)
from .errors import ConfigError, EmptyHistogram, NoHalfCrossing
from .model import CentroidArray, EventStream, PixelImage, UNITS_CPS, UNITS_EFFICIENCY
from .synth import SynthConfig, export_ground_truth, generate_stream, uniform_efficiency

STAGES = ("synth", "cluster", "centroid", "pairs", "diag", "efficiency")


@dataclass(frozen=True)
class PipelineConfig:
    """Flat run configuration: synthesis, every stage knob, and paths."""

    # synthesis
    pair_rate: float = 1e6
    duration: float = 0.1
    beam_center_x: float = 128.0
    beam_center_y: float = 128.0
    ring_radius_px: float = 70.0
    ring_sigma_px: float = 30.0
    anticorrelation_sigma_px: float = 4.0
    efficiency_value: float = 0.074  # uniform truth map
    jitter_sigma_ns: float = 2.815
    psf_sigma_px: float = 2.0
    mean_cluster_size: float = 10.0
    timewalk_coeff_ns: float = 150.0
    background_rate: float = 0.0
    seed: int = 1
    # clustering
    box_xy: int = 17
    box_t_ns: float = 300.0
    lookahead: int = 200
    # centroiding
    toa_method: str = "max-tot"
    # pairing / diagnostics
    dtoa_ns: float = 20.0
    sigma_xy_px: float = 20.0
    hist_range_ns: float = 500.0
    diag_dtoa_ns: float = 200.0
    axis: str = "x"
    # efficiency
    radius_px: int = 20
    denom_floor: float = 1.0
    dead_zone_px: int = 17
    field_radius_px: float = 120.0
    transmission: float = 0.927
    # execution
    threads: int = 1
    input: str = ""  # existing .tpxs to ingest instead of synthesizing
    out_dir: str = "out"

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            pair_rate=self.pair_rate,
            duration=self.duration,
            beam_center=(self.beam_center_x, self.beam_center_y),
            ring_radius_px=self.ring_radius_px,
            ring_sigma_px=self.ring_sigma_px,
            anticorrelation_sigma_px=self.anticorrelation_sigma_px,
            efficiency_truth=uniform_efficiency(self.efficiency_value),
            jitter_sigma_ns=self.jitter_sigma_ns,
            psf_sigma_px=self.psf_sigma_px,
            mean_cluster_size=self.mean_cluster_size,
            timewalk_coeff_ns=self.timewalk_coeff_ns,
            background_rate=self.background_rate,
            rng_seed=self.seed,
        )

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(self.box_xy, self.box_t_ns, self.lookahead)

    def pair_windows(self) -> PairWindows:
        return PairWindows(self.dtoa_ns, self.sigma_xy_px)


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _load_int_csv(path: str, ncols: int) -> np.ndarray:
    """Integer CSV with one header line; handles the zero-row case."""
    with open(path) as fh:
        rows = [line for line in fh.read().splitlines()[1:] if line]
    if not rows:
        return np.empty((0, ncols), dtype=np.int64)
    return np.array([[int(v) for v in row.split(",")] for row in rows], dtype=np.int64)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def config_from_mapping(kv: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    updates = {}
    for key, value in kv.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        target = _FIELD_TYPES[key]
        try:
            if target in ("int", int):
                updates[key] = int(value)
            elif target in ("float", float):
                updates[key] = float(value)
            else:
                updates[key] = str(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return replace(cfg, **updates)


def load_config(path: str, overrides: dict | None = None) -> PipelineConfig:
    with open(path) as fh:
        cfg = config_from_mapping(parse_config_text(fh.read()))
    if overrides:
        cfg = config_from_mapping(overrides, base=cfg)
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(PipelineConfig)]
    return "\n".join(lines) + "\n"


class PipelineRun:
    """One artifact directory plus the in-memory state flowing between stages.

    Stages lazily reload their inputs from the directory when the in-memory
    state is missing, which is what makes separate stage invocations
    compose exactly like a single `full` run.
    """

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.dir = cfg.out_dir
        self.stream: EventStream | None = None
        self.truth = None
        self.clusters = None
        self.centroids: CentroidArray | None = None
        self.pairs = None
        self.report: dict = {}
        os.makedirs(self.dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    # ---------------- stages ----------------

    def run_synth(self) -> None:
        if self.cfg.input:
            self.stream = stream_io.read_stream(self.cfg.input)
            self.truth = None
            self.report["source"] = self.cfg.input
        else:
            self.stream, self.truth = generate_stream(self.cfg.synth_config(), threads=self.cfg.threads)
            export_ground_truth(self.truth, self.path("truth_photons.csv"), self.path("truth_labels.csv"))
            self.report["source"] = "synthetic"
        stream_io.write_stream(self.stream, self.path("events.tpxs"))
        self.report["n_events"] = len(self.stream)

    def _need_stream(self) -> EventStream:
        if self.stream is None:
            self.stream = stream_io.read_stream(self.path("events.tpxs"))
        return self.stream

    def run_cluster(self) -> None:
        stream = self._need_stream()
        self.clusters = identify_clusters(stream, self.cfg.cluster_params())
        with open(self.path("clusters.csv"), "w") as fh:
            fh.write("event_index,cluster_id\n")
            fh.writelines(f"{i},{c}\n" for i, c in enumerate(self.clusters.labels))
        self.report["n_clusters"] = len(self.clusters)
        if self.truth is not None:
            q = cluster_quality(self.clusters, self.truth)
            self.report["cluster_quality"] = {
                "split_rate": q.split_rate,
                "merge_rate": q.merge_rate,
                "purity": q.purity,
                "completeness": q.completeness,
            }

    def _need_clusters(self):
        if self.clusters is None:
            from .clustering import ClusterSet

            stream = self._need_stream()
            labels = _load_int_csv(self.path("clusters.csv"), 2)
            lab = np.empty(len(stream), dtype=np.int64)
            lab[labels[:, 0]] = labels[:, 1]
            n = int(lab.max()) + 1 if len(lab) else 0
            self.clusters = ClusterSet(stream, lab, n)
        return self.clusters

    def run_centroid(self) -> None:
        clusters = self._need_clusters()
        self.centroids = centroid_stream(clusters, ToAMethod.from_name(self.cfg.toa_method))
        with open(self.path("centroids.csv"), "w") as fh:
            fh.write("x,y,toa_ticks,size,total_tot,cluster_id\n")
            c = self.centroids
            fh.writelines(
                f"{c.x[i]},{c.y[i]},{c.toa[i]},{c.size[i]},{c.total_tot[i]},{c.cluster_index[i]}\n"
                for i in range(len(c))
            )
        self.report["n_centroids"] = len(self.centroids)

    def _need_centroids(self) -> CentroidArray:
        if self.centroids is None:
            data = _load_int_csv(self.path("centroids.csv"), 6)
            self.centroids = CentroidArray(
                data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4], data[:, 5]
            )
        return self.centroids

    def _beam_center(self, singles: PixelImage) -> tuple[float, float]:
        if singles.values.sum() > 0:
            return estimate_beam_center(singles)
        return (self.cfg.beam_center_x, self.cfg.beam_center_y)

    def run_pairs(self) -> None:
        cents = self._need_centroids()
        duration = self._need_stream().duration
        singles = singles_image(cents, duration)
        center = self._beam_center(singles)
        hist = (
            split_sensor_dtoa(cents, center, DtoaHistogram(range_ns=self.cfg.hist_range_ns))
            if len(cents)
            else DtoaHistogram(range_ns=self.cfg.hist_range_ns)
        )
        stream_io.export_histogram(hist, self.path("dtoa_hist.csv"))
        self.pairs = find_pairs(cents, self.cfg.pair_windows(), center)
        with open(self.path("pairs.csv"), "w") as fh:
            fh.write("a_index,b_index,dtoa_ticks\n")
            fh.writelines(
                f"{a},{b},{d}\n" for a, b, d in zip(self.pairs.a_idx, self.pairs.b_idx, self.pairs.dtoa)
            )
        self.report["beam_center"] = [round(center[0], 3), round(center[1], 3)]
        self.report["n_pairs"] = len(self.pairs)
        try:
            w = fwhm(hist)
            self.report["dtoa_fwhm_ns"] = w
            self.report["temporal_resolution_ns"] = temporal_resolution(w)
        except (EmptyHistogram, NoHalfCrossing) as exc:
            self.report["dtoa_fwhm_ns"] = None
            self.report["fwhm_note"] = str(exc)

    def _need_pairs(self):
        if self.pairs is None:
            from .coincidence import PairSet

            cents = self._need_centroids()
            data = _load_int_csv(self.path("pairs.csv"), 3)
            self.pairs = PairSet(cents, data[:, 0], data[:, 1])
        return self.pairs

    def run_diag(self) -> None:
        cents = self._need_centroids()
        duration = self._need_stream().duration
        center = self._beam_center(singles_image(cents, duration))
        for axis in ("x", "y"):
            ch = correlation_hist(cents, self.cfg.diag_dtoa_ns, center, axis, self.cfg.sigma_xy_px)
            img = PixelImage(ch.counts.astype(np.float64), "counts")
            stream_io.export_image(img, "csv", self.path(f"corr_{axis}.csv"))
            self.report[f"band_fractions_{axis}"] = {
                "diagonal": ch.diag_fraction,
                "anti_diagonal": ch.anti_fraction,
                "total": ch.total,
            }

    def run_efficiency(self) -> None:
        cents = self._need_centroids()
        pairs = self._need_pairs()
        duration = self._need_stream().duration
        singles = singles_image(cents, duration)
        center = self._beam_center(singles)
        s_smooth = smooth_image(singles, self.cfg.radius_px)
        zero = PixelImage.zeros(UNITS_CPS)
        c_img = coincidence_image(pairs, duration, center)
        c_bg = background_coincidence_image(singles, s_smooth, center, self.cfg.dtoa_ns)
        result = efficiency_map(
            c_img, c_bg, s_smooth, zero, center,
            denom_floor=self.cfg.denom_floor,
            meta={"duration_s": duration, "dtoa_ns": self.cfg.dtoa_ns, "radius_px": self.cfg.radius_px},
        )
        mean_m, std_m = masked_stats(result, self.cfg.dead_zone_px, self.cfg.field_radius_px)
        stream_io.export_image(result.eta, "csv", self.path("eta.csv"))
        stream_io.export_image(result.eta, "pgm16", self.path("eta.pgm"), scale=65535.0)
        stats = {
            "mean": result.mean,
            "std": result.std,
            "masked_mean": mean_m,
            "masked_std": std_m,
            "valid_pixels": int(result.valid.sum()),
            "flagged_pixels": int(result.flagged.sum()),
            "detector_only_mean": detector_only_efficiency(mean_m, self.cfg.transmission)
            if np.isfinite(mean_m)
            else None,
        }
        with open(self.path("stats.txt"), "w") as fh:
            for key, value in stats.items():
                fh.write(f"{key} = {value}\n")
        self.report["efficiency"] = stats

    # ---------------- driver ----------------

    def run(self, stage: str) -> dict:
        order = {
            "synth": [self.run_synth],
            "cluster": [self.run_cluster],
            "centroid": [self.run_centroid],
            "pairs": [self.run_pairs],
            "diag": [self.run_diag],
            "efficiency": [self.run_efficiency],
            "full": [
                self.run_synth,
                self.run_cluster,
                self.run_centroid,
                self.run_pairs,
                self.run_diag,
                self.run_efficiency,
            ],
        }
        if stage not in order:
            raise ConfigError(f"unknown stage {stage!r}")
        for step in order[stage]:
            step()
        self._finalize(stage)
        return self.report

    def _finalize(self, stage: str) -> None:
        with open(self.path("effective.cfg"), "w") as fh:
            fh.write(dump_config(self.cfg))
        with open(self.path("report.json"), "w") as fh:
            json.dump({"stage": stage, **self.report}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest = {
            "tool": "tpxcal",
            "version": __version__,
            "config_sha256": hashlib.sha256(dump_config(self.cfg).encode()).hexdigest(),
            "artifacts": {},
        }
        for name in sorted(os.listdir(self.dir)):
            if name == "manifest.json":
                continue
            with open(self.path(name), "rb") as fh:
                manifest["artifacts"][name] = hashlib.sha256(fh.read()).hexdigest()
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_pipeline(cfg: PipelineConfig, stage: str = "full") -> dict:
    return PipelineRun(cfg).run(stage)
