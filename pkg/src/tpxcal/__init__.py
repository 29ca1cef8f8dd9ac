"""Post-processing and calibration pipeline for an intensified
time-tagging single-photon camera, characterized with correlated photon
pairs: raw pixel events -> clusters -> centroids -> coincidences ->
per-pixel efficiency map and temporal resolution, verified against a
built-in synthetic event-stream oracle with ground truth.
"""

__version__ = "0.1.0"

from .centroiding import ToAMethod, centroid, centroid_stream
from .clustering import ClusterParams, ClusterQuality, cluster_quality, identify_clusters
from .coincidence import (
    CorrHist2D,
    DtoaHistogram,
    PairWindows,
    correlation_hist,
    find_pairs,
    fwhm,
    split_sensor_dtoa,
    temporal_resolution,
)
from .efficiency import (
    EfficiencyResult,
    background_coincidence_image,
    coincidence_image,
    detector_only_efficiency,
    efficiency_map,
    estimate_beam_center,
    masked_stats,
    singles_image,
    smooth_image,
)
from .model import (
    Centroid,
    CentroidArray,
    Cluster,
    CoincidencePair,
    EventStream,
    PixelImage,
    RawEvent,
    SENSOR_SIZE,
    TOA_TICK_NS,
    TOT_TICK_NS,
    shift_to_beam_frame,
)
from .stream_io import export_histogram, export_image, read_stream, write_stream
from .synth import (
    GroundTruth,
    SynthConfig,
    generate_stream,
    intensify,
    iter_event_slices,
    time_walk,
    uniform_efficiency,
)
