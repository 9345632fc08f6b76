"""Asynchronous time-resolved SPAD array simulator.

Simulates per-pixel photon detection (Poisson arrivals, quantum-efficiency
thinning, dark counts, afterpulsing, dead time, timing jitter), serializes
the resulting address-event streams to a self-describing binary container,
reconstructs flux images with three closed-form estimators, and drives
whole-dataset generation with reproducible per-sample random streams.
"""

from .aer import (
    EventStream,
    TraceGrid,
    load_stream,
    pixel_traces,
    read_stream,
    save_stream,
    write_stream,
)
from .dataset import (
    LuxSchedule,
    default_lux_schedule,
    derive_image_key,
    export_reference,
    generate_dataset,
    read_manifest,
    reconstruct_dataset,
    verify_manifest,
)
from .errors import (
    ConfigurationError,
    CorruptionError,
    CountMismatchError,
    DataError,
    FormatError,
    SpadSimError,
    StreamWriteError,
    TruncationError,
    UndefinedNormalizationError,
)
from .idx import LabeledImages, read_idx, read_idx_images, read_idx_labels
from .pixel import (
    PixelSimResult,
    PixelTrace,
    apply_afterpulsing,
    apply_dead_time,
    apply_jitter,
    apply_quantum_efficiency,
    sample_arrivals,
    sample_dark_counts,
    simulate_array,
    simulate_pixel,
)
from .radiometry import (
    FluxMap,
    ReferenceImage,
    SceneConfig,
    SpadConfig,
    expected_flux,
    image_to_lux,
    lux_to_flux,
    photon_energy,
    rgb_to_grayscale,
)
from .reconstruct import (
    AppliedNormalization,
    Estimator,
    FluxEstimate,
    Normalization,
    apply_normalization,
    estimate_counts,
    estimate_ip,
    estimate_pf,
    fit_normalization,
    preview_u8,
    reconstruct_image,
)
from .rng import RngSeedPolicy, derive_key
from .stats import (
    BimodalityReport,
    CountHistogram,
    bimodality_check,
    count_histogram,
    mean_count,
    write_histogram,
)

__version__ = "0.1.0"

__all__ = [
    "BimodalityReport",
    "ConfigurationError",
    "CorruptionError",
    "CountHistogram",
    "CountMismatchError",
    "DataError",
    "AppliedNormalization",
    "Estimator",
    "EventStream",
    "FluxEstimate",
    "FluxMap",
    "FormatError",
    "LabeledImages",
    "LuxSchedule",
    "Normalization",
    "PixelSimResult",
    "PixelTrace",
    "ReferenceImage",
    "RngSeedPolicy",
    "SceneConfig",
    "SpadConfig",
    "SpadSimError",
    "StreamWriteError",
    "TraceGrid",
    "TruncationError",
    "UndefinedNormalizationError",
    "apply_afterpulsing",
    "apply_dead_time",
    "apply_jitter",
    "apply_normalization",
    "apply_quantum_efficiency",
    "bimodality_check",
    "count_histogram",
    "default_lux_schedule",
    "derive_image_key",
    "derive_key",
    "estimate_counts",
    "estimate_ip",
    "estimate_pf",
    "expected_flux",
    "export_reference",
    "fit_normalization",
    "generate_dataset",
    "image_to_lux",
    "photon_energy",
    "load_stream",
    "lux_to_flux",
    "mean_count",
    "write_histogram",
    "pixel_traces",
    "read_idx",
    "read_idx_images",
    "read_idx_labels",
    "read_manifest",
    "read_stream",
    "reconstruct_dataset",
    "preview_u8",
    "reconstruct_image",
    "rgb_to_grayscale",
    "sample_arrivals",
    "sample_dark_counts",
    "save_stream",
    "simulate_array",
    "simulate_pixel",
    "verify_manifest",
    "write_stream",
]
