"""Flux estimators and image reconstruction from event streams.

Three closed-form per-pixel estimators recover photon flux from a pixel's
detection count and/or timestamps:

* Counts:             flux = N / (q T)
* Passive free-running: flux = N / (q (T - N tau_d)) — corrects for the
  exposure fraction lost to dead time; saturates at 1/(q tau_d) when the
  corrected live time reaches zero.
* Inter-photon:       flux = (N-1) / (q (X_N - X_1 - (N-1) tau_d)) — uses
  the live time between the first and last detection; undefined below two
  detections (returns 0), saturates like the free-running form when the
  denominator is non-positive (possible on jittered data).

Estimator denominators are evaluated in integer picoseconds, so exact
saturation cases (for example a trace with one detection per dead time)
are decided exactly rather than by float cancellation.

Reconstruction is normalized for storage and display by the median of the
strictly positive pixel values over a training collection, then clipped at
a multiple of that median (default 3).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aer import EventStream, TraceGrid, pixel_traces
from .errors import ConfigurationError, UndefinedNormalizationError
from .pixel import PS_PER_SECOND, PixelTrace, seconds_to_ps
from .radiometry import SpadConfig


class Estimator(enum.Enum):
    """Flux estimator choice."""

    COUNTS = "counts"
    PASSIVE_FREE_RUNNING = "pf"
    INTER_PHOTON = "ip"

    @classmethod
    def from_name(cls, name: str) -> "Estimator":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(member.value for member in cls)
            raise ConfigurationError(f"unknown estimator {name!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class Normalization:
    """Fitted normalization state: the median of strictly positive training values."""

    median_nonzero: float

    def __post_init__(self):
        if not np.isfinite(self.median_nonzero) or self.median_nonzero <= 0.0:
            raise ConfigurationError(f"median_nonzero must be positive and finite, got {self.median_nonzero}")


@dataclass(frozen=True)
class AppliedNormalization:
    """Record of a normalization applied to an estimate."""

    median_nonzero: float
    clip_multiple: Optional[float]


@dataclass(frozen=True)
class FluxEstimate:
    """Per-pixel flux estimates (photons/second), or normalized values after
    ``apply_normalization`` (then dimensionless, in [0, clip_multiple])."""

    flux: np.ndarray
    estimator: Estimator
    normalization: Optional[AppliedNormalization] = None

    def __post_init__(self):
        flux = np.asarray(self.flux, dtype=np.float64)
        if flux.ndim != 2 or flux.shape[0] < 1 or flux.shape[1] < 1:
            raise ConfigurationError(f"flux must be 2-D and non-empty, got shape {flux.shape}")
        if not np.all(np.isfinite(flux)) or flux.min() < 0.0:
            raise ConfigurationError("flux values must be finite and non-negative")
        if self.normalization is not None and self.normalization.clip_multiple is not None:
            if flux.max() > self.normalization.clip_multiple:
                raise ConfigurationError("normalized values exceed the clip multiple")
        object.__setattr__(self, "flux", flux)

    @property
    def width(self) -> int:
        return self.flux.shape[1]

    @property
    def height(self) -> int:
        return self.flux.shape[0]


def _validate_q(q: float):
    if not 0.0 < q <= 1.0:
        raise ConfigurationError(f"quantum efficiency must be in (0, 1], got {q}")


def estimate_counts(trace: PixelTrace, q: float, exposure: float) -> float:
    """Counts estimator: N / (q T)."""
    _validate_q(q)
    if exposure <= 0.0:
        raise ConfigurationError(f"exposure must be positive, got {exposure}")
    return trace.count / (q * exposure)


def estimate_pf(trace: PixelTrace, q: float, exposure: float, dead_time: float) -> float:
    """Passive free-running estimator: N / (q (T - N tau_d)), saturating at 1/(q tau_d)."""
    _validate_q(q)
    if exposure <= 0.0 or dead_time <= 0.0:
        raise ConfigurationError("exposure and dead_time must be positive")
    denominator_ps = seconds_to_ps(exposure) - trace.count * seconds_to_ps(dead_time)
    if denominator_ps <= 0:
        return 1.0 / (q * dead_time)
    return trace.count / (q * (denominator_ps / PS_PER_SECOND))


def estimate_ip(trace: PixelTrace, q: float, dead_time: float) -> float:
    """Inter-photon estimator: (N-1) / (q (X_N - X_1 - (N-1) tau_d)).

    Needs at least two detections (returns 0 below that); on a non-positive
    denominator returns the saturation value 1/(q tau_d).
    """
    _validate_q(q)
    if dead_time <= 0.0:
        raise ConfigurationError(f"dead_time must be positive, got {dead_time}")
    n = trace.count
    if n < 2:
        return 0.0
    span_ps = int(trace.timestamps_ps[-1]) - int(trace.timestamps_ps[0])
    denominator_ps = span_ps - (n - 1) * seconds_to_ps(dead_time)
    if denominator_ps <= 0:
        return 1.0 / (q * dead_time)
    return (n - 1) / (q * (denominator_ps / PS_PER_SECOND))


def _estimate_grid(grid: TraceGrid, estimator: Estimator, q: float, dead_time: float) -> np.ndarray:
    """Vectorized per-pixel estimation over a grouped trace grid."""
    counts = grid.counts_flat
    exposure_ps = grid.exposure_ps
    dead_time_ps = seconds_to_ps(dead_time)
    saturation = 1.0 / (q * dead_time)

    if estimator is Estimator.COUNTS:
        flux = counts / (q * (exposure_ps / PS_PER_SECOND))
    elif estimator is Estimator.PASSIVE_FREE_RUNNING:
        denominator_ps = exposure_ps - counts * dead_time_ps
        live = denominator_ps > 0
        flux = np.full(counts.shape, saturation, dtype=np.float64)
        np.divide(counts, q * (denominator_ps / PS_PER_SECOND), out=flux, where=live)
    else:
        flux = np.zeros(counts.shape, dtype=np.float64)
        usable = np.flatnonzero(counts >= 2)
        if usable.size:
            first = grid.times_ps[grid.offsets[usable]]
            last = grid.times_ps[grid.offsets[usable + 1] - 1]
            denominator_ps = (last - first) - (counts[usable] - 1) * dead_time_ps
            live = denominator_ps > 0
            values = np.full(usable.shape, saturation, dtype=np.float64)
            np.divide(
                counts[usable] - 1, q * (denominator_ps / PS_PER_SECOND),
                out=values, where=live,
            )
            flux[usable] = values
    return flux.reshape(grid.height, grid.width)


def reconstruct_image(
    stream: EventStream,
    estimator: Estimator,
    config: Optional[SpadConfig] = None,
) -> FluxEstimate:
    """Apply the chosen estimator pixel-wise over a stream's traces.

    ``config`` supplies q and the dead time; by default the stream's own
    embedded configuration is used.
    """
    if config is None:
        config = stream.config
    _validate_q(config.quantum_efficiency)
    grid = pixel_traces(stream)
    flux = _estimate_grid(grid, estimator, config.quantum_efficiency, config.dead_time)
    return FluxEstimate(flux=flux, estimator=estimator)


def fit_normalization(training_estimates) -> Normalization:
    """Median of all strictly positive pixel values pooled over a training collection.

    Raises an undefined-normalization error when the pool is empty (an
    all-zero collection has no usable scale).
    """
    positive_parts = []
    count = 0
    for estimate in training_estimates:
        count += 1
        values = estimate.flux
        positive = values[values > 0.0]
        if positive.size:
            positive_parts.append(positive)
    if count == 0:
        raise UndefinedNormalizationError("cannot fit normalization on an empty collection")
    if not positive_parts:
        raise UndefinedNormalizationError("all training values are zero; normalization median is undefined")
    pooled = np.concatenate(positive_parts)
    return Normalization(median_nonzero=float(np.median(pooled)))


def apply_normalization(
    estimate: FluxEstimate,
    state: Normalization,
    clip_multiple: Optional[float] = 3.0,
) -> FluxEstimate:
    """Divide by the fitted median and clip to [0, clip_multiple].

    Pass ``clip_multiple=None`` to normalize without clipping.
    """
    if clip_multiple is not None and clip_multiple <= 0.0:
        raise ConfigurationError(f"clip_multiple must be positive, got {clip_multiple}")
    values = estimate.flux / state.median_nonzero
    if clip_multiple is not None:
        np.clip(values, 0.0, clip_multiple, out=values)
    return FluxEstimate(
        flux=values,
        estimator=estimate.estimator,
        normalization=AppliedNormalization(
            median_nonzero=state.median_nonzero, clip_multiple=clip_multiple
        ),
    )


def preview_u8(estimate: FluxEstimate) -> np.ndarray:
    """8-bit preview raster: value * 255 / scale, rounded half to even.

    The scale is the clip multiple for normalized estimates and the value
    maximum otherwise (blank images render as zeros).
    """
    values = estimate.flux
    if estimate.normalization is not None and estimate.normalization.clip_multiple is not None:
        scale = estimate.normalization.clip_multiple
    else:
        scale = float(values.max()) if values.size and values.max() > 0.0 else 1.0
    scaled = np.rint(values * (255.0 / scale))
    return np.clip(scaled, 0, 255).astype(np.uint8)
