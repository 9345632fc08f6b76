"""Photon-count statistics over event streams.

Pools per-pixel detection counts into integer-binned histograms, computes
per-stream mean counts, and locates histogram peaks. At low light the count
histogram of a mostly-dark image collection is dominated by a mode at zero;
as the light level rises the bright-pixel population separates into a
secondary peak, which ``bimodality_check`` detects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .aer import EventStream
from .errors import ConfigurationError


@dataclass(frozen=True)
class CountHistogram:
    """Histogram of per-pixel photon counts with unit-width integer bins.

    ``frequencies[k]`` is the number of pixels that detected exactly ``k``
    events; bins run from 0 to the maximum observed count.
    """

    frequencies: np.ndarray
    total_pixels: int
    lux_label: Optional[str] = None

    def __post_init__(self):
        freq = np.asarray(self.frequencies, dtype=np.int64)
        if freq.ndim != 1 or freq.size < 1:
            raise ConfigurationError(f"frequencies must be a non-empty 1-D array, got shape {freq.shape}")
        if freq.min() < 0:
            raise ConfigurationError("frequencies must be non-negative")
        if int(freq.sum()) != self.total_pixels:
            raise ConfigurationError(
                f"frequencies sum to {int(freq.sum())} but total_pixels is {self.total_pixels}"
            )
        object.__setattr__(self, "frequencies", freq)

    @property
    def bins(self) -> np.ndarray:
        """Integer count values, one per frequency entry."""
        return np.arange(self.frequencies.size)

    @property
    def modal_bin(self) -> int:
        """Count value with the highest raw frequency (lowest wins ties)."""
        return int(np.argmax(self.frequencies))

    @property
    def first_moment(self) -> float:
        """Mean photon count over all pooled pixels."""
        return float(np.dot(self.bins, self.frequencies)) / self.total_pixels

    def merge(self, other: "CountHistogram") -> "CountHistogram":
        """Associative pooling of two partial histograms."""
        if self.lux_label is not None and other.lux_label is not None and self.lux_label != other.lux_label:
            raise ConfigurationError(
                f"cannot merge histograms for different lux labels: {self.lux_label!r} vs {other.lux_label!r}"
            )
        size = max(self.frequencies.size, other.frequencies.size)
        merged = np.zeros(size, dtype=np.int64)
        merged[: self.frequencies.size] += self.frequencies
        merged[: other.frequencies.size] += other.frequencies
        return CountHistogram(
            frequencies=merged,
            total_pixels=self.total_pixels + other.total_pixels,
            lux_label=self.lux_label if self.lux_label is not None else other.lux_label,
        )


def count_histogram(streams, lux_label: Optional[str] = None) -> CountHistogram:
    """Pool per-pixel counts of a stream collection into one histogram.

    All streams must share dimensions and exposure.
    """
    shape = None
    parts = []
    total_pixels = 0
    for stream in streams:
        key = (stream.width, stream.height, stream.exposure_ps)
        if shape is None:
            shape = key
        elif key != shape:
            raise ConfigurationError(
                f"streams disagree on dimensions/exposure: {key} vs {shape}"
            )
        pixels = stream.width * stream.height
        flat = stream.y.astype(np.int64) * stream.width + stream.x.astype(np.int64)
        per_pixel = np.bincount(flat, minlength=pixels)
        parts.append(np.bincount(per_pixel))
        total_pixels += pixels
    if shape is None:
        raise ConfigurationError("cannot build a histogram from an empty stream collection")
    size = max(part.size for part in parts)
    frequencies = np.zeros(size, dtype=np.int64)
    for part in parts:
        frequencies[: part.size] += part
    return CountHistogram(frequencies=frequencies, total_pixels=total_pixels, lux_label=lux_label)


def mean_count(stream: EventStream) -> float:
    """Mean detections per pixel of one stream: event_count / (width * height)."""
    return stream.event_count / (stream.width * stream.height)


@dataclass(frozen=True)
class BimodalityReport:
    """Peak structure of a count histogram.

    ``peaks`` are strict local maxima of the smoothed frequency profile
    above the noise floor (log-scaling would not move them: log is
    monotone). The primary peak is the highest; everything else is a
    secondary peak.
    """

    modal_bin: int
    peaks: Tuple[int, ...]
    primary_peak: Optional[int]
    secondary_peaks: Tuple[int, ...]

    @property
    def has_secondary(self) -> bool:
        return len(self.secondary_peaks) > 0


def bimodality_check(histogram: CountHistogram, min_fraction: float = 2e-4) -> BimodalityReport:
    """Locate histogram peaks: strict local maxima after width-3 smoothing.

    The profile is smoothed with a width-3 moving average (edge bins are
    averaged with themselves replicated, so a heavy zero bin is not
    penalized for having no left neighbour), and a bin is a peak when it
    strictly exceeds both smoothed neighbours and holds at least
    ``min_fraction`` of all pooled pixels. The floor suppresses spurious
    single-pixel wiggles in sparse tails.
    """
    if not 0.0 <= min_fraction < 1.0:
        raise ConfigurationError(f"min_fraction must be in [0, 1), got {min_fraction}")
    freq = histogram.frequencies.astype(np.float64)
    padded = np.concatenate((freq[:1], freq, freq[-1:]))
    smoothed = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    neighbours = np.concatenate(([0.0], smoothed, [0.0]))
    is_peak = (smoothed > neighbours[:-2]) & (smoothed > neighbours[2:])
    floor = min_fraction * histogram.total_pixels
    is_peak &= smoothed >= floor
    peaks = tuple(int(i) for i in np.flatnonzero(is_peak))
    if peaks:
        primary = max(peaks, key=lambda i: smoothed[i])
        secondary = tuple(p for p in peaks if p != primary)
    else:
        primary = None
        secondary = ()
    return BimodalityReport(
        modal_bin=histogram.modal_bin,
        peaks=peaks,
        primary_peak=primary,
        secondary_peaks=secondary,
    )


def write_histogram(histogram: CountHistogram, sink, delimiter: str = ",") -> None:
    """Write a histogram as delimited text rows of (bin, frequency)."""
    sink.write(f"bin{delimiter}frequency\n")
    for value, frequency in zip(histogram.bins, histogram.frequencies):
        sink.write(f"{int(value)}{delimiter}{int(frequency)}\n")
