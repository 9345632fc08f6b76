"""Per-pixel photon detection chain and whole-array event simulation.

The pipeline applies, in order: Poisson photon arrivals, quantum-efficiency
thinning, dark-count injection, afterpulsing, non-paralyzable dead-time
filtering, and Gaussian timing jitter. Sampling stages work in float64
seconds; from the dead-time stage onward timestamps live on the detector
TDC's integer picosecond grid, where gap comparisons and the detection-count
cap are exact instead of subject to float rounding.

Dark counts are injected after quantum-efficiency thinning (they originate
in the diode, not the photon stream) and afterpulsing applies to photon and
dark detections alike, since the avalanche mechanism is identical for both.
Afterpulses are single-generation: they do not spawn further afterpulses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .radiometry import FluxMap, SceneConfig, SpadConfig
from .rng import (
    STAGE_AFTERPULSE,
    STAGE_ARRIVALS,
    STAGE_DARK,
    STAGE_JITTER,
    STAGE_QE,
    RngSeedPolicy,
)

PS_PER_SECOND = 1e12

_EMPTY_SECONDS = np.empty(0, dtype=np.float64)
_EMPTY_PS = np.empty(0, dtype=np.int64)


def seconds_to_ps(seconds: float) -> int:
    """Snap a duration in seconds to the 1 ps timestamp grid (round half to even)."""
    return int(np.rint(seconds * PS_PER_SECOND))


@dataclass(frozen=True)
class PixelTrace:
    """Detections of one pixel over one exposure, on the 1 ps TDC grid.

    ``timestamps_ps`` is a sorted int64 array in [0, exposure_ps]. In a
    pre-jitter trace consecutive timestamps additionally differ by at least
    the dead time and the count never exceeds floor(exposure / dead_time);
    jitter may shrink gaps, so post-jitter traces only guarantee the bounds
    and ordering validated here.
    """

    timestamps_ps: np.ndarray
    exposure_ps: int

    def __post_init__(self):
        ts = np.asarray(self.timestamps_ps, dtype=np.int64)
        if ts.ndim != 1:
            raise ConfigurationError(f"timestamps must be 1-D, got shape {ts.shape}")
        if self.exposure_ps < 1:
            raise ConfigurationError(f"exposure_ps must be >= 1, got {self.exposure_ps}")
        if ts.size:
            if np.any(np.diff(ts) < 0):
                raise ConfigurationError("timestamps must be sorted ascending")
            if ts[0] < 0 or ts[-1] > self.exposure_ps:
                raise ConfigurationError("timestamps must lie in [0, exposure]")
        object.__setattr__(self, "timestamps_ps", ts)

    @property
    def count(self) -> int:
        return int(self.timestamps_ps.size)

    @property
    def exposure(self) -> float:
        """Exposure in seconds."""
        return self.exposure_ps / PS_PER_SECOND

    @property
    def seconds(self) -> np.ndarray:
        """Timestamps in seconds (float64 view of the ps grid)."""
        return self.timestamps_ps / PS_PER_SECOND

    @classmethod
    def from_seconds(cls, timestamps, exposure: float) -> "PixelTrace":
        """Build a trace from float timestamps in seconds, snapping to the ps grid."""
        ts = np.asarray(timestamps, dtype=np.float64)
        return cls(np.rint(ts * PS_PER_SECOND).astype(np.int64), seconds_to_ps(exposure))


def sample_arrivals(flux: float, exposure: float, rng: np.random.Generator) -> np.ndarray:
    """Photon arrival times of a homogeneous Poisson process over one exposure.

    The arrival count is Poisson(flux * exposure); conditioned on the count,
    arrival times are i.i.d. uniform on [0, exposure). Returns a sorted
    float64 array in seconds.
    """
    if flux < 0.0:
        raise ConfigurationError(f"flux must be non-negative, got {flux}")
    if flux == 0.0:
        return _EMPTY_SECONDS.copy()
    count = rng.poisson(flux * exposure)
    if count == 0:
        return _EMPTY_SECONDS.copy()
    times = rng.random(count)
    times *= exposure
    times.sort()
    return times


def apply_quantum_efficiency(arrivals, q: float, rng: np.random.Generator) -> np.ndarray:
    """Thin an arrival list, retaining each element independently with probability q."""
    if not 0.0 < q <= 1.0:
        raise ConfigurationError(f"quantum efficiency must be in (0, 1], got {q}")
    arrivals = np.asarray(arrivals, dtype=np.float64)
    if arrivals.size == 0:
        return arrivals.copy()
    return arrivals[rng.random(arrivals.size) < q]


def sample_dark_counts(dcr: float, exposure: float, rng: np.random.Generator) -> np.ndarray:
    """Dark-count times: a homogeneous Poisson process at the dark count rate.

    Dark counts are spurious avalanches, so they are not subject to
    quantum-efficiency thinning.
    """
    if dcr < 0.0:
        raise ConfigurationError(f"dark count rate must be non-negative, got {dcr}")
    return sample_arrivals(dcr, exposure, rng)


def apply_afterpulsing(
    detections,
    p_ap: float,
    dead_time: float,
    exposure: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Add afterpulses to a sorted detection list and return the merged sorted union.

    Each detection independently triggers at most one afterpulse with
    probability ``p_ap``, delayed by an exponential with mean half the dead
    time. Afterpulses falling at or beyond the exposure end are discarded,
    and afterpulses never spawn afterpulses of their own.
    """
    if not 0.0 <= p_ap < 1.0:
        raise ConfigurationError(f"afterpulse probability must be in [0, 1), got {p_ap}")
    detections = np.asarray(detections, dtype=np.float64)
    if p_ap == 0.0 or detections.size == 0:
        return detections.copy()
    spawns = rng.random(detections.size) < p_ap
    n_spawned = int(np.count_nonzero(spawns))
    if n_spawned == 0:
        return detections.copy()
    afterpulses = detections[spawns] + rng.exponential(0.5 * dead_time, n_spawned)
    afterpulses = afterpulses[afterpulses < exposure]
    if afterpulses.size == 0:
        return detections.copy()
    merged = np.concatenate((detections, afterpulses))
    merged.sort()
    return merged


def quantize_timestamps(timestamps, exposure_ps: int) -> np.ndarray:
    """Snap sorted float timestamps in seconds onto the integer ps grid.

    Values are rounded to the nearest picosecond and clipped into
    [0, exposure_ps - 1]: sampling produces times in [0, exposure), and
    keeping the quantized times strictly below the exposure end preserves
    the exact dead-time count cap. Rounding is monotone, so sorted input
    stays sorted; sortedness also makes the boundary checks scalar
    (inspect the ends) instead of full clip passes.
    """
    timestamps = np.asarray(timestamps, dtype=np.float64)
    ps = np.rint(timestamps * PS_PER_SECOND).astype(np.int64)
    if ps.size:
        if ps[-1] >= exposure_ps:
            ps[ps >= exposure_ps] = exposure_ps - 1
        if ps[0] < 0:
            ps[ps < 0] = 0
    return ps


def _dead_time_filter_ps(events_ps: np.ndarray, dead_time_ps: int) -> np.ndarray:
    """Greedy non-paralyzable dead-time filter on the integer ps grid.

    Accepts the first event, then rejects every event closer than
    ``dead_time_ps`` to the last accepted one. The common case (no gap
    below the dead time) is detected vectorially; only traces that
    actually lose events take the scalar path.
    """
    if events_ps.size <= 1:
        return events_ps
    if int(np.min(np.diff(events_ps))) >= dead_time_ps:
        return events_ps
    accepted = []
    last = None
    for t in events_ps.tolist():
        if last is None or t - last >= dead_time_ps:
            accepted.append(t)
            last = t
    return np.asarray(accepted, dtype=np.int64)


def apply_dead_time(events, dead_time: float) -> np.ndarray:
    """Filter a sorted timestamp list with a greedy non-paralyzable dead time.

    Accept the first event; reject any event within ``dead_time`` of the
    last accepted event; surviving consecutive events therefore differ by
    at least the dead time. Timestamps are snapped to the detector's 1 ps
    grid before comparison, so acceptance decisions are exact integer
    arithmetic, and the returned times lie on that grid (in seconds).
    """
    if dead_time < 0.0:
        raise ConfigurationError(f"dead_time must be non-negative, got {dead_time}")
    events = np.asarray(events, dtype=np.float64)
    if events.size == 0:
        return events.copy()
    ps = np.rint(events * PS_PER_SECOND).astype(np.int64)
    accepted = _dead_time_filter_ps(ps, seconds_to_ps(dead_time))
    return accepted / PS_PER_SECOND


def _jitter_ps(
    events_ps: np.ndarray,
    sigma_ps: float,
    exposure_ps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Gaussian-perturb grid timestamps, clamp into [0, exposure_ps], re-sort."""
    perturbed = np.rint(events_ps + rng.normal(0.0, sigma_ps, events_ps.size))
    out = perturbed.astype(np.int64)
    out[out < 0] = 0
    out[out > exposure_ps] = exposure_ps
    out.sort()
    return out


def apply_jitter(events, sigma: float, exposure: float, rng: np.random.Generator) -> np.ndarray:
    """Perturb each timestamp by independent Gaussian noise of std ``sigma``.

    Results are clamped to [0, exposure] and re-sorted, since jitter can
    reorder near-simultaneous events. With ``sigma`` 0 the input is
    returned unchanged; otherwise the output lies on the 1 ps grid.
    """
    if sigma < 0.0:
        raise ConfigurationError(f"sigma must be non-negative, got {sigma}")
    events = np.asarray(events, dtype=np.float64)
    if sigma == 0.0 or events.size == 0:
        return events.copy()
    ps = np.rint(events * PS_PER_SECOND).astype(np.int64)
    jittered = _jitter_ps(ps, sigma * PS_PER_SECOND, seconds_to_ps(exposure), rng)
    return jittered / PS_PER_SECOND


class _PixelKernel:
    """Precomputed per-image constants for the per-pixel pipeline.

    ``run`` draws every random stage from its own (pixel, stage) stream, so
    its output is a pure function of (master seed, image key, pixel index)
    regardless of pixel iteration order. Stages whose outcome is forced
    (zero flux, zero DCR, unit QE, nothing to perturb) skip their stream
    entirely; stream independence makes that safe.
    """

    def __init__(self, config: SpadConfig, scene: SceneConfig):
        self.exposure = scene.exposure
        self.exposure_ps = seconds_to_ps(scene.exposure)
        self.q = config.quantum_efficiency
        self.dcr = config.dark_count_rate
        self.p_ap = config.afterpulse_prob
        self.dead_time = config.dead_time
        # A dead time below the TDC resolution cannot reject anything; one
        # tick is the smallest enforceable value and keeps the cap finite.
        self.dead_time_ps = max(seconds_to_ps(config.dead_time), 1)
        self.max_count = self.exposure_ps // self.dead_time_ps
        self.sigma = config.jitter_sigma

    def run(self, flux: float, streams, pixel_index: int):
        """Full chain for one pixel -> (post_jitter_ps, pre_jitter_ps)."""
        if flux > 0.0:
            detected = sample_arrivals(flux, self.exposure, streams.stream(pixel_index, STAGE_ARRIVALS))
            if detected.size and self.q < 1.0:
                detected = apply_quantum_efficiency(detected, self.q, streams.stream(pixel_index, STAGE_QE))
        else:
            detected = _EMPTY_SECONDS
        if self.dcr > 0.0:
            dark = sample_dark_counts(self.dcr, self.exposure, streams.stream(pixel_index, STAGE_DARK))
            if dark.size and detected.size:
                detected = np.concatenate((detected, dark))
                detected.sort()
            elif dark.size:
                detected = dark
        if self.p_ap > 0.0 and detected.size:
            detected = apply_afterpulsing(
                detected, self.p_ap, self.dead_time, self.exposure,
                streams.stream(pixel_index, STAGE_AFTERPULSE),
            )
        pre_jitter = _dead_time_filter_ps(
            quantize_timestamps(detected, self.exposure_ps), self.dead_time_ps
        )
        if pre_jitter.size > self.max_count:
            pre_jitter = pre_jitter[: self.max_count]
        if self.sigma > 0.0 and pre_jitter.size:
            post = _jitter_ps(
                pre_jitter, self.sigma * PS_PER_SECOND, self.exposure_ps,
                streams.stream(pixel_index, STAGE_JITTER),
            )
        else:
            post = pre_jitter
        return post, pre_jitter


@dataclass(frozen=True)
class PixelSimResult:
    """Post-jitter trace plus the pre-jitter trace it was derived from.

    The pre-jitter trace is the one carrying the hard dead-time guarantees
    (gaps and count cap); jitter can locally shrink gaps below the dead
    time, so invariant checks must run on ``pre_jitter``.
    """

    trace: PixelTrace
    pre_jitter: PixelTrace


def simulate_pixel(
    flux: float,
    config: SpadConfig,
    scene: SceneConfig,
    streams,
    pixel_index: int = 0,
) -> PixelSimResult:
    """Simulate one pixel's full detection chain.

    ``streams`` provides the per-stage random streams: either an
    ``RngSeedPolicy`` or the reusable scratch from ``RngSeedPolicy.scratch``.
    """
    kernel = _PixelKernel(config, scene)
    post, pre = kernel.run(flux, streams, pixel_index)
    return PixelSimResult(
        trace=PixelTrace(post, kernel.exposure_ps),
        pre_jitter=PixelTrace(pre, kernel.exposure_ps),
    )


def simulate_array(
    flux_map: FluxMap,
    config: SpadConfig,
    scene: SceneConfig,
    seed_policy: RngSeedPolicy,
):
    """Simulate every pixel of a flux map and collect the events of one exposure.

    Pixels are processed with independently derived random streams, so the
    result is identical however the work is ordered or sliced. Returns an
    ``EventStream`` sorted by (t, y, x) and carrying the configuration
    snapshot needed to reproduce it.
    """
    from .aer import EventStream  # aer imports PixelTrace from here

    kernel = _PixelKernel(config, scene)
    scratch = seed_policy.scratch()
    flat_flux = flux_map.flux.ravel()
    width = flux_map.width

    times_parts = []
    index_parts = []
    for pixel_index in range(flat_flux.size):
        post, _ = kernel.run(float(flat_flux[pixel_index]), scratch, pixel_index)
        if post.size:
            times_parts.append(post)
            index_parts.append(np.full(post.size, pixel_index, dtype=np.int64))

    if times_parts:
        t = np.concatenate(times_parts)
        flat_index = np.concatenate(index_parts)
        x = (flat_index % width).astype(np.uint16)
        y = (flat_index // width).astype(np.uint16)
        order = np.lexsort((x, y, t))
        t, x, y = t[order], x[order], y[order]
    else:
        t = _EMPTY_PS.copy()
        x = np.empty(0, dtype=np.uint16)
        y = np.empty(0, dtype=np.uint16)

    return EventStream(
        width=width,
        height=flux_map.height,
        exposure_ps=kernel.exposure_ps,
        x=x,
        y=y,
        t_ps=t,
        config=config,
        scene=scene,
        master_seed=seed_policy.master_seed,
    )
