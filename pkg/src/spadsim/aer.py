"""Address-event stream container: the TRSP binary format.

One file holds the events of one exposure in address-event representation:
each record is (x, y, t) with pixel coordinates as u16 and the detection
time as u64 picoseconds. The header carries the full acquisition
configuration and the master seed, so a file is self-describing and a
simulated dataset can be regenerated bit-for-bit from any of its files.

Layout (all little-endian):

    magic           4 bytes  b"TRSP"
    format version  u16      currently 1
    width           u16
    height          u16
    exposure        u64      picoseconds
    event count     u64
    config length   u32
    config block    UTF-8 "key=value" lines, one per field
    master seed     u64
    records         event count x (x u16, y u16, t u64)

Records are sorted by (t, y, x). Floats in the config block are written
with ``repr``, which round-trips float64 exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    CorruptionError,
    FormatError,
    StreamWriteError,
    TruncationError,
)
from .pixel import PS_PER_SECOND, PixelTrace
from .radiometry import SceneConfig, SpadConfig

MAGIC = b"TRSP"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHHHQQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_RECORD_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<u8")])

# Fixed field order so that identical configurations always serialize to
# identical bytes.
_CONFIG_KEYS = (
    "quantum_efficiency",
    "dead_time",
    "afterpulse_prob",
    "jitter_sigma",
    "dark_count_rate",
    "pixel_pitch",
    "fill_factor",
    "wavelength",
    "reference_lux",
    "exposure",
)


@dataclass(frozen=True, eq=False)
class EventStream:
    """Events of one simulated exposure plus the configuration that produced it.

    Events are stored as parallel arrays sorted by (t, y, x). Coordinates
    are u16, which caps array dimensions at 65535 pixels per side.
    """

    width: int
    height: int
    exposure_ps: int
    x: np.ndarray
    y: np.ndarray
    t_ps: np.ndarray
    config: SpadConfig
    scene: SceneConfig
    master_seed: int

    def __post_init__(self):
        if not 1 <= self.width <= 0xFFFF or not 1 <= self.height <= 0xFFFF:
            raise ConfigurationError(
                f"width and height must be in [1, 65535], got {self.width}x{self.height}"
            )
        if self.exposure_ps < 1:
            raise ConfigurationError(f"exposure_ps must be >= 1, got {self.exposure_ps}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigurationError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        x = np.asarray(self.x, dtype=np.uint16)
        y = np.asarray(self.y, dtype=np.uint16)
        t = np.asarray(self.t_ps, dtype=np.int64)
        if not x.shape == y.shape == t.shape or x.ndim != 1:
            raise ConfigurationError("x, y, t must be 1-D arrays of equal length")
        if x.size:
            if int(x.max()) >= self.width or int(y.max()) >= self.height:
                raise ConfigurationError("event coordinates outside the array")
            if int(t.min()) < 0 or int(t.max()) > self.exposure_ps:
                raise ConfigurationError("event times outside [0, exposure]")
            if not _is_sorted_by_t_y_x(t, y, x):
                raise ConfigurationError("events must be sorted by (t, y, x)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t_ps", t)

    @property
    def event_count(self) -> int:
        return int(self.t_ps.size)

    @property
    def exposure(self) -> float:
        """Exposure in seconds."""
        return self.exposure_ps / PS_PER_SECOND

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.exposure_ps == other.exposure_ps
            and self.master_seed == other.master_seed
            and self.config == other.config
            and self.scene == other.scene
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.t_ps, other.t_ps)
        )


def _is_sorted_by_t_y_x(t: np.ndarray, y: np.ndarray, x: np.ndarray) -> bool:
    order = _lex_order_violation(t, y, x)
    return order is None


def _lex_order_violation(t: np.ndarray, y: np.ndarray, x: np.ndarray):
    """Index i of the first record pair (i, i+1) out of (t, y, x) order, or None."""
    if t.size < 2:
        return None
    dt = np.diff(t)
    dy = np.diff(y.astype(np.int32))
    dx = np.diff(x.astype(np.int32))
    ok = (dt > 0) | ((dt == 0) & ((dy > 0) | ((dy == 0) & (dx >= 0))))
    if bool(np.all(ok)):
        return None
    return int(np.argmin(ok))


def config_snapshot(config: SpadConfig, scene: SceneConfig) -> dict:
    """Flat float dict of the full acquisition configuration, in fixed key order."""
    return {
        "quantum_efficiency": config.quantum_efficiency,
        "dead_time": config.dead_time,
        "afterpulse_prob": config.afterpulse_prob,
        "jitter_sigma": config.jitter_sigma,
        "dark_count_rate": config.dark_count_rate,
        "pixel_pitch": config.pixel_pitch,
        "fill_factor": config.fill_factor,
        "wavelength": config.wavelength,
        "reference_lux": scene.reference_lux,
        "exposure": scene.exposure,
    }


def config_from_snapshot(values: dict):
    """Rebuild (SpadConfig, SceneConfig) from a snapshot dict; strict about keys."""
    missing = set(_CONFIG_KEYS) - set(values)
    extra = set(values) - set(_CONFIG_KEYS)
    if missing or extra:
        raise FormatError(
            f"config snapshot keys do not match the format: missing {sorted(missing)}, unexpected {sorted(extra)}"
        )
    numbers = {}
    for key in _CONFIG_KEYS:
        try:
            numbers[key] = float(values[key])
        except (TypeError, ValueError):
            raise FormatError(f"config value for {key!r} is not a float: {values[key]!r}") from None
    try:
        config = SpadConfig(
            quantum_efficiency=numbers["quantum_efficiency"],
            dead_time=numbers["dead_time"],
            afterpulse_prob=numbers["afterpulse_prob"],
            jitter_sigma=numbers["jitter_sigma"],
            dark_count_rate=numbers["dark_count_rate"],
            pixel_pitch=numbers["pixel_pitch"],
            fill_factor=numbers["fill_factor"],
            wavelength=numbers["wavelength"],
        )
        scene = SceneConfig(reference_lux=numbers["reference_lux"], exposure=numbers["exposure"])
    except ConfigurationError as exc:
        raise FormatError(f"config snapshot violates parameter constraints: {exc}") from None
    return config, scene


def _encode_config_block(config: SpadConfig, scene: SceneConfig) -> bytes:
    values = config_snapshot(config, scene)
    lines = [f"{key}={values[key]!r}" for key in _CONFIG_KEYS]
    return ("\n".join(lines) + "\n").encode("utf-8")


def _decode_config_block(data: bytes):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"config block is not valid UTF-8: {exc}") from None
    values = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise FormatError(f"config block line without '=': {line!r}")
        try:
            values[key] = float(raw)
        except ValueError:
            raise FormatError(f"config value for {key!r} is not a float: {raw!r}") from None
    return config_from_snapshot(values)


def write_stream(stream: EventStream, sink) -> int:
    """Serialize a stream to a binary sink; returns the number of bytes written.

    Output is bit-identical for identical input. Sink failures surface as
    a write error carrying the byte offset reached.
    """
    config_block = _encode_config_block(stream.config, stream.scene)
    records = np.empty(stream.event_count, dtype=_RECORD_DTYPE)
    records["x"] = stream.x
    records["y"] = stream.y
    records["t"] = stream.t_ps.astype(np.uint64)

    chunks = (
        _HEADER.pack(
            MAGIC, FORMAT_VERSION, stream.width, stream.height,
            stream.exposure_ps, stream.event_count,
        ),
        _U32.pack(len(config_block)),
        config_block,
        _U64.pack(stream.master_seed),
        records.tobytes(),
    )
    written = 0
    for chunk in chunks:
        try:
            sink.write(chunk)
        except OSError as exc:
            raise StreamWriteError(f"sink failed: {exc}", offset=written) from exc
        written += len(chunk)
    return written


def _read_exact(source, size: int, what: str) -> bytes:
    data = source.read(size)
    if len(data) != size:
        raise TruncationError(f"truncated {what}", expected=size, actual=len(data))
    return data


def read_stream(source) -> EventStream:
    """Parse a TRSP container; exact inverse of ``write_stream``.

    Raises a format error on bad magic/version or malformed config, a
    truncation error when the source ends early, and a corruption error
    (naming the record index) when an event lies outside the array or
    breaks the (t, y, x) ordering.
    """
    header = _read_exact(source, _HEADER.size, "header")
    magic, version, width, height, exposure_ps, event_count = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}, expected {FORMAT_VERSION}")

    (config_length,) = _U32.unpack(_read_exact(source, _U32.size, "config block length"))
    config, scene = _decode_config_block(_read_exact(source, config_length, "config block"))
    (master_seed,) = _U64.unpack(_read_exact(source, _U64.size, "master seed"))

    body_size = event_count * _RECORD_DTYPE.itemsize
    body = source.read(body_size)
    if len(body) != body_size:
        raise TruncationError(
            f"truncated event records ({event_count} declared)",
            expected=body_size, actual=len(body),
        )
    if source.read(1):
        raise FormatError("trailing bytes after the event records")

    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    x = records["x"]
    y = records["y"]
    t_u64 = records["t"]

    out_of_array = (x >= width) | (y >= height)
    if bool(np.any(out_of_array)):
        index = int(np.argmax(out_of_array))
        raise CorruptionError(
            f"event ({int(x[index])}, {int(y[index])}) outside {width}x{height} array",
            record_index=index,
        )
    beyond_exposure = t_u64 > np.uint64(exposure_ps)
    if bool(np.any(beyond_exposure)):
        index = int(np.argmax(beyond_exposure))
        raise CorruptionError(
            f"event time {int(t_u64[index])} ps beyond exposure {exposure_ps} ps",
            record_index=index,
        )
    t = t_u64.astype(np.int64)
    violation = _lex_order_violation(t, y, x)
    if violation is not None:
        raise CorruptionError("events not sorted by (t, y, x)", record_index=violation)

    return EventStream(
        width=width, height=height, exposure_ps=exposure_ps,
        x=x.copy(), y=y.copy(), t_ps=t,
        config=config, scene=scene, master_seed=master_seed,
    )


def save_stream(stream: EventStream, path) -> int:
    with open(path, "wb") as sink:
        return write_stream(stream, sink)


def load_stream(path) -> EventStream:
    with open(path, "rb") as source:
        return read_stream(source)


class TraceGrid:
    """Per-pixel view of a stream's events.

    Groups events by pixel once (stable sort preserves per-pixel time
    order) and serves individual traces, per-pixel counts, and the grouped
    timestamp storage that the flux estimators consume.
    """

    def __init__(self, stream: EventStream):
        self.width = stream.width
        self.height = stream.height
        self.exposure_ps = stream.exposure_ps
        flat = stream.y.astype(np.int64) * stream.width + stream.x.astype(np.int64)
        order = np.argsort(flat, kind="stable")
        self.times_ps = stream.t_ps[order]
        self.counts_flat = np.bincount(flat, minlength=stream.width * stream.height)
        self.offsets = np.concatenate(([0], np.cumsum(self.counts_flat)))

    @property
    def counts(self) -> np.ndarray:
        """(H, W) array of per-pixel detection counts."""
        return self.counts_flat.reshape(self.height, self.width)

    @property
    def total_events(self) -> int:
        return int(self.counts_flat.sum())

    def __getitem__(self, yx) -> PixelTrace:
        y, x = yx
        if not (0 <= y < self.height and 0 <= x < self.width):
            raise IndexError(f"pixel ({x}, {y}) outside {self.width}x{self.height} grid")
        flat = y * self.width + x
        times = self.times_ps[self.offsets[flat]: self.offsets[flat + 1]]
        return PixelTrace(times, self.exposure_ps)


def pixel_traces(stream: EventStream) -> TraceGrid:
    """Group a stream's events into per-pixel traces; counts are conserved."""
    return TraceGrid(stream)
