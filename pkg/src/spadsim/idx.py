"""Reader for the IDX containers used by the original MNIST distribution.

IDX is big-endian: a u32 magic encoding dtype and rank, u32 dimension
sizes, then the raw payload. Image files (magic 0x00000803) hold
``count x rows x cols`` unsigned bytes; label files (magic 0x00000801)
hold ``count`` unsigned bytes. Files may be gzip-compressed; compression
is auto-detected from the two-byte gzip signature.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CountMismatchError, FormatError, TruncationError
from .radiometry import ReferenceImage

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

_U32 = struct.Struct(">I")


@dataclass(frozen=True)
class LabeledImages:
    """Grayscale image set with labels.

    ``raw`` keeps the original unsigned bytes; ``image(i)`` yields the
    normalized [0, 1] view (bytes divided by 255).
    """

    raw: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.uint8)
        if raw.ndim != 3:
            raise FormatError(f"images must be a (count, rows, cols) array, got shape {raw.shape}")
        if labels.ndim != 1 or labels.shape[0] != raw.shape[0]:
            raise CountMismatchError(
                f"{raw.shape[0]} images but {labels.shape[0]} labels"
            )
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return int(self.raw.shape[0])

    @property
    def rows(self) -> int:
        return int(self.raw.shape[1])

    @property
    def cols(self) -> int:
        return int(self.raw.shape[2])

    def image(self, index: int) -> ReferenceImage:
        """Normalized grayscale image number ``index``."""
        return ReferenceImage.from_raster(self.raw[index])

    def subset(self, indices) -> "LabeledImages":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledImages(raw=self.raw[indices], labels=self.labels[indices])


def _open_maybe_gzip(path):
    with open(path, "rb") as probe:
        signature = probe.read(2)
    if signature == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(source, size: int, what: str, offset: int) -> bytes:
    data = source.read(size)
    if len(data) != size:
        raise TruncationError(
            f"truncated {what} at byte offset {offset}", expected=size, actual=len(data)
        )
    return data


def _read_u32(source, what: str, offset: int) -> int:
    return _U32.unpack(_read_exact(source, 4, what, offset))[0]


def read_idx_images(path) -> np.ndarray:
    """Parse an IDX image file into a (count, rows, cols) uint8 array."""
    with _open_maybe_gzip(path) as source:
        magic = _read_u32(source, "image magic", 0)
        if magic != IMAGES_MAGIC:
            raise FormatError(
                f"bad image magic 0x{magic:08x} at byte offset 0, expected 0x{IMAGES_MAGIC:08x}"
            )
        count = _read_u32(source, "image count", 4)
        rows = _read_u32(source, "row count", 8)
        cols = _read_u32(source, "column count", 12)
        if rows < 1 or cols < 1:
            raise FormatError(f"degenerate image dimensions {rows}x{cols}")
        payload = _read_exact(source, count * rows * cols, "image payload", 16)
        if source.read(1):
            raise FormatError("trailing bytes after image payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols).copy()


def read_idx_labels(path) -> np.ndarray:
    """Parse an IDX label file into a (count,) uint8 array."""
    with _open_maybe_gzip(path) as source:
        magic = _read_u32(source, "label magic", 0)
        if magic != LABELS_MAGIC:
            raise FormatError(
                f"bad label magic 0x{magic:08x} at byte offset 0, expected 0x{LABELS_MAGIC:08x}"
            )
        count = _read_u32(source, "label count", 4)
        payload = _read_exact(source, count, "label payload", 8)
        if source.read(1):
            raise FormatError("trailing bytes after label payload")
    return np.frombuffer(payload, dtype=np.uint8).copy()


def read_idx(images_path, labels_path) -> LabeledImages:
    """Read paired image/label IDX files; their counts must agree."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}"
        )
    return LabeledImages(raw=images, labels=labels)
