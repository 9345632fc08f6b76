"""Shared fixtures: synthetic digit corpora and IDX container writers.

The real handwritten-digit archives are not available in the test
environment, so the suite runs on a deterministic synthetic stand-in:
smoothed Gaussian random fields whose zero contours are turned into
curvy bright strokes on a dark background. The tuning (stroke width,
saturation threshold, background cut) matches the pixel statistics the
detector-chain tests care about — roughly 16% foreground, of which a
quarter is fully saturated white, the rest anti-aliased gray.
"""

import gzip
import struct

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from spadsim import LabeledImages, SpadConfig


def synthetic_digit_batch(count: int, seed: int) -> np.ndarray:
    """Deterministic batch of 28x28 uint8 digit-like images."""
    rng = np.random.default_rng(seed)
    field = gaussian_filter(rng.standard_normal((count, 28, 28)), sigma=(0, 3.0, 3.0))
    field /= field.std(axis=(1, 2), keepdims=True)
    strokes = np.exp(-((field / 0.2) ** 2))
    yy, xx = np.mgrid[0:28, 0:28]
    radius_sq = (yy - 13.5) ** 2 + (xx - 13.5) ** 2
    strokes *= np.exp(-np.maximum(radius_sq - 81.0, 0.0) / 40.0)
    strokes[strokes >= 0.7] = 1.0
    strokes[strokes < 0.08] = 0.0
    return np.rint(strokes * 255).astype(np.uint8)


def synthetic_corpus(count: int, seed: int) -> LabeledImages:
    rng = np.random.default_rng(seed + 1)
    labels = rng.integers(0, 10, size=count).astype(np.uint8)
    return LabeledImages(raw=synthetic_digit_batch(count, seed), labels=labels)


def write_idx_images(path, images: np.ndarray, compress: bool = False) -> None:
    """Write a (N, rows, cols) uint8 array in the classic IDX layout."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    blob = struct.pack(">IIII", 0x803, count, rows, cols) + images.tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as sink:
        sink.write(blob)


def write_idx_labels(path, labels: np.ndarray, compress: bool = False) -> None:
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    blob = struct.pack(">II", 0x801, labels.size) + labels.tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as sink:
        sink.write(blob)


@pytest.fixture(scope="session")
def default_config() -> SpadConfig:
    return SpadConfig()


@pytest.fixture(scope="session")
def tiny_corpus() -> LabeledImages:
    """Six images, enough for dataset round-trip tests."""
    return synthetic_corpus(6, seed=42)


@pytest.fixture()
def idx_pair(tmp_path, tiny_corpus):
    """The tiny corpus written out as an IDX images/labels file pair."""
    images_path = tmp_path / "images-idx3-ubyte"
    labels_path = tmp_path / "labels-idx1-ubyte"
    write_idx_images(images_path, tiny_corpus.raw)
    write_idx_labels(labels_path, tiny_corpus.labels)
    return images_path, labels_path
