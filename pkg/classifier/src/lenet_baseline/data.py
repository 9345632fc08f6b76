"""Loading of reconstructed and reference digit datasets.

A dataset split is a directory holding ``manifest.json`` plus one
``.npy`` float raster per sample. The manifest is a JSON object with at
least::

    {
      "format_version": 1,
      "kind": "rec" | "reference",
      "split": "train" | "test",
      "samples": [{"index": 0, "label": 7, "path": "00000.npy", ...}, ...]
    }

Reconstructed manifests additionally carry ``"estimator"`` and
``"lux_mlux"``, which the sweep uses to place the split on its grid.
Rasters are (28, 28) float arrays, median-normalized by the producer;
they are consumed as-is, without further scaling.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError

LOADABLE_KINDS = ("rec", "reference")


@dataclass(frozen=True)
class SplitData:
    """One split as arrays ready for training: images (N, 1, 28, 28)
    float32, labels (N,) int64."""

    images: np.ndarray
    labels: np.ndarray
    kind: str
    split: str
    estimator: Optional[str] = None
    lux_mlux: Optional[float] = None

    @property
    def count(self) -> int:
        return int(self.labels.size)


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc})") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("samples"), list):
        raise DataError(f"{path}: manifest must be an object with a samples list")
    for key in ("kind", "split"):
        if key not in manifest:
            raise DataError(f"{path}: manifest missing key {key!r}")
    return manifest


def load_split(manifest_path, limit: Optional[int] = None) -> SplitData:
    """Load every sample of a manifest (or the first ``limit``) into memory.

    Raises DataError for manifests of the wrong kind, unreadable rasters,
    or rasters that are not (28, 28).
    """
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    if manifest["kind"] not in LOADABLE_KINDS:
        raise DataError(
            f"{manifest_path}: expected a reconstructed or reference manifest, "
            f"got kind {manifest['kind']!r}"
        )
    samples = manifest["samples"]
    if limit is not None:
        samples = samples[:limit]

    images = np.empty((len(samples), 1, 28, 28), dtype=np.float32)
    labels = np.empty(len(samples), dtype=np.int64)
    base = manifest_path.parent
    for position, sample in enumerate(samples):
        try:
            raster = np.load(base / sample["path"])
        except (OSError, ValueError) as exc:
            raise DataError(f"{base / sample['path']}: cannot load raster ({exc})") from None
        if raster.shape != (28, 28):
            raise DataError(
                f"{base / sample['path']}: raster shape {raster.shape}, expected (28, 28)"
            )
        images[position, 0] = raster
        labels[position] = sample["label"]

    return SplitData(
        images=images,
        labels=labels,
        kind=manifest["kind"],
        split=manifest["split"],
        estimator=manifest.get("estimator"),
        lux_mlux=manifest.get("lux_mlux"),
    )
