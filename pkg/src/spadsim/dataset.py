"""End-to-end dataset pipeline: simulate, reconstruct, verify.

Builds event-stream datasets from a labeled image set across a schedule of
illuminance levels, writes one TRSP file per (image, lux) pair, and records
everything in per-(split, lux) JSON manifests carrying content digests and
the full configuration, so that a dataset directory is verifiable and
regenerable from its manifests alone.

Layout under the output root::

    <root>/<split>/<lux label>/<index>.trsp
    <root>/<split>/<lux label>/manifest.json

Reconstruction mirrors that layout under the chosen estimator name and
writes 32-bit float rasters (``.npy``) plus 8-bit previews (``.png``).
Sample paths inside a manifest are relative to the manifest's directory.

Every image draws its random streams from a key derived from
(split, lux label, source index), so changing the subset, reordering work,
or generating splits in isolation never changes any sample's content for a
fixed master seed.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .aer import config_from_snapshot, config_snapshot, load_stream, write_stream
from .errors import ConfigurationError, FormatError
from .idx import LabeledImages
from .pixel import simulate_array
from .radiometry import SceneConfig, SpadConfig, expected_flux
from .reconstruct import (
    Estimator,
    Normalization,
    apply_normalization,
    fit_normalization,
    preview_u8,
    reconstruct_image,
)
from .rng import RngSeedPolicy

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"

KIND_RAW = "raw"
KIND_REC = "rec"
KIND_REFERENCE = "reference"

DEFAULT_DATASET_NAME = "tr-mnist"


@dataclass(frozen=True)
class LuxSchedule:
    """Reference illuminance levels in millilux, strictly increasing."""

    millilux: tuple

    def __post_init__(self):
        # Integral levels canonicalize to int so manifests serialize the
        # same whether a level arrived as 5, 5.0, or parsed text.
        levels = tuple(
            int(v) if float(v).is_integer() else float(v) for v in self.millilux
        )
        if not levels:
            raise ConfigurationError("lux schedule must not be empty")
        if any(v <= 0 for v in levels):
            raise ConfigurationError(f"lux levels must be positive, got {levels}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError(f"lux levels must be strictly increasing, got {levels}")
        object.__setattr__(self, "millilux", levels)

    def __iter__(self):
        return iter(self.millilux)

    def __len__(self):
        return len(self.millilux)


def default_lux_schedule() -> LuxSchedule:
    """The standard ten-level schedule: 5 mlux doubling up to 2560 mlux."""
    return LuxSchedule((5, 10, 20, 40, 80, 160, 320, 640, 1280, 2560))


def format_mlux(millilux: float) -> str:
    """Directory label for a lux level, e.g. 5 -> ``5mlux``, 2.5 -> ``2.5mlux``."""
    return f"{millilux:g}mlux"


def derive_image_key(split: str, lux_label: str, index: int) -> int:
    """64-bit stream key for one sample, decoupled from generation order."""
    digest = hashlib.blake2b(f"{split}/{lux_label}/{index}".encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_json_atomic(obj: dict, path: Path) -> None:
    """Write JSON with stable formatting via a temp file and atomic replace."""
    path = Path(path)
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def read_manifest(path) -> dict:
    """Load and structurally validate a manifest file."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(manifest, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    version = manifest.get("format_version")
    if version != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {version!r}")
    for key in ("dataset", "kind", "split", "samples"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest missing key {key!r}")
    if not isinstance(manifest["samples"], list):
        raise FormatError(f"{path}: manifest samples must be a list")
    for position, sample in enumerate(manifest["samples"]):
        if not isinstance(sample, dict):
            raise FormatError(f"{path}: sample {position} is not an object")
        for key in ("index", "label", "path", "sha256"):
            if key not in sample:
                raise FormatError(f"{path}: sample {position} missing key {key!r}")
    return manifest


def _resolve_indices(images: LabeledImages, indices: Optional[Sequence[int]], limit: Optional[int]):
    if indices is not None:
        chosen = [int(i) for i in indices]
        for i in chosen:
            if not 0 <= i < images.count:
                raise ConfigurationError(f"sample index {i} outside [0, {images.count})")
        if len(set(chosen)) != len(chosen):
            raise ConfigurationError("sample indices must be unique")
        return sorted(chosen)
    if limit is not None:
        if limit < 1:
            raise ConfigurationError(f"limit must be >= 1, got {limit}")
        return list(range(min(limit, images.count)))
    return list(range(images.count))


def generate_dataset(
    images: LabeledImages,
    schedule: LuxSchedule,
    config: SpadConfig,
    exposure: float,
    master_seed: int,
    output_root,
    split: str = "train",
    dataset_name: str = DEFAULT_DATASET_NAME,
    indices: Optional[Sequence[int]] = None,
    limit: Optional[int] = None,
    progress=None,
) -> list:
    """Simulate every selected image at every lux level; one manifest per level.

    Returns the list of manifest paths, one per (split, lux) pair, in
    schedule order. Files are regenerated byte-identically for identical
    (master_seed, config, schedule, split) regardless of subset or order,
    because every sample owns an independent stream key.
    """
    if not 0 <= master_seed < 2 ** 64:
        raise ConfigurationError(f"master_seed must be an unsigned 64-bit integer, got {master_seed}")
    root = Path(output_root)
    chosen = _resolve_indices(images, indices, limit)
    total = len(chosen) * len(schedule)
    done = 0
    manifest_paths = []
    for millilux in schedule:
        lux_label = format_mlux(millilux)
        scene = SceneConfig(reference_lux=millilux / 1000.0, exposure=exposure)
        out_dir = root / split / lux_label
        out_dir.mkdir(parents=True, exist_ok=True)
        samples = []
        for index in chosen:
            flux = expected_flux(images.image(index), scene, config)
            policy = RngSeedPolicy(master_seed, derive_image_key(split, lux_label, index))
            stream = simulate_array(flux, config, scene, policy)
            buffer = io.BytesIO()
            write_stream(stream, buffer)
            payload = buffer.getvalue()
            name = f"{index:05d}.trsp"
            (out_dir / name).write_bytes(payload)
            samples.append({
                "index": index,
                "label": int(images.labels[index]),
                "path": name,
                "sha256": _sha256(payload),
            })
            done += 1
            if progress is not None:
                progress(done, total)
        manifest = {
            "format_version": MANIFEST_VERSION,
            "dataset": dataset_name,
            "kind": KIND_RAW,
            "split": split,
            "lux_mlux": millilux,
            "master_seed": master_seed,
            "config": config_snapshot(config, scene),
            "samples": samples,
        }
        manifest_path = out_dir / MANIFEST_NAME
        write_json_atomic(manifest, manifest_path)
        manifest_paths.append(manifest_path)
    return manifest_paths


def verify_manifest(manifest_path) -> list:
    """Digest-check every sample file of a manifest; returns found problems."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    problems = []
    for sample in manifest["samples"]:
        target = base / sample["path"]
        try:
            payload = target.read_bytes()
        except OSError as exc:
            problems.append(f"{target}: unreadable ({exc})")
            continue
        digest = _sha256(payload)
        if digest != sample["sha256"]:
            problems.append(
                f"{target}: digest mismatch (manifest {sample['sha256'][:12]}…, file {digest[:12]}…)"
            )
    return problems


def _npy_bytes(values: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    np.save(buffer, values.astype(np.float32))
    return buffer.getvalue()


def _png_bytes(preview: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(preview, mode="L").save(buffer, format="PNG")
    return buffer.getvalue()


def _load_group_configs(manifests: list) -> tuple:
    """Validate that grouped manifests share a config; returns (SpadConfig, SceneConfig)."""
    snapshots = [m["config"] for _, m in manifests]
    first = snapshots[0]
    for snapshot in snapshots[1:]:
        if snapshot != first:
            raise ConfigurationError(
                "manifests in one lux group carry different configurations; "
                "normalization cannot transfer between them"
            )
    return config_from_snapshot(first)


def reconstruct_dataset(
    manifest_paths: Sequence,
    estimator: Estimator,
    output_root,
    clip_multiple: Optional[float] = 3.0,
    dataset_name: Optional[str] = None,
    progress=None,
) -> list:
    """Reconstruct raw manifests into normalized float rasters plus previews.

    Manifests are grouped by lux level; each group must contain a train
    split, whose pooled reconstruction median fits the normalization that
    is then applied to every split of the group. Emits a manifest per
    (estimator, split, lux) and returns their paths.
    """
    root = Path(output_root)
    loaded = []
    for path in manifest_paths:
        path = Path(path)
        manifest = read_manifest(path)
        if manifest["kind"] != KIND_RAW:
            raise ConfigurationError(f"{path}: reconstruction needs raw manifests, got kind {manifest['kind']!r}")
        loaded.append((path, manifest))

    groups = {}
    for path, manifest in loaded:
        groups.setdefault(manifest.get("lux_mlux"), []).append((path, manifest))

    out_paths = []
    total = sum(len(m["samples"]) for _, m in loaded) + sum(
        len(m["samples"]) for _, m in loaded if m["split"] == "train"
    )
    done = 0
    for millilux in sorted(groups):
        group = groups[millilux]
        config, _scene = _load_group_configs(group)
        train = [(p, m) for p, m in group if m["split"] == "train"]
        if len(train) != 1:
            raise ConfigurationError(
                f"lux group {format_mlux(millilux)} needs exactly one train manifest to fit "
                f"normalization, found {len(train)}"
            )
        train_path, train_manifest = train[0]

        def _estimates(path, manifest):
            base = path.parent
            for sample in manifest["samples"]:
                stream = load_stream(base / sample["path"])
                yield sample, reconstruct_image(stream, estimator, config)

        def _fit_iter():
            nonlocal done
            for _sample, estimate in _estimates(train_path, train_manifest):
                done += 1
                if progress is not None:
                    progress(done, total)
                yield estimate

        state = fit_normalization(_fit_iter())

        for path, manifest in group:
            out_dir = root / estimator.value / manifest["split"] / format_mlux(millilux)
            out_dir.mkdir(parents=True, exist_ok=True)
            samples = []
            for sample, estimate in _estimates(path, manifest):
                normalized = apply_normalization(estimate, state, clip_multiple)
                npy_payload = _npy_bytes(normalized.flux)
                png_payload = _png_bytes(preview_u8(normalized))
                stem = f"{sample['index']:05d}"
                (out_dir / f"{stem}.npy").write_bytes(npy_payload)
                (out_dir / f"{stem}.png").write_bytes(png_payload)
                samples.append({
                    "index": sample["index"],
                    "label": sample["label"],
                    "path": f"{stem}.npy",
                    "sha256": _sha256(npy_payload),
                    "preview": f"{stem}.png",
                    "preview_sha256": _sha256(png_payload),
                })
                done += 1
                if progress is not None:
                    progress(done, total)
            out_manifest = {
                "format_version": MANIFEST_VERSION,
                "dataset": dataset_name or manifest["dataset"],
                "kind": KIND_REC,
                "split": manifest["split"],
                "lux_mlux": millilux,
                "estimator": estimator.value,
                "master_seed": manifest["master_seed"],
                "config": manifest["config"],
                "normalization": {
                    "median_nonzero": state.median_nonzero,
                    "clip_multiple": clip_multiple,
                },
                "samples": samples,
            }
            manifest_path = out_dir / MANIFEST_NAME
            write_json_atomic(out_manifest, manifest_path)
            out_paths.append(manifest_path)
    return out_paths


def _byte_median(counts: np.ndarray) -> float:
    """Median of a population of byte values given per-value counts (even-count
    populations average the two middle values)."""
    total = int(counts.sum())
    if total == 0:
        raise ConfigurationError("cannot take the median of an empty population")
    cumulative = np.cumsum(counts)
    lower_rank = (total - 1) // 2
    upper_rank = total // 2
    lower = int(np.searchsorted(cumulative, lower_rank + 1))
    upper = int(np.searchsorted(cumulative, upper_rank + 1))
    return (lower + upper) / 2.0


def export_reference(
    splits: dict,
    output_root,
    clip_multiple: Optional[float] = 3.0,
    dataset_name: str = DEFAULT_DATASET_NAME,
) -> list:
    """Export the source images median-normalized, mirroring reconstruction output.

    ``splits`` maps split names to LabeledImages; the normalization median
    is fitted on the strictly positive pixel values of the train split and
    applied to every split, so the reference dataset goes through the same
    normalization scheme as the reconstructed ones.
    """
    if "train" not in splits:
        raise ConfigurationError("reference export needs a train split to fit normalization")
    root = Path(output_root)

    train_raw = splits["train"].raw
    byte_counts = np.bincount(train_raw.ravel(), minlength=256).astype(np.int64)
    byte_counts[0] = 0
    if byte_counts.sum() == 0:
        raise ConfigurationError("train split is all zeros; normalization median is undefined")
    median = _byte_median(byte_counts) / 255.0
    state = Normalization(median_nonzero=median)

    out_paths = []
    for split, images in splits.items():
        out_dir = root / KIND_REFERENCE / split
        out_dir.mkdir(parents=True, exist_ok=True)
        samples = []
        for index in range(images.count):
            values = images.raw[index].astype(np.float64) / 255.0
            values /= state.median_nonzero
            if clip_multiple is not None:
                np.clip(values, 0.0, clip_multiple, out=values)
            npy_payload = _npy_bytes(values)
            stem = f"{index:05d}"
            (out_dir / f"{stem}.npy").write_bytes(npy_payload)
            samples.append({
                "index": index,
                "label": int(images.labels[index]),
                "path": f"{stem}.npy",
                "sha256": _sha256(npy_payload),
            })
        manifest = {
            "format_version": MANIFEST_VERSION,
            "dataset": dataset_name,
            "kind": KIND_REFERENCE,
            "split": split,
            "normalization": {
                "median_nonzero": state.median_nonzero,
                "clip_multiple": clip_multiple,
            },
            "samples": samples,
        }
        manifest_path = out_dir / MANIFEST_NAME
        write_json_atomic(manifest, manifest_path)
        out_paths.append(manifest_path)
    return out_paths
