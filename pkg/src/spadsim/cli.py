"""Command-line pipeline driver.

Subcommands:

* ``generate``          simulate a labeled image set into TRSP files + manifests
* ``reconstruct``       turn raw manifests into normalized float rasters
* ``stats``             per-lux count histograms, summary table, and figures
* ``verify``            digest-check manifests against the files on disk
* ``export-reference``  median-normalized source images for baseline training

Exit codes: 0 success, 1 usage error, 2 data/configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .aer import load_stream
from .dataset import (
    DEFAULT_DATASET_NAME,
    LuxSchedule,
    default_lux_schedule,
    export_reference,
    format_mlux,
    generate_dataset,
    read_manifest,
    reconstruct_dataset,
    verify_manifest,
)
from .errors import ConfigurationError, DataError
from .idx import read_idx
from .radiometry import SpadConfig
from .reconstruct import Estimator
from .stats import bimodality_check, count_histogram, write_histogram

_CONFIG_FILE_KEYS = (
    "quantum_efficiency",
    "dead_time",
    "afterpulse_prob",
    "jitter_sigma",
    "dark_count_rate",
    "pixel_pitch",
    "fill_factor",
    "wavelength",
    "exposure",
)

DEFAULT_EXPOSURE = 1e-3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(parser):
    group = parser.add_argument_group("sensor parameters (override --config file)")
    group.add_argument("--config", type=Path, help="JSON file with sensor parameters")
    for key in _CONFIG_FILE_KEYS:
        group.add_argument(f"--{key.replace('_', '-')}", type=float, default=None)


def _build_config(args) -> tuple:
    """Resolve (SpadConfig, exposure) from defaults, config file, and flags."""
    values = {}
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{args.config}: not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{args.config}: config file must hold a JSON object")
        unknown = set(loaded) - set(_CONFIG_FILE_KEYS)
        if unknown:
            raise ConfigurationError(f"{args.config}: unknown config keys {sorted(unknown)}")
        for key, value in loaded.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigurationError(f"{args.config}: {key} must be a number, got {value!r}")
            values[key] = float(value)
    for key in _CONFIG_FILE_KEYS:
        override = getattr(args, key)
        if override is not None:
            values[key] = override
    exposure = values.pop("exposure", DEFAULT_EXPOSURE)
    return SpadConfig(**values), exposure


def _parse_number_list(text: str, kind=float):
    try:
        return [kind(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"could not parse list {text!r}") from None


def _progress_printer(quiet: bool, label: str):
    if quiet:
        return None
    state = {"last": -1}

    def update(done, total):
        step = max(1, total // 20)
        if done == total or done - state["last"] >= step:
            state["last"] = done
            print(f"\r{label}: {done}/{total}", end="" if done < total else "\n", file=sys.stderr)

    return update


def _cmd_generate(args) -> int:
    config, exposure = _build_config(args)
    schedule = LuxSchedule(tuple(_parse_number_list(args.lux))) if args.lux else default_lux_schedule()
    images = read_idx(args.images, args.labels)
    indices = _parse_number_list(args.indices, int) if args.indices else None
    manifests = generate_dataset(
        images, schedule, config, exposure, args.seed, args.out,
        split=args.split, dataset_name=args.dataset_name,
        indices=indices, limit=args.limit,
        progress=_progress_printer(args.quiet, f"simulating {args.split}"),
    )
    for path in manifests:
        print(path)
    return 0


def _cmd_reconstruct(args) -> int:
    estimators = (
        [Estimator.from_name(name) for name in ("counts", "pf", "ip")]
        if args.estimator == "all"
        else [Estimator.from_name(args.estimator)]
    )
    clip = None if args.no_clip else args.clip_multiple
    for estimator in estimators:
        manifests = reconstruct_dataset(
            args.manifest, estimator, args.out, clip_multiple=clip,
            progress=_progress_printer(args.quiet, f"reconstructing {estimator.value}"),
        )
        for path in manifests:
            print(path)
    return 0


def _cmd_stats(args) -> int:
    from .plots import save_histogram_figure, save_mean_counts_figure

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = {}
    for manifest_path in args.manifest:
        manifest_path = Path(manifest_path)
        manifest = read_manifest(manifest_path)
        if manifest["kind"] != "raw":
            raise ConfigurationError(f"{manifest_path}: stats needs raw manifests, got {manifest['kind']!r}")
        millilux = manifest.get("lux_mlux")
        groups.setdefault(millilux, []).append((manifest_path.parent, manifest))

    delimiter = args.delimiter
    summary_rows = []
    produced = []
    for millilux in sorted(groups):
        label = format_mlux(millilux)

        def _streams():
            for base, manifest in groups[millilux]:
                for sample in manifest["samples"]:
                    yield load_stream(base / sample["path"])

        histogram = count_histogram(_streams(), lux_label=label)
        report = bimodality_check(histogram, min_fraction=args.min_fraction)

        csv_path = out_dir / f"histogram_{label}.csv"
        with open(csv_path, "w", encoding="utf-8") as sink:
            write_histogram(histogram, sink, delimiter=delimiter)
        figure_path = out_dir / f"histogram_{label}.png"
        save_histogram_figure(histogram, figure_path, annotate_peaks=report.peaks)
        produced.extend([csv_path, figure_path])

        events = int(np.dot(histogram.bins, histogram.frequencies))
        summary_rows.append((
            millilux, len(groups[millilux]), histogram.total_pixels, events,
            histogram.first_moment, report.modal_bin,
            report.primary_peak if report.primary_peak is not None else "",
            "|".join(str(p) for p in report.secondary_peaks),
        ))

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", encoding="utf-8") as sink:
        header = ("lux_mlux", "manifests", "pixels", "events", "mean_count",
                  "modal_bin", "primary_peak", "secondary_peaks")
        sink.write(delimiter.join(header) + "\n")
        for row in summary_rows:
            sink.write(delimiter.join(str(v) for v in row) + "\n")
    produced.append(summary_path)

    if len(summary_rows) > 1:
        means_path = out_dir / "mean_counts.png"
        save_mean_counts_figure(
            [row[0] for row in summary_rows], [row[4] for row in summary_rows], means_path
        )
        produced.append(means_path)

    for path in produced:
        print(path)
    return 0


def _cmd_verify(args) -> int:
    failed = False
    for manifest_path in args.manifests:
        problems = verify_manifest(manifest_path)
        if problems:
            failed = True
            print(f"{manifest_path}: {len(problems)} problem(s)")
            for problem in problems:
                print(f"  {problem}")
        else:
            print(f"{manifest_path}: ok")
    return 2 if failed else 0


def _cmd_export_reference(args) -> int:
    splits = {"train": read_idx(args.train_images, args.train_labels)}
    if args.test_images or args.test_labels:
        if not (args.test_images and args.test_labels):
            raise ConfigurationError("--test-images and --test-labels must be given together")
        splits["test"] = read_idx(args.test_images, args.test_labels)
    if args.limit is not None:
        splits = {name: images.subset(range(min(args.limit, images.count)))
                  for name, images in splits.items()}
    clip = None if args.no_clip else args.clip_multiple
    for path in export_reference(splits, args.out, clip_multiple=clip):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spadsim", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="simulate an image set into TRSP files")
    generate.add_argument("--images", type=Path, required=True, help="IDX image file (optionally .gz)")
    generate.add_argument("--labels", type=Path, required=True, help="IDX label file (optionally .gz)")
    generate.add_argument("--out", type=Path, required=True, help="dataset output root")
    generate.add_argument("--split", default="train", help="split name recorded in layout and manifests")
    generate.add_argument("--seed", type=int, required=True, help="master seed (unsigned 64-bit)")
    generate.add_argument("--lux", help="comma-separated millilux levels (default: full schedule)")
    generate.add_argument("--limit", type=int, help="only the first N images")
    generate.add_argument("--indices", help="comma-separated source indices to simulate")
    generate.add_argument("--dataset-name", default=DEFAULT_DATASET_NAME)
    generate.add_argument("--quiet", action="store_true")
    _add_config_flags(generate)
    generate.set_defaults(handler=_cmd_generate)

    reconstruct = sub.add_parser("reconstruct", help="estimate flux images from raw manifests")
    reconstruct.add_argument("--manifest", action="append", required=True, type=Path,
                             help="raw manifest path (repeatable; give train and test of one lux)")
    reconstruct.add_argument("--estimator", default="all",
                             choices=["counts", "pf", "ip", "all"])
    reconstruct.add_argument("--out", type=Path, required=True, help="reconstruction output root")
    reconstruct.add_argument("--clip-multiple", type=float, default=3.0,
                             help="clip normalized values at this multiple of the median")
    reconstruct.add_argument("--no-clip", action="store_true", help="normalize without clipping")
    reconstruct.add_argument("--quiet", action="store_true")
    reconstruct.set_defaults(handler=_cmd_reconstruct)

    stats = sub.add_parser("stats", help="histograms, summary table, and figures per lux")
    stats.add_argument("--manifest", action="append", required=True, type=Path,
                       help="raw manifest path (repeatable)")
    stats.add_argument("--out", type=Path, required=True, help="report output directory")
    stats.add_argument("--delimiter", default=",")
    stats.add_argument("--min-fraction", type=float, default=2e-4,
                       help="noise floor for peak detection, as a fraction of pooled pixels")
    stats.set_defaults(handler=_cmd_stats)

    verify = sub.add_parser("verify", help="check manifest digests against files")
    verify.add_argument("manifests", nargs="+", type=Path)
    verify.set_defaults(handler=_cmd_verify)

    reference = sub.add_parser("export-reference", help="median-normalized source images")
    reference.add_argument("--train-images", type=Path, required=True)
    reference.add_argument("--train-labels", type=Path, required=True)
    reference.add_argument("--test-images", type=Path)
    reference.add_argument("--test-labels", type=Path)
    reference.add_argument("--out", type=Path, required=True)
    reference.add_argument("--limit", type=int, help="only the first N images per split")
    reference.add_argument("--clip-multiple", type=float, default=3.0)
    reference.add_argument("--no-clip", action="store_true")
    reference.set_defaults(handler=_cmd_export_reference)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (DataError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
