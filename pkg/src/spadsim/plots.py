"""Figure rendering for count statistics, written to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .stats import CountHistogram


def save_histogram_figure(histogram: CountHistogram, path, annotate_peaks=()) -> None:
    """Render one count histogram with a log frequency axis."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(histogram.bins, histogram.frequencies, width=1.0, color="#3b6ea5", linewidth=0)
    ax.set_yscale("log")
    ax.set_xlabel("photon count per pixel")
    ax.set_ylabel("pixels")
    title = "photon count histogram"
    if histogram.lux_label:
        title += f" @ {histogram.lux_label}"
    ax.set_title(title)
    for peak in annotate_peaks:
        ax.axvline(peak, color="#c0392b", linestyle="--", linewidth=1.0)
        ax.annotate(
            f"{peak}", xy=(peak, 1.0), xycoords=("data", "axes fraction"),
            xytext=(2, -12), textcoords="offset points", color="#c0392b", fontsize=9,
        )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mean_counts_figure(millilux, means, path) -> None:
    """Render pooled mean photon count against illuminance on log-log axes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(millilux, means, marker="o", color="#3b6ea5")
    ax.set_xlabel("illuminance (mlux)")
    ax.set_ylabel("mean photon count per pixel")
    ax.set_title("mean photon count vs illuminance")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
