"""Render a simulation report to delimited files and figures.

The simulate command drops everything a run produced into one directory:
``report.json`` (the full report), ``summary.csv`` and ``tv_series.csv``
(delimited), and PNG figures for the stationarity series, the per-bucket
source skew, and batch sizes per modality. Rendering is deterministic, so
artifact hashes are stable across reruns.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import SimulationReport


def write_report_json(report: SimulationReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_summary_csv(report: SimulationReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["steps_simulated", report.steps_simulated])
        for modality in sorted(report.mean_batch_size_per_modality):
            writer.writerow(
                [
                    f"mean_batch_size[{modality}]",
                    f"{report.mean_batch_size_per_modality[modality]:.6f}",
                ]
            )
            writer.writerow([f"batches[{modality}]", report.batches_per_modality[modality]])
        writer.writerow(["mean_input_padding", f"{report.mean_input_padding:.6f}"])
        writer.writerow(["mean_output_padding", f"{report.mean_output_padding:.6f}"])
        writer.writerow(["examples_consumed", report.examples_consumed])
        if report.max_window_tv is not None:
            writer.writerow(["max_window_tv", f"{report.max_window_tv:.6f}"])


def write_tv_series_csv(report: SimulationReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_start_step", "tv_distance"])
        for start, tv in report.mixture_tv_distance_series:
            writer.writerow([start, f"{tv:.6f}"])


def render_figures(report: SimulationReport, out_dir: str | Path) -> list[Path]:
    """Write the report's figures into ``out_dir``; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if report.mixture_tv_distance_series:
        starts = [start for start, _ in report.mixture_tv_distance_series]
        values = [tv for _, tv in report.mixture_tv_distance_series]
        fig, ax = plt.subplots(figsize=(7, 4), dpi=120)
        ax.plot(starts, values, marker="o", markersize=3, linewidth=1.2)
        ax.set_xlabel("window start step")
        ax.set_ylabel("TV distance to configured mixture")
        ax.set_title("Source-mixture stationarity per window")
        ax.set_ylim(bottom=0)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / "tv_series.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    if report.per_bucket_source_skew:
        matrix = np.array(
            [
                [np.nan if tv is None else tv for tv in row]
                for row in report.per_bucket_source_skew
            ],
            dtype=float,
        )
        fig, ax = plt.subplots(figsize=(6, 5), dpi=120)
        image = ax.imshow(
            matrix, origin="lower", aspect="auto", vmin=0.0, cmap="viridis"
        )
        ax.set_xlabel("output sub-bucket")
        ax.set_ylabel("input bucket")
        ax.set_title("Per-bucket source skew (TV to configured mixture)")
        fig.colorbar(image, ax=ax, label="TV distance")
        fig.tight_layout()
        path = out_dir / "bucket_source_skew.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    if report.mean_batch_size_per_modality:
        modalities = sorted(report.mean_batch_size_per_modality)
        sizes = [report.mean_batch_size_per_modality[m] for m in modalities]
        fig, ax = plt.subplots(figsize=(5, 4), dpi=120)
        ax.bar(modalities, sizes, color="tab:blue", width=0.5)
        ax.set_ylabel("mean batch size")
        ax.set_title("Mean batch size per modality")
        for x, size in enumerate(sizes):
            ax.text(x, size, f"{size:.1f}", ha="center", va="bottom")
        fig.tight_layout()
        path = out_dir / "mean_batch_size.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    return written


def write_all(report: SimulationReport, out_dir: str | Path) -> list[Path]:
    """Write report.json, the CSVs, and the figures; returns all paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "report.json", out_dir / "summary.csv", out_dir / "tv_series.csv"]
    write_report_json(report, paths[0])
    write_summary_csv(report, paths[1])
    write_tv_series_csv(report, paths[2])
    paths.extend(render_figures(report, out_dir))
    return paths
