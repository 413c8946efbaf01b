"""Report rendering: metric/loss tables as CSV plus matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..imaging.types import Mask
from ..metrics import MetricReport
from .request import EditRequest, EditResult


def render_edit_report(req: EditRequest, result: EditResult, out_dir: str | Path) -> list[Path]:
    """Write metrics.csv, metrics.json, and a panel figure; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    metrics = result.metrics
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        if metrics is not None:
            writer.writerow(["psnr_nonhair", f"{metrics.psnr_nonhair:.6f}"])
            writer.writerow(["ssim_nonhair", f"{metrics.ssim_nonhair:.6f}"])
            if metrics.ids is not None:
                writer.writerow(["ids", f"{metrics.ids:.6f}"])
    written.append(csv_path)

    json_path = out / "metrics.json"
    json_path.write_text(
        json.dumps(
            {
                "metrics": metrics.as_dict() if metrics else None,
                "provenance": result.provenance,
            },
            indent=2,
        )
    )
    written.append(json_path)

    panels: list[tuple[str, np.ndarray]] = [("source", req.source.to_rgb().data)]
    if result.style_proxy is not None:
        panels.append(("style proxy", result.style_proxy.image.to_rgb().data))
    if result.color_proxy is not None:
        panels.append(("color proxy", result.color_proxy.image.to_rgb().data))
    panels.append(("output", result.output.to_rgb().data))
    panels.append(("agnostic mask", _mask_rgb(result.agnostic_mask)))
    panels.append(("color mask", _mask_rgb(result.color_mask)))

    fig, axes = plt.subplots(1, len(panels), figsize=(2.2 * len(panels), 2.6))
    for ax, (title, data) in zip(np.atleast_1d(axes), panels):
        ax.imshow(np.clip(data, 0, 1))
        ax.set_title(title, fontsize=8)
        ax.axis("off")
    fig.tight_layout()
    fig_path = out / "panel.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    written.append(fig_path)
    return written


def _mask_rgb(mask: Mask) -> np.ndarray:
    return np.repeat(mask.data.astype(np.float32)[:, :, None], 3, axis=2)


def render_loss_report(csv_path: str | Path, out_dir: str | Path) -> Path:
    """Plot every numeric column of a loss CSV against its first column."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(csv_path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    if rows.size == 0:
        raise ValueError(f"no rows in {csv_path}")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for col in range(1, rows.shape[1]):
        ax.plot(rows[:, 0], rows[:, col], label=header[col], linewidth=0.9)
    ax.set_xlabel(header[0])
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig_path = out / (Path(csv_path).stem + ".png")
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return fig_path


def render_eval_report(
    report: MetricReport, out_csv: str | Path, out_dir: str | Path | None = None
) -> list[Path]:
    """Append one CSV row; optionally render a bar figure of the scores."""
    out_csv = Path(out_csv)
    new_file = not out_csv.exists()
    with open(out_csv, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(["psnr_nonhair", "ssim_nonhair", "ids", "notes"])
        writer.writerow(
            [
                f"{report.psnr_nonhair:.6f}",
                f"{report.ssim_nonhair:.6f}",
                "" if report.ids is None else f"{report.ids:.6f}",
                ";".join(report.notes),
            ]
        )
    written = [out_csv]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        labels = ["psnr/50", "ssim", "ids"]
        values = [
            min(report.psnr_nonhair / 50.0, 1.0),
            report.ssim_nonhair,
            report.ids if report.ids is not None else 0.0,
        ]
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(labels, values, color="#4477aa")
        ax.set_ylim(0, 1.05)
        ax.set_title("edit metrics (normalized)", fontsize=9)
        fig.tight_layout()
        fig_path = out / "eval.png"
        fig.savefig(fig_path, dpi=110)
        plt.close(fig)
        written.append(fig_path)
    return written
