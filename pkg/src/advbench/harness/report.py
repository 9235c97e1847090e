"""Human-readable report: text tables, CSV mirrors, and matplotlib figures.

Missing artifacts mark their sections absent instead of failing, so a
clean-only run simply reports clean metrics with no attack columns.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def rescale_for_display(delta: np.ndarray) -> np.ndarray:
    """Map a perturbation's min/max to exactly 0/255 for visualization."""
    delta = np.asarray(delta, dtype=np.float64)
    lo, hi = float(delta.min()), float(delta.max())
    if hi <= lo:
        return np.zeros_like(delta, dtype=np.uint8)
    scaled = (delta - lo) / (hi - lo) * 255.0
    return np.rint(scaled).astype(np.uint8)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _table(headers, rows) -> str:
    widths = [max(len(str(h)), *(len(_fmt(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths))
    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line([_fmt(c) for c in row]) for row in rows)
    return "\n".join(out)


def _write_csv(path, headers, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)
    return path


def _triptych_figure(originals, deltas, adversarials, path, n: int = 4):
    """Rows of (original | rescaled perturbation | adversarial) panels."""
    n = min(n, originals.shape[0])
    fig, axes = plt.subplots(n, 3, figsize=(6.4, 2.2 * n), squeeze=False)
    for i in range(n):
        views = (
            (originals[i], "original", None),
            (rescale_for_display(deltas[i]), "perturbation (0-255 rescale)", (0, 255)),
            (adversarials[i], "adversarial", None),
        )
        for j, (img, title, clim) in enumerate(views):
            arr = np.asarray(img)
            arr = arr[0] if arr.ndim == 3 and arr.shape[0] == 1 else arr.squeeze()
            ax = axes[i][j]
            im = ax.imshow(arr, cmap="gray",
                           vmin=None if clim is None else clim[0],
                           vmax=None if clim is None else clim[1])
            if i == 0:
                ax.set_title(title, fontsize=9)
            ax.set_xticks([])
            ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _curves_figure(log_path: Path, out_path: Path):
    epochs, clean, robust = [], [], []
    with open(log_path) as fh:
        for line in fh:
            rec = json.loads(line)
            epochs.append(rec["epoch"])
            clean.append(rec["clean_accuracy"])
            robust.append(rec["robust_accuracy"])
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(epochs, clean, marker="o", label="clean accuracy")
    ax.plot(epochs, robust, marker="s", label="robust accuracy")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def _bars_figure(names, values, ylabel, out_path, ylim=None):
    fig, ax = plt.subplots(figsize=(max(4.5, 0.9 * len(names)), 3.4))
    ax.bar(range(len(names)), values, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    if ylim:
        ax.set_ylim(*ylim)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def emit_report(state, record) -> list:
    """Render tables, CSVs, and figures for whatever artifacts exist."""
    out = state.out / "report"
    figures = out / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    paths = []
    summary_path = state.out / "eval" / "summary.json"
    summary = {}
    if summary_path.exists():
        with open(summary_path) as fh:
            summary = json.load(fh)

    lines = [f"advbench report (config {record.config_hash[:12]})", ""]

    clean = summary.get("clean")
    if clean:
        rows = [["clean", clean["accuracy"], clean["auc"], None]]
        attack = summary.get("attack")
        headers = ["inputs", "ACC", "AUC", "FR"]
        if attack:
            rows.append(["adversarial", attack["accuracy"], attack["auc"],
                         attack["fooling_ratio"]])
        else:
            headers = ["inputs", "ACC", "AUC"]
            rows = [row[:3] for row in rows]
        lines += ["== classification ==", _table(headers, rows), ""]
        paths.append(_write_csv(out / "classification.csv", headers, rows))
        if attack:
            lines += [f"attack budget: {attack['budget']}", ""]
    else:
        lines += ["== classification: absent (no eval artifacts) ==", ""]

    defense = summary.get("defense")
    if defense:
        headers = ["model", "clean ACC", "robust ACC"]
        rows = [[name, vals["clean_accuracy"], vals["robust_accuracy"]]
                for name, vals in defense["models"].items()]
        lines += [f"== defenses (evaluation budget {defense['budget']}) ==",
                  _table(headers, rows), ""]
        paths.append(_write_csv(out / "defense.csv", headers, rows))
        paths.append(_bars_figure(
            [r[0] for r in rows], [r[2] for r in rows], "robust accuracy",
            figures / "robust_accuracy.png", ylim=(0, 1)))

    bench = summary.get("benchmark")
    if bench:
        headers = ["model", "FP", "RFP"]
        rows = [[name, vals["fp"], vals["rfp"]]
                for name, vals in bench["models"].items()]
        lines += [f"== common-perturbation benchmark (modes {bench['modes']}) ==",
                  _table(headers, rows), ""]
        paths.append(_write_csv(out / "benchmark.csv", headers, rows))
        per_type = bench["models"]["natural"]["per_type"]
        names = sorted(per_type)
        paths.append(_bars_figure(
            names, [per_type[n] for n in names], "flip probability",
            figures / "fp_by_type.png"))

    conventions = (clean or {}).get("conventions") or {
        "argmax_ties": "lowest class index",
        "multilabel_accuracy": "mean per-entry binary accuracy at threshold 0.5",
        "auc_ties": "0.5 per tied positive-negative pair",
    }
    lines += ["== conventions =="]
    lines += [f"- {key}: {value}" for key, value in sorted(conventions.items())]
    lines.append("")

    adv_dir = state.out / "attack"
    if (adv_dir / "manifest.jsonl").exists():
        from ..attacks import load_adversarial_images

        adv_images, _ = load_adversarial_images(adv_dir)
        test = state.dataset.split("test")
        id_to_index = {img_id: i for i, img_id in enumerate(test.images.ids)}
        idx = [id_to_index[i] for i in adv_images.ids]
        originals = test.images.data[idx].numpy()
        adversarials = adv_images.data.numpy()
        deltas = adversarials - originals
        paths.append(_triptych_figure(
            originals, deltas, adversarials, figures / "adversarial_examples.png"))

    train_log = state.out / "train" / "trainlog.jsonl"
    if train_log.exists():
        paths.append(_curves_figure(train_log, figures / "training_curves.png"))

    report_txt = out / "report.txt"
    with open(report_txt, "w") as fh:
        fh.write("\n".join(lines))
    paths.append(report_txt)
    return paths
