"""Run-report aggregation: per-scene means over rotation variants, per-approach
sums, and bar-chart figures rendered next to the CSV output."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
from dataclasses import dataclass

from .errors import SceneParseError

REPORT_COLUMNS = ["scene", "approach", "final_error", "seed", "config_digest"]
_ROT_SUFFIX = re.compile(r"_rot\d{3}$")


@dataclass
class RunReport:
    scene: str
    approach: str
    final_error: float
    seed: int
    config_digest: str


def config_digest(config: dict) -> str:
    """Short digest of a config dict, stable under key reordering."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def write_run_report(path: str, report: RunReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        w.writerow([report.scene, report.approach, f"{report.final_error:.6f}",
                    report.seed, report.config_digest])


def read_run_reports(run_dirs: list[str]) -> list[RunReport]:
    reports = []
    for d in run_dirs:
        path = os.path.join(d, "report.csv") if os.path.isdir(d) else d
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                missing = [c for c in REPORT_COLUMNS if c not in row or row[c] is None]
                if missing:
                    raise SceneParseError(f"{path}: missing columns {missing}")
                reports.append(RunReport(
                    row["scene"], row["approach"], float(row["final_error"]),
                    int(row["seed"]), row["config_digest"],
                ))
    return reports


def base_scene(scene_id: str) -> str:
    """Strip a rotation-variant suffix like `_rot060` from a scene id."""
    return _ROT_SUFFIX.sub("", scene_id)


def aggregate(reports: list[RunReport]) -> tuple[dict, dict]:
    """(per (approach, base scene) mean error, per approach sum of means)."""
    groups: dict[tuple[str, str], list[float]] = {}
    for r in reports:
        groups.setdefault((r.approach, base_scene(r.scene)), []).append(r.final_error)
    scene_means = {key: sum(v) / len(v) for key, v in groups.items()}
    sums: dict[str, float] = {}
    for (approach, _), mean in scene_means.items():
        sums[approach] = sums.get(approach, 0.0) + mean
    return scene_means, sums


def write_aggregates(out_dir: str, scene_means: dict, sums: dict) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    scenes_path = os.path.join(out_dir, "report_scenes.csv")
    with open(scenes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["approach", "scene", "mean_error"])
        for (approach, scene), mean in sorted(scene_means.items()):
            w.writerow([approach, scene, f"{mean:.6f}"])
    sums_path = os.path.join(out_dir, "report_sums.csv")
    with open(sums_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["approach", "error_sum"])
        for approach, total in sorted(sums.items()):
            w.writerow([approach, f"{total:.6f}"])
    return [scenes_path, sums_path]


def render_figures(out_dir: str, scene_means: dict, sums: dict) -> list[str]:
    """Grouped per-scene error bars and per-approach totals, as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    approaches = sorted({a for a, _ in scene_means})
    scenes = sorted({s for _, s in scene_means})
    paths = []

    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(scenes)), 4))
    width = 0.8 / max(1, len(approaches))
    for i, approach in enumerate(approaches):
        xs = [j + i * width for j in range(len(scenes))]
        ys = [scene_means.get((approach, s), 0.0) for s in scenes]
        ax.bar(xs, ys, width=width, label=approach)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(scenes))])
    ax.set_xticklabels(scenes, rotation=30, ha="right")
    ax.set_ylabel("depth error (m)")
    ax.set_title("Mean depth error per scene (rotation variants averaged)")
    ax.legend()
    fig.tight_layout()
    p = os.path.join(out_dir, "report_scenes.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(5, 4))
    names = sorted(sums)
    ax.bar(names, [sums[n] for n in names], color="tab:blue")
    ax.set_ylabel("depth error sum (m)")
    ax.set_title("Depth error summed over scenes")
    fig.tight_layout()
    p = os.path.join(out_dir, "report_sums.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths
