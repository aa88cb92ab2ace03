"""Report generation: per-object results tables (text + CSV) mirroring the
grasping-success-out-of-N layout, plus training-curve figures.

Tables are built from deterministic formatting only, so reruns of the same
experiment produce byte-identical files.
"""
from __future__ import annotations

import json
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .trainer import _read_json, _write_json


def _arm_seed_dirs(out_dir: str, arm: str) -> list:
    base = os.path.join(out_dir, arm)
    if not os.path.isdir(base):
        return []
    return sorted(
        (os.path.join(base, d) for d in os.listdir(base) if d.startswith("seed-")),
        key=lambda p: int(p.rsplit("-", 1)[1]))


def _load_evals(out_dir: str) -> dict:
    evals = {}
    for arm in ("baseline", "shake", "shake_snatch"):
        for d in _arm_seed_dirs(out_dir, arm):
            seed = int(d.rsplit("-", 1)[1])
            path = os.path.join(d, "evals.json")
            if os.path.exists(path):
                evals.setdefault(arm, {})[seed] = _read_json(path)
    return evals


def _low_columns(arm_evals: dict) -> list:
    """Ordered (label, column) pairs for the low-regime table of one seed."""
    cols = []
    by_arm = {
        "baseline": lambda ev: [sorted(ev["low"].keys())[-1]],
        "shake": lambda ev: sorted(ev["low"].keys()),
        "shake_snatch": lambda ev: sorted(ev["low"].keys()),
    }
    label_for = {
        "baseline": lambda k: "baseline",
        "shake": lambda k: f"shake-{k}",
        "shake_snatch": lambda k: f"snatch-{k}",
    }
    for arm in ("baseline", "shake", "shake_snatch"):
        if arm not in arm_evals:
            continue
        ev = arm_evals[arm]
        for key in by_arm[arm](ev):
            cols.append((label_for[arm](key), ev["low"][key]))
    return cols


def _high_columns(arm_evals: dict) -> list:
    cols = []
    for arm, label in (("baseline", "baseline"), ("shake", "shake"),
                       ("shake_snatch", "snatch")):
        if arm in arm_evals and arm_evals[arm]["high"]:
            cols.append((label, arm_evals[arm]["high"]["final"]))
    return cols


def _format_table(object_ids: list, columns: list, tries: int,
                  float_rows: bool = False) -> tuple:
    """(text, csv) for per-object rows plus the overall percentage row."""
    headers = ["object"] + [label for label, _ in columns]
    rows = []
    for i, oid in enumerate(object_ids):
        row = [oid]
        for _, col in columns:
            v = col["successes"][i]
            row.append(f"{v:.1f}" if float_rows else str(int(v)))
        rows.append(row)
    overall = ["overall"]
    for _, col in columns:
        total = sum(col["successes"])
        denom = len(col["successes"]) * col["tries"]
        overall.append(f"{100.0 * total / denom:.1f}%")
    rows.append(overall)

    widths = [max(len(headers[c]), max(len(r[c]) for r in rows))
              for c in range(len(headers))]
    def fmt(cells):
        return "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(cells))
    text = "\n".join([fmt(headers), fmt(["-" * w for w in widths])]
                     + [fmt(r) for r in rows]) + "\n"
    csv = "\n".join([",".join(headers)] + [",".join(r) for r in rows]) + "\n"
    return text, csv


def _mean_columns(per_seed_cols: list) -> list:
    """Average matching columns across seeds; keeps labels and tries."""
    labels = [label for label, _ in per_seed_cols[0]]
    merged = []
    for j, label in enumerate(labels):
        base = per_seed_cols[0][j][1]
        n = len(per_seed_cols)
        successes = [sum(cols[j][1]["successes"][i] for cols in per_seed_cols) / n
                     for i in range(len(base["successes"]))]
        merged.append((label, {"successes": successes, "tries": base["tries"],
                               "object_ids": base["object_ids"]}))
    return merged


def _write_pair(report_dir: str, stem: str, text: str, csv: str) -> None:
    with open(os.path.join(report_dir, stem + ".txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(os.path.join(report_dir, stem + ".csv"), "w", encoding="utf-8") as fh:
        fh.write(csv)


def _plot_success(out_dir: str, evals: dict, report_dir: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    colors = {"baseline": "tab:gray", "shake": "tab:blue",
              "shake_snatch": "tab:red"}
    for arm, per_seed in sorted(evals.items()):
        seeds = sorted(per_seed)
        keys = sorted(per_seed[seeds[0]]["low"].keys())
        xs = list(range(len(keys)))
        curves = []
        for seed in seeds:
            ys = [100.0 * _overall(per_seed[seed]["low"][k]) for k in keys]
            curves.append(ys)
            ax.plot(xs, ys, color=colors[arm], alpha=0.25, linewidth=1)
        mean = [sum(c[i] for c in curves) / len(curves) for i in range(len(xs))]
        ax.plot(xs, mean, color=colors[arm], linewidth=2.2, marker="o", label=arm)
    ax.set_xlabel("joint iteration")
    ax.set_ylabel("held-out grasp success (%), low regime")
    ax.set_title("Grasp success vs training iteration")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(report_dir, "success_vs_iteration.png"), dpi=120)
    plt.close(fig)


def _plot_dislodge(out_dir: str, report_dir: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = {"shake": ("tab:blue", "-"), "shake_snatch": ("tab:red", "--")}
    plotted = False
    for arm, (color, ls) in styles.items():
        dirs = _arm_seed_dirs(out_dir, arm)
        series = []
        for d in dirs:
            path = os.path.join(d, "metrics.json")
            if not os.path.exists(path):
                continue
            metrics = _read_json(path)
            probes = [it.get("probe") for it in metrics["iterations"]]
            if any(p is None for p in probes):
                continue
            series.append([100.0 * p["worst_case_rate"] for p in probes])
        if not series:
            continue
        xs = list(range(len(series[0])))
        for ys in series:
            ax.plot(xs, ys, color=color, alpha=0.25, linewidth=1, linestyle=ls)
        mean = [sum(s[i] for s in series) / len(series) for i in range(len(xs))]
        ax.plot(xs, mean, color=color, linestyle=ls, linewidth=2.2, marker="o",
                label=f"{arm} (worst-case)")
        plotted = True
    ax.set_xlabel("joint iteration")
    ax.set_ylabel("dislodge rate on fresh successful grasps (%)")
    ax.set_title("Adversary dislodge rate vs training iteration")
    ax.grid(alpha=0.3)
    if plotted:
        ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(report_dir, "dislodge_vs_iteration.png"), dpi=120)
    plt.close(fig)


def _overall(col: dict) -> float:
    return sum(col["successes"]) / (len(col["successes"]) * col["tries"])


def emit_report(out_dir: str) -> str:
    """Tables and figures for all completed arms; returns the report dir."""
    evals = _load_evals(out_dir)
    if not evals:
        raise FileNotFoundError(f"{out_dir}: no completed evaluations to report")
    report_dir = os.path.join(out_dir, "report")
    os.makedirs(report_dir, exist_ok=True)

    seeds = sorted({s for per_seed in evals.values() for s in per_seed})
    some_arm = next(iter(evals.values()))
    object_ids = some_arm[seeds[0]]["low"][
        sorted(some_arm[seeds[0]]["low"].keys())[0]]["object_ids"]

    low_by_seed = []
    high_by_seed = []
    for seed in seeds:
        arm_evals = {arm: evals[arm][seed] for arm in evals if seed in evals[arm]}
        low_cols = _low_columns(arm_evals)
        high_cols = _high_columns(arm_evals)
        low_by_seed.append(low_cols)
        if high_cols:
            high_by_seed.append(high_cols)
        tries = low_cols[0][1]["tries"]
        text, csv = _format_table(object_ids, low_cols, tries)
        _write_pair(report_dir, f"results_low_seed-{seed}", text, csv)
        if high_cols:
            text, csv = _format_table(object_ids, high_cols, tries)
            _write_pair(report_dir, f"results_high_seed-{seed}", text, csv)

    if len(seeds) > 1:
        mean_low = _mean_columns(low_by_seed)
        text, csv = _format_table(object_ids, mean_low, mean_low[0][1]["tries"],
                                  float_rows=True)
        _write_pair(report_dir, "results_low_mean", text, csv)
        if high_by_seed:
            mean_high = _mean_columns(high_by_seed)
            text, csv = _format_table(object_ids, mean_high,
                                      mean_high[0][1]["tries"], float_rows=True)
            _write_pair(report_dir, "results_high_mean", text, csv)

    summary = {"seeds": seeds, "arms": {}}
    for arm, per_seed in sorted(evals.items()):
        entry = {"low_overall": {}, "high_overall": {}}
        for seed in sorted(per_seed):
            ev = per_seed[seed]
            entry["low_overall"][str(seed)] = {
                k: _overall(c) for k, c in sorted(ev["low"].items())}
            entry["high_overall"][str(seed)] = {
                k: _overall(c) for k, c in sorted(ev["high"].items())}
        # budget accounting from the training metrics
        budgets = {}
        for d in _arm_seed_dirs(out_dir, arm):
            m = os.path.join(d, "metrics.json")
            if os.path.exists(m):
                budgets[d.rsplit("-", 1)[1]] = _read_json(m)["total_grasp_attempts"]
        entry["grasp_budget"] = budgets
        summary["arms"][arm] = entry
    _write_json(os.path.join(report_dir, "summary.json"), summary)

    _plot_success(out_dir, evals, report_dir)
    _plot_dislodge(out_dir, report_dir)
    return report_dir
