"""Aggregate completed run logs into summaries, trajectories, and figures.

For every (dataset, mode) group found in a directory of trial logs the
report emits:

* a row in summary.csv / summary.txt with trial-averaged train/test R2,
* trajectory_<pde>_<mode>.csv with per-iteration mean best test R2 and
  its standard error over trials,
* trajectory_<pde>.png overlaying the modes (mean line, +-SEM band).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .errors import NoRuns


@dataclass
class TrialLog:
    header: dict
    records: list[dict]
    footer: Optional[dict]

    @property
    def group(self) -> tuple[str, str]:
        return (self.header["dataset_name"], self.header["config"]["mode"])


def load_logs(runs_dir: Union[str, Path]) -> list[TrialLog]:
    runs_dir = Path(runs_dir)
    logs = []
    for path in sorted(runs_dir.rglob("*.jsonl")):
        header, records, footer = None, [], None
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.get("record")
            if kind == "header":
                header = rec
            elif kind == "iter":
                records.append(rec)
            elif kind == "footer":
                footer = rec
        if header is not None and footer is not None:
            logs.append(TrialLog(header, records, footer))
    if not logs:
        raise NoRuns(f"no completed run logs under {runs_dir}")
    return logs


def _mean_sem(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def summarize(logs: list[TrialLog]) -> list[dict]:
    """One row per (pde, mode): trial-averaged final train/test R2."""
    groups: dict[tuple[str, str], list[TrialLog]] = {}
    for log in logs:
        groups.setdefault(log.group, []).append(log)
    rows = []
    for (pde, mode), members in sorted(groups.items()):
        r2_train = [m.footer["r2_train"] for m in members
                    if m.footer.get("r2_train") is not None]
        r2_test = [m.footer["r2_test"] for m in members
                   if m.footer.get("r2_test") is not None]
        mean_train = _mean_sem(r2_train)[0] if r2_train else None
        mean_test, sem_test = _mean_sem(r2_test) if r2_test else (None, 0.0)
        rows.append({
            "pde": pde,
            "mode": mode,
            "trials": len(members),
            "mean_r2_train": mean_train,
            "mean_r2_test": mean_test,
            "sem_r2_test": sem_test,
            "flag": "single-trial" if len(members) == 1 else "",
        })
    return rows


def trajectory(logs: list[TrialLog]) -> list[tuple[int, Optional[float], float]]:
    """Per-iteration (iter, mean best test R2, SEM) across trials.

    Iterations where a trial has no best yet contribute nothing for that
    trial; rows where no trial has a value carry a None mean.
    """
    t_max = max((rec["iter"] for log in logs for rec in log.records), default=0)
    per_iter: dict[int, list[float]] = {t: [] for t in range(1, t_max + 1)}
    for log in logs:
        last = None
        by_iter = {rec["iter"]: rec for rec in log.records}
        for t in range(1, t_max + 1):
            rec = by_iter.get(t)
            if rec is not None and rec.get("best_test_r2") is not None:
                last = rec["best_test_r2"]
            if last is not None:
                per_iter[t].append(last)
    rows = []
    for t in range(1, t_max + 1):
        vals = per_iter[t]
        if vals:
            mean, sem = _mean_sem(vals)
            rows.append((t, mean, sem))
        else:
            rows.append((t, None, 0.0))
    return rows


def render_table(rows: list[dict]) -> str:
    headers = ["pde", "mode", "trials", "mean_r2_train", "mean_r2_test",
               "sem_r2_test", "flag"]
    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.6f}"
        return str(v)
    table = [headers] + [[fmt(r[h]) for h in headers] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _write_summary_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pde", "mode", "trials", "mean_r2_train",
                         "mean_r2_test", "sem_r2_test", "flag"])
        for r in rows:
            writer.writerow([
                r["pde"], r["mode"], r["trials"],
                "" if r["mean_r2_train"] is None else repr(r["mean_r2_train"]),
                "" if r["mean_r2_test"] is None else repr(r["mean_r2_test"]),
                repr(r["sem_r2_test"]),
                r["flag"],
            ])


def _write_trajectory_csv(rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "mean_best_test_r2", "sem"])
        for t, mean, sem in rows:
            writer.writerow([t, "" if mean is None else repr(mean), repr(sem)])


def _render_figure(pde: str, curves: dict[str, list], path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    styles = {"NeuroSymBo": ("tab:red", "-"), "FixedPrompt": ("tab:blue", "--")}
    for mode, rows in sorted(curves.items()):
        xs = [t for t, mean, _ in rows if mean is not None]
        ys = [mean for _, mean, _ in rows if mean is not None]
        sems = [sem for _, mean, sem in rows if mean is not None]
        if not xs:
            continue
        color, ls = styles.get(mode, ("tab:gray", "-"))
        ax.plot(xs, ys, ls, color=color, label=mode)
        ax.fill_between(
            xs,
            [y - s for y, s in zip(ys, sems)],
            [y + s for y, s in zip(ys, sems)],
            color=color, alpha=0.2, linewidth=0,
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("best test $R^2$")
    ax.set_title(pde)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def report(runs_dir: Union[str, Path], out_dir: Union[str, Path],
           fmt: str = "csv", figures: bool = True) -> dict:
    """Aggregate a runs directory; returns paths of everything written."""
    if fmt not in ("csv", "table"):
        raise ValueError(f"unknown report format {fmt!r}")
    logs = load_logs(runs_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = summarize(logs)
    written: dict[str, object] = {"summary_rows": rows}
    if fmt == "csv":
        summary_path = out_dir / "summary.csv"
        _write_summary_csv(rows, summary_path)
    else:
        summary_path = out_dir / "summary.txt"
        summary_path.write_text(render_table(rows) + "\n")
    written["summary"] = summary_path

    groups: dict[tuple[str, str], list[TrialLog]] = {}
    for log in logs:
        groups.setdefault(log.group, []).append(log)
    trajectories: dict[str, dict[str, list]] = {}
    traj_paths = []
    for (pde, mode), members in sorted(groups.items()):
        rows_t = trajectory(members)
        path = out_dir / f"trajectory_{pde}_{mode}.csv"
        _write_trajectory_csv(rows_t, path)
        traj_paths.append(path)
        trajectories.setdefault(pde, {})[mode] = rows_t
    written["trajectories"] = traj_paths

    if figures:
        figure_paths = []
        for pde, curves in sorted(trajectories.items()):
            path = out_dir / f"trajectory_{pde}.png"
            _render_figure(pde, curves, path)
            figure_paths.append(path)
        written["figures"] = figure_paths
    return written
