"""Aggregate trial records into per-configuration tables and plot series."""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from potential_gap.bench.experiment import TrialRecord
from potential_gap.hierarchy import OUTCOMES


@dataclass
class ConfigSummary:
    config: str
    world: str
    model: str
    fov_deg: float
    flags: str
    r_min: str
    trials: int
    percent: dict
    plan_ms_median: float
    plan_ms_mean: float
    traj_ms_median: float
    trajectories_per_tick: float

    @property
    def success(self) -> float:
        return self.percent["success"]

    @property
    def collision(self) -> float:
        return self.percent["collision"]


def _nanmedian(xs) -> float:
    a = np.asarray([x for x in xs if not math.isnan(x)], dtype=float)
    return float(np.median(a)) if a.size else math.nan


def _nanmean(xs) -> float:
    a = np.asarray([x for x in xs if not math.isnan(x)], dtype=float)
    return float(np.mean(a)) if a.size else math.nan


def summarize(records: list[TrialRecord]) -> list[ConfigSummary]:
    """One row per configuration, in first-seen order; empty configurations do not appear."""
    if not records:
        raise ValueError("no records to summarize")
    groups: OrderedDict[str, list[TrialRecord]] = OrderedDict()
    for r in records:
        groups.setdefault(r.config, []).append(r)
    out = []
    for key, rs in groups.items():
        n = len(rs)
        pct = {o: 100.0 * sum(r.outcome == o for r in rs) / n for o in OUTCOMES}
        first = rs[0]
        out.append(ConfigSummary(
            config=key, world=first.world, model=first.model, fov_deg=first.fov_deg,
            flags=first.flags, r_min=first.r_min, trials=n, percent=pct,
            plan_ms_median=_nanmedian(r.plan_ms_median for r in rs),
            plan_ms_mean=_nanmean(r.plan_ms_mean for r in rs),
            traj_ms_median=_nanmedian(r.traj_ms_median for r in rs),
            trajectories_per_tick=_nanmean(r.trajectories_per_tick for r in rs),
        ))
    return out


SUMMARY_COLUMNS = ("world", "model", "fov_deg", "flags", "r_min", "trials", "success",
                   "collision", "abort", "timeout", "plan_ms_median", "plan_ms_mean",
                   "traj_ms_median", "trajectories_per_tick")


def _cells(s: ConfigSummary) -> list[str]:
    vals = []
    for c in SUMMARY_COLUMNS:
        if c in OUTCOMES:
            vals.append(f"{s.percent[c]:.1f}")
        else:
            v = getattr(s, c)
            if c == "fov_deg":
                vals.append(f"{v:g}")
            elif isinstance(v, float):
                vals.append(f"{v:.3f}")
            else:
                vals.append(str(v))
    return vals


def format_table(rows: list[ConfigSummary]) -> str:
    """Aligned plain-text table; percentages per outcome, times in milliseconds."""
    table = [list(SUMMARY_COLUMNS)] + [_cells(s) for s in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(SUMMARY_COLUMNS))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in table]
    return "\n".join(lines) + "\n"


def summary_csv(rows: list[ConfigSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in rows:
        w.writerow(_cells(s))
    return buf.getvalue()


def series(rows: list[ConfigSummary], axis: str) -> dict[str, list[tuple[float, dict]]]:
    """Outcome percentages along ``axis`` ("fov_deg" or "r_min"), one series per remaining setting."""
    if axis not in ("fov_deg", "r_min"):
        raise ValueError("axis must be fov_deg or r_min")
    out: OrderedDict[str, list] = OrderedDict()
    for s in rows:
        if axis == "fov_deg":
            key = f"{s.world}_{s.model}_{s.flags}_rmin-{s.r_min}"
            x = s.fov_deg
        else:
            if s.r_min == "default":
                continue
            key = f"{s.world}_{s.model}_{s.flags}_fov-{s.fov_deg:g}"
            x = float(s.r_min)
        out.setdefault(key, []).append((x, s.percent))
    for k in out:
        out[k].sort(key=lambda p: p[0])
    return {k: v for k, v in out.items() if len(v) > 1 or axis == "fov_deg"}


def trend(points: list[tuple[float, dict]], outcome) -> float:
    """Spearman rank correlation between x and an outcome percentage (or a sum of several)."""
    names = (outcome,) if isinstance(outcome, str) else tuple(outcome)
    xs = [p[0] for p in points]
    ys = [sum(p[1][o] for o in names) for p in points]
    if len(set(ys)) < 2 or len(set(xs)) < 2:
        return 0.0
    return float(stats.spearmanr(xs, ys).statistic)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def write_plotdata(rows: list[ConfigSummary], out_dir) -> list[Path]:
    """One whitespace-separated file per series: ``x success collision abort timeout``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for axis, prefix in (("fov_deg", "fov"), ("r_min", "rmin")):
        for key, pts in series(rows, axis).items():
            p = out / f"{prefix}__{_safe(key)}.dat"
            lines = ["# x " + " ".join(OUTCOMES)]
            for x, pct in pts:
                lines.append(f"{x:g} " + " ".join(f"{pct[o]:.1f}" for o in OUTCOMES))
            p.write_text("\n".join(lines) + "\n")
            written.append(p)
    return written
