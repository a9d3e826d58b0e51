"""Monte Carlo experiment specification, trial execution and result files."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import subprocess
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from potential_gap.hierarchy import ABORT, OUTCOMES, NavConfig, run_episode
from potential_gap.sim.dynamics import MODELS, RobotModel
from potential_gap.sim.sensor import SensorModel
from potential_gap.sim.world import KINDS, generate_world


class SpecError(ValueError):
    """The experiment specification is malformed."""


FLAG_NAMES = {"PO": "projection", "RE": "radial_extension", "CV": "conversion"}


def _flags_label(flags: dict) -> str:
    return ",".join(("" if flags[v] else "!") + k for k, v in FLAG_NAMES.items())


def _parse_flags(entry) -> dict:
    """Accept ``{PO: true, RE: false}`` or a label such as ``"PO,!RE"``."""
    out = {v: True for v in FLAG_NAMES.values()}
    if isinstance(entry, str):
        for tok in filter(None, (t.strip() for t in entry.split(","))):
            neg = tok.startswith("!")
            name = tok.lstrip("!")
            if name not in FLAG_NAMES:
                raise SpecError(f"unknown flag {name!r}")
            out[FLAG_NAMES[name]] = not neg
        return out
    if isinstance(entry, dict):
        for k, v in entry.items():
            name = FLAG_NAMES.get(k, k)
            if name not in out:
                raise SpecError(f"unknown flag {k!r}")
            out[name] = bool(v)
        return out
    raise SpecError(f"cannot read flags from {entry!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid of trial configurations.

    Every combination of world kind, robot model, field of view, feature
    flags and ``r_min`` value is run for ``seeds`` consecutive seeds from
    ``seed_base``. ``r_min`` entries of ``None`` keep the planner default.
    """

    name: str = "experiment"
    worlds: tuple = ("sector",)
    models: tuple = ("holonomic_1st",)
    fovs_deg: tuple = (360.0,)
    flags: tuple = ({"projection": True, "radial_extension": True, "conversion": True},)
    r_min: tuple = (None,)
    seeds: int = 10
    seed_base: int = 0
    timeout: float = 120.0
    world_params: dict = field(default_factory=dict)
    planner: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seeds < 1:
            raise SpecError("need at least one seed")
        for w in self.worlds:
            if w not in KINDS:
                raise SpecError(f"unknown world kind {w!r}")
        for m in self.models:
            if m not in MODELS:
                raise SpecError(f"unknown robot model {m!r}")
        for f in self.fovs_deg:
            if not 0 < f <= 360:
                raise SpecError(f"field of view {f} outside (0, 360]")
        for r in self.r_min:
            if r is not None and r <= 0:
                raise SpecError("r_min values must be positive")
        if self.timeout <= 0:
            raise SpecError("timeout must be positive")
        known = {f.name for f in fields(NavConfig)}
        for k in self.planner:
            if k not in known:
                raise SpecError(f"unknown planner parameter {k!r}")
        if not (self.worlds and self.models and self.fovs_deg and self.flags and self.r_min):
            raise SpecError("every axis needs at least one value")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentSpec:
        if not isinstance(d, dict):
            raise SpecError("spec must be a mapping")
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        for key in ("worlds", "models", "fovs_deg", "r_min"):
            if key in d:
                v = d[key]
                d[key] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        if "flags" in d:
            v = d["flags"]
            v = v if isinstance(v, list) else [v]
            d["flags"] = tuple(_parse_flags(e) for e in v)
        if "fovs_deg" in d:
            d["fovs_deg"] = tuple(float(f) for f in d["fovs_deg"])
        if "r_min" in d:
            d["r_min"] = tuple(None if r is None else float(r) for r in d["r_min"])
        for key in ("world_params", "planner"):
            if key in d and not isinstance(d[key], dict):
                raise SpecError(f"{key} must be a mapping")
        try:
            return cls(**d)
        except TypeError as e:
            raise SpecError(str(e)) from None

    @classmethod
    def from_yaml(cls, text: str) -> ExperimentSpec:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise SpecError(f"invalid YAML: {e}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> ExperimentSpec:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise SpecError(f"cannot read spec: {e}") from None
        return cls.from_yaml(text)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("worlds", "models", "fovs_deg", "r_min"):
            d[k] = list(d[k])
        d["flags"] = [_flags_label(f) for f in self.flags]
        return d

    def with_seeds(self, n: int) -> ExperimentSpec:
        return ExperimentSpec.from_dict({**self.to_dict(), "seeds": n})

    def trials(self) -> list[Trial]:
        out = []
        for w, m, fov, fl, rm in itertools.product(self.worlds, self.models, self.fovs_deg,
                                                   self.flags, self.r_min):
            for s in range(self.seed_base, self.seed_base + self.seeds):
                out.append(Trial(w, m, fov, dict(fl), rm, s, self.timeout,
                                 dict(self.world_params), dict(self.planner)))
        return out


@dataclass(frozen=True)
class Trial:
    world: str
    model: str
    fov_deg: float
    flags: dict
    r_min: float | None
    seed: int
    timeout: float
    world_params: dict
    planner: dict

    @property
    def config(self) -> str:
        rm = "default" if self.r_min is None else repr(self.r_min)
        return f"{self.world}|{self.model}|{self.fov_deg:g}|{_flags_label(self.flags)}|{rm}"

    def nav_config(self) -> NavConfig:
        kw = dict(self.planner)
        kw.update(self.flags)
        kw["timeout"] = self.timeout
        if self.r_min is not None:
            kw["r_min"] = self.r_min
        return NavConfig(**kw)


# deterministic columns go to records.csv, wall-clock measurements to timing.csv
RECORD_FIELDS = ("config", "world", "model", "fov_deg", "flags", "r_min", "seed", "outcome",
                 "reason", "path_length", "duration", "ticks", "trajectories_per_tick",
                 "min_clearance")
TIMING_FIELDS = ("config", "seed", "plan_ms_median", "plan_ms_mean", "traj_ms_median")


@dataclass
class TrialRecord:
    config: str
    world: str
    model: str
    fov_deg: float
    flags: str
    r_min: str
    seed: int
    outcome: str
    reason: str = ""
    path_length: float = 0.0
    duration: float = 0.0
    ticks: int = 0
    trajectories_per_tick: float = 0.0
    min_clearance: float = math.inf
    plan_ms_median: float = math.nan
    plan_ms_mean: float = math.nan
    traj_ms_median: float = math.nan

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}")

    def row(self, names) -> list[str]:
        out = []
        for n in names:
            v = getattr(self, n)
            out.append(_fmt(v))
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 6)) if math.isfinite(v) else str(v)
    return str(v)


def run_trial(trial: Trial) -> TrialRecord:
    """Run one trial; any exception becomes an ``abort`` record with the error text."""
    base = dict(config=trial.config, world=trial.world, model=trial.model, fov_deg=trial.fov_deg,
                flags=_flags_label(trial.flags),
                r_min="default" if trial.r_min is None else repr(trial.r_min), seed=trial.seed)
    try:
        cfg = trial.nav_config()
        params = {"r_ins": cfg.r_ins, **trial.world_params}
        world = generate_world(trial.world, trial.seed, params)
        model = RobotModel(trial.model, cfg.r_ins)
        sensor = SensorModel.with_fov(math.radians(trial.fov_deg))
        res = run_episode(world, model, sensor, cfg, seed=trial.seed)
    except Exception as e:  # noqa: BLE001 - a failing trial must not stop the run
        msg = f"{type(e).__name__}: {e}".replace("\n", " ")
        tb = traceback.extract_tb(e.__traceback__)
        if tb:
            msg += f" at {Path(tb[-1].filename).name}:{tb[-1].lineno}"
        return TrialRecord(outcome=ABORT, reason=msg, **base)
    st = res.status
    plan = np.asarray(res.planning_times) * 1e3
    traj = np.asarray(res.trajectory_times) * 1e3
    ticks = len(plan)
    return TrialRecord(
        outcome=st.outcome, reason=st.reason, path_length=st.path_length, duration=st.elapsed,
        ticks=ticks, trajectories_per_tick=len(traj) / ticks if ticks else 0.0,
        min_clearance=res.min_clearance,
        plan_ms_median=float(np.median(plan)) if ticks else math.nan,
        plan_ms_mean=float(np.mean(plan)) if ticks else math.nan,
        traj_ms_median=float(np.median(traj)) if len(traj) else math.nan,
        **base)


def run_experiment(spec: ExperimentSpec, jobs: int = 1, progress=None) -> list[TrialRecord]:
    """Run every trial of ``spec``; records come back ordered by (config, seed)."""
    trials = spec.trials()
    if jobs > 1 and len(trials) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = []
            for r in pool.map(run_trial, trials, chunksize=1):
                records.append(r)
                if progress:
                    progress(r)
    else:
        records = []
        for t in trials:
            r = run_trial(t)
            records.append(r)
            if progress:
                progress(r)
    order = {t.config: i for i, t in enumerate(trials)}
    records.sort(key=lambda r: (order[r.config], r.seed))
    return records


def records_csv(records: list[TrialRecord], names=RECORD_FIELDS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in records:
        w.writerow(r.row(names))
    return buf.getvalue()


def read_records(path) -> list[TrialRecord]:
    """Load ``records.csv`` (and ``timing.csv`` beside it, when present)."""
    path = Path(path)
    if path.is_dir():
        path = path / "records.csv"
    types = {f.name: f.type for f in fields(TrialRecord)}
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            kw = {}
            for k, v in row.items():
                t = types[k]
                kw[k] = int(v) if t == "int" else float(v) if t == "float" else v
            out.append(TrialRecord(**kw))
    timing = path.with_name("timing.csv")
    if timing.exists():
        by_key = {(r.config, r.seed): r for r in out}
        with open(timing, newline="") as f:
            for row in csv.DictReader(f):
                r = by_key.get((row["config"], int(row["seed"])))
                if r is not None:
                    for k in TIMING_FIELDS[2:]:
                        setattr(r, k, float(row[k]))
    return out


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=10,
                             cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_results(out_dir, spec: ExperimentSpec, records: list[TrialRecord]) -> Path:
    """Write records.csv, timing.csv and manifest.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_csv(records))
    (out / "timing.csv").write_text(records_csv(records, TIMING_FIELDS))
    manifest = {
        "spec": spec.to_dict(),
        "resolved_planner": {k: v for k, v in asdict(NavConfig(**spec.planner).resolved()).items()},
        "trials": len(records),
        "git_describe": git_describe(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
