"""Parameter sweeps over fleet composition or randomness, and result files."""

from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DrstError, IoError, ValidationError
from .metrics import INDICATOR_NAMES
from .net import RouteNetwork
from .sim import ScenarioConfig, SimResult, run
from .strategy import StrategyConfig

FLEET_AXIS = "fleet_size_at_fixed_total_seats"
RANDOMNESS_AXIS = "randomness_p"
AXES = (FLEET_AXIS, RANDOMNESS_AXIS)

ABSENT = "NA"

SCENARIO_COLUMNS = (
    "strategy", "randomness_p", "n_vehicles", "capacity", "speed", "total_time",
    "rate", "max_group_size", "max_wait", "max_walk", "seed",
)
COUNT_COLUMNS = (
    "requests", "rejected_groups", "satisfied_groups", "unsatisfied_groups",
    "in_transit_groups", "unsatisfied_passengers", "duration_h",
)
RUN_COLUMNS = SCENARIO_COLUMNS + INDICATOR_NAMES + COUNT_COLUMNS
SWEEP_COLUMNS = ("axis", "axis_value", "replication") + RUN_COLUMNS


class SweepRunError(DrstError):
    def __init__(self, message: str, category: str):
        super().__init__(message)
        self.category = category


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig
    axis: str
    values: tuple[float, ...]
    replications: int = 1
    seed_base: int = 0
    total_seats: int | None = None
    strategies: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValidationError("axis", f"must be one of {AXES}")
        if not self.values:
            raise ValidationError("values", "at least one axis value is required")
        if self.replications < 1:
            raise ValidationError("replications", "must be >= 1")
        if self.axis == FLEET_AXIS:
            seats = self.seats
            for v in self.values:
                if v != int(v) or v < 1 or seats % int(v):
                    raise ValidationError("values", f"fleet size {v} does not divide total seats {seats}")
        else:
            for v in self.values:
                if not 0.0 <= v <= 1.0:
                    raise ValidationError("values", f"randomness {v} outside [0, 1]")

    @property
    def seats(self) -> int:
        return self.total_seats or self.base.n_vehicles * self.base.capacity

    @property
    def kinds(self) -> tuple[str, ...]:
        return self.strategies or (self.base.strategy.kind,)

    def configs(self) -> list[tuple[dict, ScenarioConfig]]:
        """Every run of the sweep in output order: strategy, axis value, replication."""
        out = []
        for kind in self.kinds:
            for value in self.values:
                if self.axis == FLEET_AXIS:
                    n = int(value)
                    cfg = dataclasses.replace(
                        self.base, n_vehicles=n, capacity=self.seats // n,
                        strategy=StrategyConfig(kind, self.base.strategy.randomness_p),
                    )
                else:
                    cfg = dataclasses.replace(self.base, strategy=StrategyConfig(kind, float(value)))
                for rep in range(self.replications):
                    key = {"axis": self.axis, "axis_value": value, "replication": rep}
                    out.append((key, dataclasses.replace(cfg, seed=self.seed_base + rep)))
        return out


def result_row(cfg: ScenarioConfig, result: SimResult) -> dict:
    """Flat record: scenario echo, the twelve indicators, terminal counts."""
    d = cfg.demand
    row = {
        "strategy": cfg.strategy.kind, "randomness_p": cfg.strategy.randomness_p,
        "n_vehicles": cfg.n_vehicles, "capacity": cfg.capacity, "speed": cfg.speed,
        "total_time": cfg.total_time, "rate": d.rate, "max_group_size": d.max_group_size,
        "max_wait": d.max_wait, "max_walk": d.max_walk, "seed": cfg.seed,
    }
    row.update(result.indicators.as_dict())
    t = result.totals
    row.update(
        requests=t.requests, rejected_groups=t.rejected_groups, satisfied_groups=t.satisfied_groups,
        unsatisfied_groups=t.unsatisfied_groups, in_transit_groups=t.in_transit_groups,
        unsatisfied_passengers=t.unsatisfied_passengers, duration_h=t.duration_h,
    )
    return row


def _run_one(args):
    key, cfg, network, tracts, keep_logs = args
    try:
        res = run(cfg, network, tracts)
    except DrstError as exc:
        raise SweepRunError(f"{key['axis']}={key['axis_value']} replication {key['replication']}: {exc}", exc.category) from exc
    row = {**key, **result_row(cfg, res)}
    return row, (res.log_lines() if keep_logs else None)


def run_sweep(
    sweep: SweepSpec,
    network: RouteNetwork,
    tracts,
    workers: int = 1,
    keep_logs: bool = False,
) -> tuple[list[dict], list[list[str]] | None]:
    """Run every configuration; rows come back in deterministic order."""
    jobs = [(key, cfg, network, tracts, keep_logs) for key, cfg in sweep.configs()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows = [r for r, _ in results]
    logs = [lg for _, lg in results] if keep_logs else None
    return rows, logs


def mean_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float | None]:
    """Sample mean and Student-t confidence half-width (None for n < 2)."""
    x = np.asarray(values, dtype=float)
    m = float(x.mean())
    if len(x) < 2:
        return m, None
    half = stats.t.ppf(0.5 + level / 2, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x))
    return m, float(half)


def summarize(rows: Sequence[dict], columns: Sequence[str] = INDICATOR_NAMES) -> list[dict]:
    """Per (strategy, axis value) mean and 95% CI of each indicator."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["strategy"], r.get("axis_value")), []).append(r)
    out = []
    for (kind, value), members in groups.items():
        entry = {"strategy": kind, "axis_value": value, "runs": len(members), "indicators": {}}
        for col in columns:
            vals = [m[col] for m in members if m[col] is not None]
            if not vals:
                entry["indicators"][col] = {"n": 0, "mean": None, "ci95": None, "low": None, "high": None}
                continue
            m, half = mean_ci(vals)
            entry["indicators"][col] = {
                "n": len(vals), "mean": m, "ci95": half,
                "low": None if half is None else m - half,
                "high": None if half is None else m + half,
            }
        out.append(entry)
    return out


def _fmt(v) -> str:
    if v is None:
        return ABSENT
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(rows: Sequence[dict], columns: Sequence[str], header: bool = True) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit_results(
    rows: Sequence[dict],
    out_dir,
    logs: Sequence[Sequence[str]] | None = None,
    provenance: dict | None = None,
    columns: Sequence[str] = SWEEP_COLUMNS,
) -> dict[str, Path]:
    """Write indicators.csv, summary.json and (optionally) per-run event logs."""
    if not rows:
        raise ValidationError("rows", "result table is empty")
    out = Path(out_dir)
    written = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "indicators.csv"
        p.write_text(csv_text(rows, columns))
        written["csv"] = p
        summary = {"provenance": provenance or {}, "runs": len(rows), "groups": summarize(rows)}
        p = out / "summary.json"
        p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        written["summary"] = p
        if logs:
            log_dir = out / "logs"
            log_dir.mkdir(exist_ok=True)
            for i, (row, lines) in enumerate(zip(rows, logs)):
                name = f"run{i:04d}_{row['strategy']}_{_fmt(row.get('axis_value'))}_rep{row.get('replication', 0)}.ndjson"
                (log_dir / name).write_text("".join(line + "\n" for line in lines))
            written["logs"] = log_dir
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return written
