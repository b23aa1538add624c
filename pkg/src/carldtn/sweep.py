"""Parameter sweeps: every (axis value, seed, router) combination of a base scenario.

Runs that differ only in router, buffer size, TTL or duration see the same
node movement, so each distinct movement setup is simulated once as a
contact trace and replayed for all of its runs.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .config import ROUTERS, Scenario, parse_size, validate
from .engine import Contact, Simulator, contact_trace
from .errors import ValidationError
from .metrics import REPORT_COLUMNS, SimReport, _fmt, series_csv
from .mobility import VARIANTS

AXES = ("duration", "buffer", "ttl", "mobility")
OUTPUT_ENV = "CARLDTN_OUTPUT_DIR"
SUMMARY_METRICS = ("delivery_probability", "overhead_ratio", "avg_latency", "avg_hops")


def output_dir(explicit: str | os.PathLike | None = None) -> Path:
    """``explicit`` if given, else ``$CARLDTN_OUTPUT_DIR``, else ``./carldtn-out``."""
    if explicit is not None:
        return Path(explicit)
    return Path(os.environ.get(OUTPUT_ENV, "carldtn-out"))


def apply_axis(base: Scenario, axis: str, value) -> Scenario:
    """``base`` with one sweep axis set to ``value``.

    ``buffer`` applies to every group; ``mobility`` to the pedestrian groups
    (vehicles stay on the road graph).
    """
    if axis == "duration":
        return replace(base, duration=float(value))
    if axis == "ttl":
        return replace(base, workload=replace(base.workload, ttl=float(value)))
    if axis == "buffer":
        size = value if isinstance(value, int) else parse_size(str(value))
        return replace(base, groups=tuple(replace(g, buffer=size) for g in base.groups))
    if axis == "mobility":
        if value not in VARIANTS:
            raise ValidationError("mobility", f"expected one of {VARIANTS}, got {value!r}")
        return replace(base, groups=tuple(replace(g, mobility=value) if g.kind == "pedestrian"
                                          else g for g in base.groups))
    raise ValidationError("axis", f"expected one of {AXES}, got {axis!r}")


def parse_axis_values(axis: str, text: str) -> list:
    """Comma-separated axis values in their natural type."""
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValidationError("values", "no values given")
    try:
        if axis in ("duration", "ttl"):
            return [float(t) for t in items]
        if axis == "buffer":
            return [parse_size(t) for t in items]
    except ValueError as exc:
        raise ValidationError("values", str(exc)) from None
    return items


@dataclass
class RunOutcome:
    axis_value: object
    seed: int
    router: str
    report: SimReport | None = None
    error: str | None = None


@dataclass
class SweepResult:
    axis: str
    runs: list[RunOutcome] = field(default_factory=list)

    @property
    def failures(self) -> list[RunOutcome]:
        return [r for r in self.runs if r.error is not None]

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def _movement_key(s: Scenario) -> tuple:
    """Everything contact detection depends on."""
    groups = tuple((g.count, g.mobility, g.speed, g.pause, g.leg, g.graph, g.range)
                   for g in s.groups)
    return (s.seed, s.world, groups, s.link_check_interval)


def _run_group(jobs: list[tuple[int, object, Scenario]]) -> list[tuple[int, RunOutcome]]:
    """Simulate runs sharing one movement setup; the trace covers the longest run."""
    longest = max((s for _, _, s in jobs), key=lambda s: s.duration)
    contacts: list[Contact] | None
    try:
        contacts = contact_trace(longest)
    except Exception:  # noqa: BLE001 - fall back to live detection per run
        contacts = None
    out = []
    for idx, value, s in jobs:
        o = RunOutcome(value, s.seed, s.router)
        try:
            o.report = Simulator(s, contacts=contacts).run()
        except Exception as exc:  # noqa: BLE001 - a sweep reports failures, it does not stop
            o.error = f"{type(exc).__name__}: {exc}"
        out.append((idx, o))
    return out


def run_sweep(base: Scenario, axis: str, values: Sequence, seeds: Sequence[int],
              routers: Sequence[str] = ROUTERS, out_dir: str | os.PathLike | None = None,
              jobs: int = 1, progress: Callable[[RunOutcome], None] | None = None) -> SweepResult:
    """Run ``|values| * |seeds| * |routers|`` simulations and write the CSVs.

    Writes ``runs.csv`` (one row per run), ``summary.csv`` (mean and standard
    deviation per axis value and router), ``errors.csv`` when any run failed
    and ``series/`` with each run's sampled time series.  ``out_dir=None``
    skips writing.  Configuration problems raise ``ValidationError`` before
    any run starts.
    """
    if axis not in AXES:
        raise ValidationError("axis", f"expected one of {AXES}, got {axis!r}")
    for r in routers:
        if r not in ROUTERS:
            raise ValidationError("router", f"unknown router {r!r}")
    if not values or not seeds or not routers:
        raise ValidationError("values", "axis values, seeds and routers must be non-empty")
    plan: list[tuple[object, Scenario]] = []
    for v in values:
        scen = apply_axis(base, axis, v)
        for seed in seeds:
            for r in routers:
                s = replace(scen, seed=int(seed), router=r)
                validate(s)
                plan.append((v, s))

    groups: dict[tuple, list[tuple[int, object, Scenario]]] = {}
    for i, (v, s) in enumerate(plan):
        groups.setdefault(_movement_key(s), []).append((i, v, s))
    outcomes: list[RunOutcome | None] = [None] * len(plan)
    batches = list(groups.values())
    if jobs > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = ex.map(_run_group, batches)
            for batch in done:
                for i, o in batch:
                    outcomes[i] = o
                    if progress:
                        progress(o)
    else:
        for batch in batches:
            for i, o in _run_group(batch):
                outcomes[i] = o
                if progress:
                    progress(o)
    result = SweepResult(axis, outcomes)
    if out_dir is not None:
        write_sweep(result, Path(out_dir))
    return result


def _value_text(v) -> str:
    return _fmt(v) if not isinstance(v, str) else v


def runs_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "value"] + REPORT_COLUMNS)
    for o in result.runs:
        if o.report is None:
            continue
        row = o.report.row()
        w.writerow([result.axis, _value_text(o.axis_value)] + [row[c] for c in REPORT_COLUMNS])
    return buf.getvalue()


def _mean_std(xs: list[float]) -> tuple[float | None, float | None]:
    if not xs:
        return None, None
    m = math.fsum(xs) / len(xs)
    if len(xs) < 2:
        return m, 0.0
    return m, math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def summarize(result: SweepResult) -> list[dict]:
    """Per (axis value, router): run count and mean/std of the headline metrics."""
    cells: dict[tuple[str, str], list[SimReport]] = {}
    order: list[tuple[str, str]] = []
    for o in result.runs:
        if o.report is None:
            continue
        k = (_value_text(o.axis_value), o.router)
        if k not in cells:
            cells[k] = []
            order.append(k)
        cells[k].append(o.report)
    rows = []
    for value, router in order:
        reps = cells[(value, router)]
        row = {"axis": result.axis, "value": value, "router": router, "runs": len(reps)}
        for m in SUMMARY_METRICS:
            vals = [getattr(r, m) for r in reps if getattr(r, m) is not None]
            mean, std = _mean_std(vals)
            row[f"{m}_mean"] = mean
            row[f"{m}_std"] = std
        rows.append(row)
    return rows


def summary_csv(result: SweepResult) -> str:
    rows = summarize(result)
    cols = ["axis", "value", "router", "runs"] + [f"{m}_{s}" for m in SUMMARY_METRICS
                                                  for s in ("mean", "std")]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def errors_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "value", "seed", "router", "error"])
    for o in result.failures:
        w.writerow([result.axis, _value_text(o.axis_value), o.seed, o.router, o.error])
    return buf.getvalue()


def series_name(axis: str, o: RunOutcome) -> str:
    value = _value_text(o.axis_value).replace("/", "_")
    return f"{o.router}_{axis}-{value}_seed{o.seed}.csv"


def write_sweep(result: SweepResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs.csv").write_text(runs_csv(result))
    (out / "summary.csv").write_text(summary_csv(result))
    err = out / "errors.csv"
    if result.failures:
        err.write_text(errors_csv(result))
    elif err.exists():
        err.unlink()
    series = out / "series"
    series.mkdir(exist_ok=True)
    for o in result.runs:
        if o.report is not None:
            (series / series_name(result.axis, o)).write_text(series_csv(o.report))
