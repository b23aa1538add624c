"""Event-sourced run statistics and their CSV form."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

NA = "NA"


class MetricEvent(NamedTuple):
    kind: str  # created | relayed | delivered | dropped | expired | aborted | refused
    time: float
    msg_id: str = ""
    created_at: float = 0.0
    hops: int = 0


@dataclass
class SimReport:
    scenario: str = ""
    router: str = ""
    seed: int = 0
    duration: float = 0.0
    created: int = 0
    delivered: int = 0
    relayed: int = 0
    dropped: int = 0
    expired: int = 0
    aborted: int = 0
    refused: int = 0
    delivery_probability: float = 0.0
    overhead_ratio: float | None = None
    avg_latency: float | None = None
    avg_hops: float | None = None
    copy_violations: int = 0
    series: list[dict] = field(default_factory=list, repr=False)

    @property
    def total_drops(self) -> int:
        return self.dropped + self.expired + self.aborted

    def row(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "series":
                continue
            out[f.name] = _fmt(getattr(self, f.name))
        return out


REPORT_COLUMNS = [f.name for f in fields(SimReport) if f.name != "series"]
SERIES_COLUMNS = ["time", "created", "delivered", "relayed", "dropped", "expired",
                  "buffer_occupancy", "live_links"]


def _fmt(v) -> str:
    if v is None:
        return NA
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return NA
        return f"{v:.10g}"
    return str(v)


class MetricsCollector:
    def __init__(self):
        self.created = 0
        self.relayed = 0
        self.dropped = 0
        self.expired = 0
        self.aborted = 0
        self.refused = 0
        self.delivered_ids: set[str] = set()
        self.latencies: list[float] = []
        self.hops: list[int] = []
        self.series: list[dict] = []
        self._last = -math.inf

    @property
    def delivered(self) -> int:
        return len(self.delivered_ids)

    def record(self, event: MetricEvent) -> None:
        if event.time < self._last:
            raise ValueError("metric events must arrive in time order")
        self._last = event.time
        k = event.kind
        if k == "created":
            self.created += 1
        elif k == "relayed":
            self.relayed += 1
        elif k == "delivered":
            if event.msg_id not in self.delivered_ids:
                self.delivered_ids.add(event.msg_id)
                self.latencies.append(event.time - event.created_at)
                self.hops.append(event.hops)
        elif k == "dropped":
            self.dropped += 1
        elif k == "expired":
            self.expired += 1
        elif k == "aborted":
            self.aborted += 1
        elif k == "refused":
            self.refused += 1
        else:
            raise ValueError(f"unknown metric event {k!r}")

    def sample(self, time: float, buffer_occupancy: float, live_links: int) -> None:
        self.series.append({
            "time": time, "created": self.created, "delivered": self.delivered,
            "relayed": self.relayed, "dropped": self.dropped, "expired": self.expired,
            "buffer_occupancy": buffer_occupancy, "live_links": live_links,
        })

    def finalize(self, now: float, scenario: str = "", router: str = "", seed: int = 0,
                 copy_violations: int = 0) -> SimReport:
        d = self.delivered
        return SimReport(
            scenario=scenario, router=router, seed=seed, duration=now,
            created=self.created, delivered=d, relayed=self.relayed,
            dropped=self.dropped, expired=self.expired, aborted=self.aborted,
            refused=self.refused,
            delivery_probability=d / self.created if self.created else 0.0,
            overhead_ratio=(self.relayed - d) / d if d else None,
            avg_latency=sum(self.latencies) / d if d else None,
            avg_hops=sum(self.hops) / d if d else None,
            copy_violations=copy_violations,
            series=list(self.series),
        )


def report_csv(reports: list[SimReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def series_csv(report: SimReport) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SERIES_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in report.series:
        w.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
