"""Discrete-event replay of a VNR workload against a substrate network.

Time is integral. A request is alive on ``[arrival, arrival + lifetime)`` and
accrues its revenue and cost once per whole time unit alive. Departures at a
timestamp are processed before arrivals at the same timestamp.
"""

from __future__ import annotations

import csv
import heapq
import io
import logging
import os
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Callable, Optional, Sequence

from hcmvne.embedding import ALGORITHMS
from hcmvne.model import ZERO, EmbeddingMap, EmbedParams, SubstrateNetwork, VnRequest, allocate, cost, release, revenue

logger = logging.getLogger(__name__)

DEPARTURE, ARRIVAL = 0, 1

REPORT_HEADER = ["time", "offered", "accepted", "acceptance_ratio", "avg_revenue", "avg_cost", "rc_ratio"]
REQUEST_HEADER = ["vnr_id", "arrival", "lifetime", "accepted", "revenue", "cost", "backtracks"]

_Q = Decimal("0.000001")


@dataclass(frozen=True, order=True)
class SimEvent:
    time: int
    kind: int  # DEPARTURE sorts before ARRIVAL
    vnr_id: int


@dataclass
class Sample:
    time: int
    offered: int
    accepted: int
    revenue: Decimal  # accumulated revenue-time over [0, time)
    cost: Decimal


@dataclass
class RequestRecord:
    vnr_id: int
    arrival: int
    lifetime: int
    accepted: bool
    revenue: Decimal
    cost: Decimal
    backtracks: int


@dataclass
class SimReport:
    algorithm: str
    horizon: int
    samples: list[Sample] = field(default_factory=list)
    requests: list[RequestRecord] = field(default_factory=list)


Observer = Callable[[int, SubstrateNetwork, dict], None]


def run_simulation(
    sn: SubstrateNetwork,
    workload: Sequence[VnRequest],
    algorithm: str,
    p: EmbedParams,
    horizon: int,
    sample_interval: int = 1000,
    observer: Optional[Observer] = None,
) -> SimReport:
    """Replay *workload* on *sn* (mutated in place) and sample the metrics.

    Samples are taken at ``0, sample_interval, ...`` up to and including
    *horizon*, after the events at that timestamp. *observer*, if given, is
    called at each sample with ``(time, sn, active)`` where ``active`` maps
    request id to ``(request, map)`` for every currently embedded request.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")
    embed = ALGORITHMS[algorithm]
    arrivals = [r.arrival for r in workload]
    if any(b < a for a, b in zip(arrivals, arrivals[1:])):
        raise ValueError("workload must be sorted by arrival")
    if workload and workload[-1].arrival > horizon:
        logger.warning("horizon %d precedes last arrival %d; truncating", horizon, workload[-1].arrival)

    by_id = {r.id: r for r in workload}
    events = [SimEvent(r.arrival, ARRIVAL, r.id) for r in workload if r.arrival <= horizon]
    heapq.heapify(events)
    sample_times = list(range(0, horizon + 1, sample_interval))
    if sample_times[-1] != horizon:
        sample_times.append(horizon)

    report = SimReport(algorithm, horizon)
    active: dict[int, tuple[VnRequest, EmbeddingMap]] = {}
    rate_rev = ZERO
    rate_cost = ZERO
    acc_rev = ZERO
    acc_cost = ZERO
    clock = 0
    offered = accepted = 0
    records: dict[int, RequestRecord] = {}

    def advance(t: int) -> None:
        nonlocal clock, acc_rev, acc_cost
        acc_rev += rate_rev * (t - clock)
        acc_cost += rate_cost * (t - clock)
        clock = t

    for t in sample_times:
        while events and events[0].time <= t:
            ev = heapq.heappop(events)
            advance(ev.time)
            req = by_id[ev.vnr_id]
            if ev.kind == DEPARTURE:
                _, m = active.pop(req.id)
                release(sn, req.graph, m)
                rate_rev -= revenue(req)
                rate_cost -= cost(req, m)
                continue
            offered += 1
            outcome = embed(req.graph, sn, p)
            rec = RequestRecord(req.id, req.arrival, req.lifetime, False, revenue(req), ZERO,
                                outcome.backtrack_count)
            if outcome.success:
                allocate(sn, req.graph, outcome.mapping, p)
                active[req.id] = (req, outcome.mapping)
                accepted += 1
                rec.accepted = True
                rec.cost = cost(req, outcome.mapping)
                rate_rev += rec.revenue
                rate_cost += rec.cost
                heapq.heappush(events, SimEvent(req.departure, DEPARTURE, req.id))
            records[req.id] = rec
        advance(t)
        report.samples.append(Sample(t, offered, accepted, acc_rev, acc_cost))
        if observer is not None:
            observer(t, sn, active)

    report.requests = [records[r.id] for r in workload if r.id in records]
    return report


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _accrued(report: SimReport, t: int) -> tuple[Decimal, Decimal]:
    """Revenue-time and cost-time accumulated over [0, t), from the request log."""
    rev = ZERO
    cst = ZERO
    for r in report.requests:
        if not r.accepted:
            continue
        alive = min(r.lifetime, t - r.arrival)
        if alive > 0:
            rev += r.revenue * alive
            cst += r.cost * alive
    return rev, cst


def _check_time(report: SimReport, t: int) -> None:
    if t > report.horizon or t < 0:
        raise ValueError(f"time {t} outside [0, {report.horizon}]")


def acceptance_ratio(report: SimReport, t: int) -> float:
    """Accepted over offered among requests arrived by *t*; 1 when none arrived."""
    _check_time(report, t)
    arrived = [r for r in report.requests if r.arrival <= t]
    if not arrived:
        return 1.0
    return sum(r.accepted for r in arrived) / len(arrived)


def average_revenue(report: SimReport, t: int) -> float:
    _check_time(report, t)
    if t == 0:
        return 0.0
    return float(_accrued(report, t)[0] / t)


def average_cost(report: SimReport, t: int) -> float:
    _check_time(report, t)
    if t == 0:
        return 0.0
    return float(_accrued(report, t)[1] / t)


def revenue_cost_ratio(report: SimReport, t: int) -> float:
    _check_time(report, t)
    rev, cst = _accrued(report, t)
    if cst == 0:
        return 1.0
    return float(rev / cst)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(value: Decimal) -> str:
    return str(value.quantize(_Q))


def sample_row(s: Sample) -> list[str]:
    ratio = Decimal(1) if s.offered == 0 else Decimal(s.accepted) / Decimal(s.offered)
    avg_rev = ZERO if s.time == 0 else s.revenue / s.time
    avg_cost = ZERO if s.time == 0 else s.cost / s.time
    rc = Decimal(1) if s.cost == 0 else s.revenue / s.cost
    return [str(s.time), str(s.offered), str(s.accepted), _fmt(ratio), _fmt(avg_rev), _fmt(avg_cost), _fmt(rc)]


def format_report_csv(report: SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for s in report.samples:
        w.writerow(sample_row(s))
    return buf.getvalue()


def format_request_log(report: SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REQUEST_HEADER)
    for r in report.requests:
        w.writerow([r.vnr_id, r.arrival, r.lifetime, int(r.accepted), r.revenue, r.cost, r.backtracks])
    return buf.getvalue()


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    try:
        with open(tmp, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_report_csv(report: SimReport, path) -> None:
    _write_atomic(Path(path), format_report_csv(report))


def write_request_log(report: SimReport, path) -> None:
    _write_atomic(Path(path), format_request_log(report))


def read_report_csv(path) -> list[dict[str, float]]:
    """Parse a report CSV back into rows of floats (``time`` and counts as ints)."""
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REPORT_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for rec in reader:
            row = {c: float(rec[c]) for c in REPORT_HEADER}
            for c in ("time", "offered", "accepted"):
                row[c] = int(rec[c])
            rows.append(row)
    return rows
