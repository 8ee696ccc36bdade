"""
Breach accounting, compliance aggregation and merge-time profiling.

Compliance is counted per flow-frame: one flow in one frame is compliant
when its share of breached bursts stays within the SLA's allowed
non-compliance. ``compliance(type) = 1 - breached / total`` over all
flow-frames of that SLA type in a run.
"""
from __future__ import annotations

import time
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .core import SLA_TYPES, Grant, PhysicalBMap, SlaClass, SlaType
from .exceptions import EmptyRunError


@dataclass(frozen=True, slots=True)
class FlowFrameStats:
    sla: SlaClass
    total: int
    delayed: int
    flow_breach: bool

    @property
    def sla_type(self) -> SlaType:
        return self.sla.sla_type


def flow_tally(grants: Iterable[Grant]) -> dict[str, list]:
    """``flow_id -> [sla, total, delayed]`` for one frame; dropped bursts count as delayed."""
    tally: dict[str, list] = {}
    for g in grants:
        counts = tally.get(g.flow_id)
        if counts is None:
            counts = tally[g.flow_id] = [g.sla, 0, 0]
        counts[1] += 1
        if g.delayed:
            counts[2] += 1
    return tally


def stats_from_tally(tally: Mapping[str, list]) -> dict[str, FlowFrameStats]:
    return {
        flow_id: FlowFrameStats(sla, total, late, late / total > sla.allowed_noncompliance)
        for flow_id, (sla, total, late) in tally.items()
    }


def flow_frame_stats(grants: Iterable[Grant]) -> dict[str, FlowFrameStats]:
    """Per-flow totals for one frame; dropped bursts count as delayed."""
    return stats_from_tally(flow_tally(grants))


@dataclass(frozen=True, slots=True)
class FrameReport:
    frame_index: int
    flows: Mapping[str, FlowFrameStats]
    scheduled_words: int
    dropped_count: int
    # seconds
    merge_wall_time: float

    @property
    def merge_wall_time_us(self) -> float:
        return self.merge_wall_time * 1e6

    @property
    def flow_breaches(self) -> int:
        return sum(1 for s in self.flows.values() if s.flow_breach)


def frame_report(bmap: PhysicalBMap, flows: Mapping[str, FlowFrameStats],
                 merge_wall_time: float) -> FrameReport:
    return FrameReport(
        frame_index=bmap.frame_index,
        flows=flows,
        scheduled_words=bmap.scheduled_words,
        dropped_count=sum(1 for g in bmap.grants if g.dropped),
        merge_wall_time=merge_wall_time,
    )


@dataclass(frozen=True, slots=True)
class TimingSummary:
    samples: int
    mean_s: float
    p50_s: float
    p99_s: float
    cv: float

    @property
    def mean_us(self) -> float:
        return self.mean_s * 1e6

    @property
    def p50_us(self) -> float:
        return self.p50_s * 1e6

    @property
    def p99_us(self) -> float:
        return self.p99_s * 1e6


def summarize_timings(durations: Iterable[float]) -> Optional[TimingSummary]:
    samples = np.fromiter(durations, dtype=float)
    if samples.size == 0:
        return None
    mean = float(samples.mean())
    return TimingSummary(
        samples=int(samples.size),
        mean_s=mean,
        p50_s=float(np.percentile(samples, 50)),
        p99_s=float(np.percentile(samples, 99)),
        cv=float(samples.std() / mean) if mean > 0 else 0.0,
    )


@dataclass(frozen=True)
class SweepResult:
    scenario: Any
    scheduler: str
    compliance: Mapping[SlaType, float]
    flow_frames: Mapping[SlaType, int]
    timing: Optional[TimingSummary]
    frames: int
    # Frames actually merged when the oracle runs in sampled mode.
    sample_size: Optional[int] = None


def _compliance(breached: Mapping[SlaType, int], total: Mapping[SlaType, int]):
    # No flow-frames of a type means nothing was breached.
    return {
        t: (1.0 - breached[t] / total[t]) if total[t] else 1.0
        for t in SLA_TYPES
    }


def accumulate(reports: Iterable[FrameReport], scenario, scheduler: str = "heuristic",
               sample_size: Optional[int] = None) -> SweepResult:
    """Fold the frame reports of one (scenario, scheduler) run into a SweepResult."""
    total = {t: 0 for t in SLA_TYPES}
    breached = {t: 0 for t in SLA_TYPES}
    durations = []
    frames = 0
    for report in reports:
        frames += 1
        durations.append(report.merge_wall_time)
        for stats in report.flows.values():
            if stats.sla_type in total:
                total[stats.sla_type] += 1
                breached[stats.sla_type] += stats.flow_breach
    if not frames:
        raise EmptyRunError("No frame reports to accumulate for %s." % scheduler)
    return SweepResult(
        scenario=scenario,
        scheduler=scheduler,
        compliance=_compliance(breached, total),
        flow_frames=total,
        timing=summarize_timings(durations),
        frames=frames,
        sample_size=sample_size,
    )


def recompute_compliance(bmaps: Iterable[PhysicalBMap]) -> dict[SlaType, float]:
    """
    Compliance straight from the grants of each bandwidth map, without
    going through FrameReports. Used to cross-check ``accumulate``.
    """
    total = {t: 0 for t in SLA_TYPES}
    breached = {t: 0 for t in SLA_TYPES}
    for bmap in bmaps:
        per_flow = defaultdict(lambda: [0, 0, None])
        for g in bmap.grants:
            counts = per_flow[g.flow_id]
            counts[0] += 1
            counts[1] += g.dropped or (
                g.sla.latency_target_words is not None
                and g.start - g.origin_requested_start > g.sla.latency_target_words
            )
            counts[2] = g.sla
        for n, late, sla in per_flow.values():
            if sla.sla_type in total:
                total[sla.sla_type] += 1
                breached[sla.sla_type] += late / n > sla.allowed_noncompliance
    return _compliance(breached, total)


def time_merge(scheduler, vbmaps, frame_index: int = 0,
               clock: Callable[[], int] = time.perf_counter_ns) -> float:
    """
    Wall-clock seconds of one merge call of ``scheduler``. The clock is read
    around the scheduling work only, report objects are built afterwards.
    """
    _, report = scheduler.merge(vbmaps, frame_index=frame_index, clock=clock)
    return report.merge_wall_time


@dataclass
class MergeProfiler:
    """Collects merge durations, discarding the first ``warmup`` calls."""

    warmup: int = 100
    calls: int = 0
    samples: list[float] = field(default_factory=list)

    def record(self, duration: float) -> None:
        self.calls += 1
        if self.calls > self.warmup:
            self.samples.append(duration)

    def summary(self) -> Optional[TimingSummary]:
        return summarize_timings(self.samples)
