"""
Stateful SLA-aware merging engine.

Each frame the hypervisor receives one virtual bandwidth map per VNO and
builds a single collision-free physical bandwidth map:

1. compute every allocation's maxtime (latest start still inside its
   latency target and the frame);
2. place every allocation that collides with nothing at its requested
   start;
3. sort the colliding allocations by priority (breach headroom, then
   maxtime, then size) and give each the earliest free start between its
   requested start and its maxtime, dropping those that do not fit;
4. recount per-flow delayed bursts and update the flow-breach table that
   drives the priority of the next frame.

Headroom is ``allowed_noncompliance - observed_rate`` over the flow's whole
history, so flows that are closer to breaching their SLA go first. For a
flow without history this is its allowed non-compliance rate.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, NamedTuple, Optional

from . import metrics
from .core import (
    AllocationRequest,
    FrameConfig,
    Grant,
    PhysicalBMap,
    SlaClass,
    VirtualBMap,
    compute_maxtime,
    frame_index_of,
)
from .exceptions import UsageError
from .metrics import FrameReport, flow_tally, stats_from_tally
from .timeline import Timeline

logger = logging.getLogger("ponhv.hypervisor")


@dataclass(frozen=True, slots=True)
class FlowBreachRecord:
    flow_id: str
    sla: SlaClass
    cum_total: int = 0
    cum_delayed: int = 0
    # Frames in which the flow's delayed share exceeded its budget.
    flow_breach_frames: int = 0

    @property
    def observed_rate(self) -> float:
        return self.cum_delayed / self.cum_total if self.cum_total else 0.0

    @property
    def headroom(self) -> float:
        return self.sla.allowed_noncompliance - self.observed_rate


@dataclass(frozen=True)
class FlowBreachTable:
    """Flow-breach likelihood table. Records are never removed within a run."""

    records: Mapping[str, FlowBreachRecord] = field(
        default_factory=lambda: MappingProxyType({})
    )

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, flow_id) -> bool:
        return flow_id in self.records

    def __getitem__(self, flow_id: str) -> FlowBreachRecord:
        return self.records[flow_id]

    def headroom(self, flow_id: str, sla: SlaClass) -> float:
        record = self.records.get(flow_id)
        if record is None:
            return sla.allowed_noncompliance
        return record.headroom


def init_sla_table(flows: Iterable[tuple[str, SlaClass]]) -> FlowBreachTable:
    """A table with zeroed counters for each (flow_id, SlaClass) pair."""
    records = {}
    for flow_id, sla in flows:
        if flow_id in records:
            raise UsageError("Flow %s registered twice." % flow_id)
        records[flow_id] = FlowBreachRecord(flow_id, sla)
    return FlowBreachTable(MappingProxyType(records))


class PriorityKey(NamedTuple):
    headroom: float
    maxtime: int
    size_words: int
    flow_id: str
    # Tie-breaks after flow_id so equal keys stay deterministic.
    requested_start: int
    vno_id: int


def priority_key(a: AllocationRequest, table: FlowBreachTable, cfg: FrameConfig) -> PriorityKey:
    return PriorityKey(
        table.headroom(a.flow_id, a.sla),
        compute_maxtime(a, cfg),
        a.size_words,
        a.flow_id,
        a.requested_start,
        a.vno_id,
    )


@dataclass
class Placement:
    """Busy intervals of the frame plus the grants decided so far."""

    timeline: Timeline
    grants: list[Grant] = field(default_factory=list)

    @classmethod
    def empty(cls, cfg: FrameConfig) -> Placement:
        return cls(Timeline(cfg.guard_words))

    def place(self, a: AllocationRequest, start: int) -> None:
        self.timeline.insert(start, a.size_words)
        self.grants.append(Grant.placed(a, start))


def split_collisions(requests: Sequence[AllocationRequest], guard_words: int):
    """
    Partition requests into those that collide with no other request
    (guard included) and those that collide with at least one.
    """
    clear: list[AllocationRequest] = []
    colliding: list[AllocationRequest] = []
    if not requests:
        return clear, colliding
    ordered = sorted(requests, key=_by_start)
    first = ordered[0]
    cluster = [first]
    reach = first.requested_start + first.size_words + guard_words
    for a in ordered[1:]:
        start = a.requested_start
        if start < reach:
            cluster.append(a)
            end = start + a.size_words + guard_words
            if end > reach:
                reach = end
            continue
        (clear if len(cluster) == 1 else colliding).extend(cluster)
        cluster = [a]
        reach = start + a.size_words + guard_words
    (clear if len(cluster) == 1 else colliding).extend(cluster)
    return clear, colliding


def initial_placement(requests: Sequence[AllocationRequest], cfg: FrameConfig):
    """Place collision-free requests where their vBMaps put them; return the rest."""
    placement = Placement.empty(cfg)
    clear, colliding = split_collisions(requests, cfg.guard_words)
    for a in clear:
        placement.place(a, a.requested_start)
    return placement, colliding


def resolve_collisions(placed: Placement, pending: Iterable[AllocationRequest],
                       table: FlowBreachTable, cfg: FrameConfig) -> Placement:
    """
    Give each pending allocation, best priority first, the earliest start in
    [requested_start, maxtime] that is free of every grant already placed.
    Allocations with no such start are dropped. Best effort always comes
    after SLA traffic. ``placed`` is updated in place and returned.

    The order is the one of ``(is_best_effort, priority_key)``, built here
    as flat tuples with the headroom looked up once per flow.
    """
    headroom: dict[str, float] = {}
    keyed = []
    for i, a in enumerate(pending):
        h = headroom.get(a.flow_id)
        if h is None:
            h = headroom[a.flow_id] = table.headroom(a.flow_id, a.sla)
        keyed.append((a.sla.latency_target_words is None, h, compute_maxtime(a, cfg),
                      a.size_words, a.flow_id, a.requested_start, a.vno_id, i, a))
    # The index is unique, so comparison never reaches the request itself.
    keyed.sort()
    timeline = placed.timeline
    first_fit, insert = timeline.first_fit, timeline.insert
    grants = placed.grants
    for key in keyed:
        a = key[-1]
        maxtime = key[2]
        start = first_fit(a.size_words, a.requested_start, maxtime)
        if start is None:
            grants.append(Grant.rejected(a))
            logger.debug("Dropped %s@%d (maxtime %d)", a.flow_id, a.requested_start, maxtime)
        else:
            insert(start, a.size_words)
            grants.append(Grant.placed(a, start))
    return placed


def _by_start(a: AllocationRequest) -> int:
    return a.requested_start


def fold_tally(table: FlowBreachTable, tally: Mapping[str, list]) -> FlowBreachTable:
    """A new table with one frame's ``flow_tally`` added to the counters."""
    if not tally:
        return table
    records = dict(table.records)
    for flow_id, (sla, total, late) in tally.items():
        record = records.get(flow_id)
        if record is None:
            record = FlowBreachRecord(flow_id, sla)
        records[flow_id] = FlowBreachRecord(
            flow_id,
            record.sla,
            record.cum_total + total,
            record.cum_delayed + late,
            record.flow_breach_frames + (late / total > sla.allowed_noncompliance),
        )
    return FlowBreachTable(MappingProxyType(records))


def update_flow_table(table: FlowBreachTable, grants: Iterable[Grant],
                      cfg: Optional[FrameConfig] = None):
    """
    Fold one frame's grants into the table. Returns the new table and the
    per-flow statistics of the frame.
    """
    tally = flow_tally(grants)
    return fold_tally(table, tally), stats_from_tally(tally)


def merge_frame(vbmaps: Sequence[VirtualBMap], table: FlowBreachTable, cfg: FrameConfig,
                carryover: Sequence[AllocationRequest] = (), frame_index: Optional[int] = None,
                clock: Callable[[], int] = time.perf_counter_ns):
    """
    Merge one frame's vBMaps into a PhysicalBMap.

    Returns ``(bmap, table, report)``. ``carryover`` holds allocations dropped
    in the previous frame and re-injected at word 0; they always go through
    collision resolution.
    """
    index = frame_index_of(vbmaps, default=frame_index or 0)
    started = clock()
    requests = [a for vb in vbmaps for a in vb.allocations]
    placement, colliding = initial_placement(requests, cfg)
    colliding.extend(carryover)
    resolve_collisions(placement, colliding, table, cfg)
    grants = placement.grants
    tally = flow_tally(grants)
    table = fold_tally(table, tally)
    elapsed = (clock() - started) / 1e9
    bmap = PhysicalBMap.from_grants(index, grants)
    return bmap, table, metrics.frame_report(bmap, stats_from_tally(tally), elapsed)


class StatefulHypervisor:
    """Owns one flow-breach table and merges successive frames with it."""

    label = "heuristic"

    def __init__(self, cfg: FrameConfig, flows: Iterable[tuple[str, SlaClass]] = (),
                 carryover: bool = False):
        self.cfg = cfg
        self.table = init_sla_table(flows)
        self.carryover = carryover
        self._carried: tuple[AllocationRequest, ...] = ()

    def merge(self, vbmaps: Sequence[VirtualBMap], frame_index: Optional[int] = None,
              clock: Callable[[], int] = time.perf_counter_ns) -> tuple[PhysicalBMap, FrameReport]:
        bmap, self.table, report = merge_frame(
            vbmaps, self.table, self.cfg, self._carried, frame_index, clock
        )
        if self.carryover:
            self._carried = tuple(g.carried_over(bmap.frame_index) for g in bmap.dropped)
        if report.dropped_count:
            logger.debug("Frame %d: %d allocations dropped", bmap.frame_index, report.dropped_count)
        return bmap, report
