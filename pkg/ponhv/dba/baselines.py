"""
Stateless strict-priority merging engine, the baseline for the hypervisor.

Type1 beats Type2 beats best effort, then earlier requested start, then
flow id. No breach history is consulted.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from typing import Callable, Optional

from . import metrics
from .core import (
    AllocationRequest,
    FrameConfig,
    Grant,
    PhysicalBMap,
    VirtualBMap,
    compute_maxtime,
    frame_index_of,
)
from .metrics import FrameReport, flow_frame_stats
from .timeline import Timeline

logger = logging.getLogger("ponhv.baselines")


def _class_order(a: AllocationRequest):
    return (a.sla.sla_type.rank, a.requested_start, a.flow_id, a.vno_id)


def merge_frame_stateless(vbmaps: Sequence[VirtualBMap], cfg: FrameConfig,
                          carryover: Sequence[AllocationRequest] = (),
                          frame_index: Optional[int] = None,
                          clock: Callable[[], int] = time.perf_counter_ns):
    """Merge one frame by fixed class priority. Returns ``(bmap, report)``."""
    index = frame_index_of(vbmaps, default=frame_index or 0)
    started = clock()
    requests = [a for vb in vbmaps for a in vb.allocations]
    requests.extend(carryover)
    requests.sort(key=_class_order)
    timeline = Timeline(cfg.guard_words)
    grants = []
    for a in requests:
        start = timeline.first_fit(a.size_words, a.requested_start, compute_maxtime(a, cfg))
        if start is None:
            grants.append(Grant.rejected(a))
        else:
            timeline.insert(start, a.size_words)
            grants.append(Grant.placed(a, start))
    elapsed = (clock() - started) / 1e9
    bmap = PhysicalBMap.from_grants(index, grants)
    return bmap, metrics.frame_report(bmap, flow_frame_stats(grants), elapsed)


class StatelessScheduler:
    label = "stateless"

    def __init__(self, cfg: FrameConfig, carryover: bool = False):
        self.cfg = cfg
        self.carryover = carryover
        self._carried: tuple[AllocationRequest, ...] = ()

    def merge(self, vbmaps: Sequence[VirtualBMap], frame_index: Optional[int] = None,
              clock: Callable[[], int] = time.perf_counter_ns) -> tuple[PhysicalBMap, FrameReport]:
        bmap, report = merge_frame_stateless(vbmaps, self.cfg, self._carried, frame_index, clock)
        if self.carryover:
            self._carried = tuple(g.carried_over(bmap.frame_index) for g in bmap.dropped)
        if report.dropped_count:
            logger.debug("Frame %d: %d allocations dropped", bmap.frame_index, report.dropped_count)
        return bmap, report
