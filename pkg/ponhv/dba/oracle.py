"""
Exact minimiser of flow-level SLA breaches for a single frame.

Every allocation either starts somewhere in [requested_start, maxtime] or
is dropped, grants keep the guard interval between each other and stay
inside the frame, a burst is breached when it is dropped or starts later
than its latency target, and a flow is breached when its share of
breached bursts exceeds the allowed non-compliance. The objective is

    (flow breaches, packet breaches, dropped allocations, total delay)

compared lexicographically. Only the first term is the quantity being
minimised; the others pick one optimum reproducibly.

The search is a depth-first branch and bound over the order in which
grants appear in the frame. Each grant is left-justified against its
predecessor, so its start is always one of ``candidate_starts``. The
lower bound drops every allocation whose window has already closed and
charges the others the wait until the current frontier. A dominance rule
skips a grant when another pending burst would fit entirely in the idle
gap before it.
"""
from __future__ import annotations

import itertools
import logging
import time
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
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
from .exceptions import InstanceTooLarge
from .metrics import FrameReport, flow_frame_stats
from .timeline import Timeline

logger = logging.getLogger("ponhv.oracle")

DEFAULT_MAX_ALLOCATIONS = 12
DEFAULT_TIME_BUDGET_S = 10.0


@dataclass(frozen=True, slots=True)
class ExactLimits:
    max_allocations: int = DEFAULT_MAX_ALLOCATIONS
    time_budget_s: float = DEFAULT_TIME_BUDGET_S


@dataclass(frozen=True)
class ExactInstance:
    allocations: tuple[AllocationRequest, ...]
    cfg: FrameConfig = field(default_factory=FrameConfig)
    limits: ExactLimits = field(default_factory=ExactLimits)
    frame_index: int = 0

    @classmethod
    def from_vbmaps(cls, vbmaps: Sequence[VirtualBMap], cfg: FrameConfig,
                    limits: Optional[ExactLimits] = None,
                    carryover: Sequence[AllocationRequest] = (),
                    frame_index: Optional[int] = None) -> ExactInstance:
        allocations = tuple(a for vb in vbmaps for a in vb.allocations) + tuple(carryover)
        index = frame_index_of(vbmaps, default=frame_index or 0)
        return cls(allocations, cfg, limits or ExactLimits(), index)


@dataclass(frozen=True)
class ExactSolution:
    bmap: PhysicalBMap
    flow_breaches: int
    packet_breach_flags: Mapping[AllocationRequest, bool]
    proven_optimal: bool
    objective: tuple[int, int, int, int]
    nodes: int = 0


def candidate_starts(a: AllocationRequest, placed: Iterable[tuple[int, int]],
                     cfg: FrameConfig) -> list[int]:
    """
    Left-justified start candidates for ``a`` given (start, size) pairs of
    grants already placed: its requested start, plus every placed grant's
    end + guard that falls inside ``a``'s window.
    """
    maxtime = compute_maxtime(a, cfg)
    found = {a.requested_start}
    for start, size in placed:
        t = start + size + cfg.guard_words
        if a.requested_start <= t <= maxtime:
            found.add(t)
    return sorted(found)


class _OutOfTime(Exception):
    pass


class _Problem:
    """Arrays describing one instance, indexed like ``allocations``."""

    def __init__(self, allocations: Sequence[AllocationRequest], cfg: FrameConfig):
        self.allocations = allocations
        self.cfg = cfg
        self.guard = cfg.guard_words
        self.release = [a.requested_start for a in allocations]
        self.maxtime = [compute_maxtime(a, cfg) for a in allocations]
        self.size = [a.size_words for a in allocations]
        self.target = [a.sla.latency_target_words for a in allocations]
        flows = sorted({a.flow_id for a in allocations})
        flow_index = {f: k for k, f in enumerate(flows)}
        self.flow = [flow_index[a.flow_id] for a in allocations]
        totals = [0] * len(flows)
        allowed = [1.0] * len(flows)
        for a, f in zip(allocations, self.flow):
            totals[f] += 1
            allowed[f] = a.sla.allowed_noncompliance
        # Largest breached count a flow can absorb without a flow-level breach.
        self.tolerance = [
            max(d for d in range(total + 1) if not d / total > budget)
            for total, budget in zip(totals, allowed)
        ]
        self.sla = [t is not None for t in self.target]

    def __len__(self):
        return len(self.allocations)

    def breached(self, i: int, start: Optional[int]) -> bool:
        if not self.sla[i]:
            return False
        return start is None or start - self.release[i] > self.target[i]

    def objective(self, starts: Sequence[Optional[int]]) -> tuple[int, int, int, int]:
        per_flow = [0] * len(self.tolerance)
        packet = dropped = delay = 0
        for i, s in enumerate(starts):
            if self.breached(i, s):
                per_flow[self.flow[i]] += 1
                packet += 1
            if s is None:
                dropped += 1
            else:
                delay += s - self.release[i]
        flows = sum(1 for f, n in enumerate(per_flow) if n > self.tolerance[f])
        return flows, packet, dropped, delay

    def bound(self, dead: Iterable[int], delay: int) -> tuple[int, int, int, int]:
        """Objective of dropping ``dead`` and scheduling the rest on time."""
        per_flow = [0] * len(self.tolerance)
        packet = dropped = 0
        for i in dead:
            dropped += 1
            if self.sla[i]:
                per_flow[self.flow[i]] += 1
                packet += 1
        flows = sum(1 for f, n in enumerate(per_flow) if n > self.tolerance[f])
        return flows, packet, dropped, delay

    def greedy(self) -> list[Optional[int]]:
        """Earliest-deadline first fit, used as the first incumbent."""
        timeline = Timeline(self.guard)
        starts: list[Optional[int]] = [None] * len(self)
        order = sorted(range(len(self)), key=lambda i: (self.maxtime[i], self.release[i], i))
        for i in order:
            s = timeline.first_fit(self.size[i], self.release[i], self.maxtime[i])
            if s is not None:
                timeline.insert(s, self.size[i])
                starts[i] = s
        return starts


class _Search:
    def __init__(self, problem: _Problem, deadline: float):
        self.p = problem
        self.deadline = deadline
        self.nodes = 0
        self.best_starts = problem.greedy()
        self.best = problem.objective(self.best_starts)
        self.starts: list[Optional[int]] = [None] * len(problem)

    def run(self) -> bool:
        """Explore the tree; False when the time budget ran out first."""
        p = self.p
        order = sorted(range(len(p)), key=lambda i: (p.release[i], p.maxtime[i], p.size[i], i))
        try:
            self._visit(order, 0, 0)
        except _OutOfTime:
            return False
        return True

    def _visit(self, remaining: list[int], frontier: int, delay: int) -> None:
        self.nodes += 1
        if not self.nodes & 1023 and time.perf_counter() > self.deadline:
            raise _OutOfTime
        p = self.p
        live = []
        dead = []
        for i in remaining:
            (dead if p.maxtime[i] < frontier else live).append(i)
        earliest = {i: max(p.release[i], frontier) for i in live}
        flows, packets, dropped, _ = p.bound(dead, delay)
        # Completions that schedule every live burst wait at least until the
        # frontier; the others drop one more burst.
        waiting = delay + sum(earliest[i] - p.release[i] for i in live)
        if (flows, packets, dropped, waiting) >= self.best and (
            not live or (flows, packets, dropped + 1, 0) >= self.best
        ):
            return
        # Leaf: nothing else scheduled.
        value = p.bound(remaining, delay)
        if value < self.best:
            self.best = value
            self.best_starts = list(self.starts)
        for i in sorted(live, key=lambda i: (earliest[i], p.maxtime[i], i)):
            s = earliest[i]
            if any(j != i and earliest[j] + p.size[j] + p.guard <= s for j in live):
                continue
            self.starts[i] = s
            self._visit([k for k in remaining if k != i], s + p.size[i] + p.guard,
                        delay + s - p.release[i])
            self.starts[i] = None


def _solution(problem: _Problem, starts: Sequence[Optional[int]], frame_index: int,
              proven: bool, nodes: int = 0) -> ExactSolution:
    grants = []
    flags = {}
    for i, a in enumerate(problem.allocations):
        s = starts[i]
        grants.append(Grant.rejected(a) if s is None else Grant.placed(a, s))
        flags[a] = problem.breached(i, s)
    objective = problem.objective(starts)
    return ExactSolution(
        bmap=PhysicalBMap.from_grants(frame_index, grants),
        flow_breaches=objective[0],
        packet_breach_flags=flags,
        proven_optimal=proven,
        objective=objective,
        nodes=nodes,
    )


def solve_exact(inst: ExactInstance) -> ExactSolution:
    """Minimise flow-level breaches of one frame by branch and bound."""
    n = len(inst.allocations)
    if n > inst.limits.max_allocations:
        raise InstanceTooLarge(n, inst.limits.max_allocations)
    for a in inst.allocations:
        a.check(inst.cfg)
    problem = _Problem(inst.allocations, inst.cfg)
    search = _Search(problem, time.perf_counter() + inst.limits.time_budget_s)
    proven = search.run()
    if not proven:
        logger.warning(
            "Frame %d: exact search hit its %.1fs budget after %d nodes, returning incumbent",
            inst.frame_index, inst.limits.time_budget_s, search.nodes,
        )
    return _solution(problem, search.best_starts, inst.frame_index, proven, search.nodes)


def _compatible(start: int, size: int, placed: Sequence[tuple[int, int]], guard: int) -> bool:
    end = start + size
    return all(end + guard <= s or start >= s + n + guard for s, n in placed)


def brute_force_schedule(inst: ExactInstance, every_word: bool = False):
    """
    Plain enumeration without bounds, for checking ``solve_exact`` on small
    instances. By default each allocation, taken in every possible order,
    tries each feasible ``candidate_starts`` value or a drop; with
    ``every_word`` it tries every word of its window instead.

    Returns ``(objective, starts)`` with starts aligned to ``inst.allocations``.
    """
    problem = _Problem(inst.allocations, inst.cfg)
    n = len(problem)
    guard = inst.cfg.guard_words
    best: list = [None, None]
    starts: list[Optional[int]] = [None] * n

    def options(i: int, placed) -> list[int]:
        if every_word:
            window = range(problem.release[i], problem.maxtime[i] + 1)
        else:
            window = candidate_starts(problem.allocations[i], placed, inst.cfg)
        return [s for s in window if _compatible(s, problem.size[i], placed, guard)]

    def extend(order: Sequence[int], k: int, placed: list[tuple[int, int]]) -> None:
        if k == len(order):
            value = problem.objective(starts)
            if best[0] is None or value < best[0]:
                best[0], best[1] = value, tuple(starts)
            return
        i = order[k]
        for s in options(i, placed) + [None]:
            starts[i] = s
            if s is None:
                extend(order, k + 1, placed)
            else:
                extend(order, k + 1, placed + [(s, problem.size[i])])
        starts[i] = None

    orders = [range(n)] if every_word else itertools.permutations(range(n))
    for order in orders:
        extend(tuple(order), 0, [])
    return best[0], best[1]


class ExactScheduler:
    """Per-frame oracle with the same surface as the heuristic schedulers."""

    label = "exact"

    def __init__(self, cfg: FrameConfig, limits: Optional[ExactLimits] = None,
                 carryover: bool = False):
        self.cfg = cfg
        self.limits = limits or ExactLimits()
        self.carryover = carryover
        self._carried: tuple[AllocationRequest, ...] = ()

    def merge(self, vbmaps: Sequence[VirtualBMap], frame_index: Optional[int] = None,
              clock: Callable[[], int] = time.perf_counter_ns) -> tuple[PhysicalBMap, FrameReport]:
        inst = ExactInstance.from_vbmaps(vbmaps, self.cfg, self.limits, self._carried, frame_index)
        started = clock()
        solution = solve_exact(inst)
        elapsed = (clock() - started) / 1e9
        bmap = solution.bmap
        if self.carryover:
            self._carried = tuple(g.carried_over(bmap.frame_index) for g in bmap.dropped)
        return bmap, metrics.frame_report(bmap, flow_frame_stats(bmap.grants), elapsed)
