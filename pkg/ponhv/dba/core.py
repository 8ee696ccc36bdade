"""
Domain model shared by every scheduler: frames, SLA classes, allocation
requests, virtual and physical bandwidth maps.

Time inside a frame is counted in 4-byte words. A frame of 125 us carries
``capacity_words`` words and consecutive upstream bursts must be separated
by ``guard_words`` idle words.
"""
from __future__ import annotations

import enum
import functools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional

from .exceptions import InstanceError, UsageError

FRAME_DURATION_US = 125.0

# ~9.95 Gb/s upstream over 125 us, ~0.1 us guard.
DEFAULT_CAPACITY_WORDS = 38_880
DEFAULT_GUARD_WORDS = 31

TYPE1_LATENCY_US = 12.5
TYPE2_LATENCY_US = 25.0


@dataclass(frozen=True, slots=True)
class FrameConfig:
    capacity_words: int = DEFAULT_CAPACITY_WORDS
    guard_words: int = DEFAULT_GUARD_WORDS
    frame_duration_us: float = FRAME_DURATION_US

    def __post_init__(self):
        if self.capacity_words <= 0:
            raise ValueError("capacity_words must be positive, got %r" % self.capacity_words)
        if not 0 <= self.guard_words < self.capacity_words:
            raise ValueError(
                "guard_words must be in [0, capacity_words), got %r" % self.guard_words
            )
        if self.frame_duration_us <= 0:
            raise ValueError("frame_duration_us must be positive")

    @property
    def word_duration_us(self) -> float:
        return self.frame_duration_us / self.capacity_words


def words_from_time(t_us: float, cfg: FrameConfig) -> int:
    """Convert a duration in microseconds to whole words."""
    if t_us < 0:
        raise ValueError("Negative duration: %r" % t_us)
    return round(t_us / cfg.word_duration_us)


def time_from_words(words: int, cfg: FrameConfig) -> float:
    """Convert a word count to microseconds."""
    return words * cfg.word_duration_us


class SlaType(str, enum.Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    BEST_EFFORT = "best_effort"

    @property
    def rank(self) -> int:
        """Fixed class priority used by the stateless baseline (lower wins)."""
        return _SLA_RANK[self]


_SLA_RANK = {SlaType.TYPE1: 0, SlaType.TYPE2: 1, SlaType.BEST_EFFORT: 2}

SLA_TYPES = (SlaType.TYPE1, SlaType.TYPE2)


@dataclass(frozen=True, slots=True)
class SlaClass:
    """
    Packet and flow level breach rules of one service class.

    A burst is breached at packet level when it starts more than
    ``latency_target_words`` after its requested start (or is dropped).
    A flow is breached in a frame when the fraction of its breached
    bursts exceeds ``allowed_noncompliance``.
    """

    sla_type: SlaType
    latency_target_words: Optional[int]
    allowed_noncompliance: float

    def __post_init__(self):
        if not 0.0 <= self.allowed_noncompliance <= 1.0:
            raise ValueError(
                "allowed_noncompliance must be within [0, 1], got %r"
                % self.allowed_noncompliance
            )
        if self.latency_target_words is None and self.sla_type is not SlaType.BEST_EFFORT:
            raise ValueError("%s requires a latency target" % self.sla_type.value)

    @property
    def is_best_effort(self) -> bool:
        return self.latency_target_words is None


@functools.lru_cache(maxsize=32)
def sla_classes(cfg: FrameConfig) -> dict[SlaType, SlaClass]:
    """The two SLA classes and best effort, with latency targets in words of ``cfg``."""
    return {
        SlaType.TYPE1: SlaClass(SlaType.TYPE1, words_from_time(TYPE1_LATENCY_US, cfg), 0.05),
        SlaType.TYPE2: SlaClass(SlaType.TYPE2, words_from_time(TYPE2_LATENCY_US, cfg), 0.10),
        SlaType.BEST_EFFORT: SlaClass(SlaType.BEST_EFFORT, None, 1.0),
    }


@dataclass(frozen=True, slots=True)
class AllocationRequest:
    """One upstream burst requested by a VNO's virtual bandwidth map."""

    vno_id: int
    flow_id: str
    requested_start: int
    size_words: int
    sla: SlaClass
    # (frame_index, requested_start) of the first request when re-injected.
    carried_from: Optional[tuple[int, int]] = None

    @property
    def end(self) -> int:
        return self.requested_start + self.size_words

    @property
    def key(self) -> tuple:
        return (self.vno_id, self.flow_id, self.requested_start, self.carried_from)

    def check(self, cfg: FrameConfig) -> None:
        if self.size_words <= 0:
            raise InstanceError("Allocation of flow %s has no size." % self.flow_id)
        if self.size_words > cfg.capacity_words:
            raise InstanceError(
                "Burst of %d words for flow %s does not fit a %d-word frame."
                % (self.size_words, self.flow_id, cfg.capacity_words)
            )
        if self.requested_start < 0 or self.end > cfg.capacity_words:
            raise InstanceError(
                "Allocation of flow %s at word %d with %d words falls outside the frame."
                % (self.flow_id, self.requested_start, self.size_words)
            )


def compute_maxtime(a: AllocationRequest, cfg: FrameConfig) -> int:
    """
    Latest start that keeps ``a`` within its packet latency target and
    inside the frame. Best effort bursts are bounded by the frame end only.
    """
    last_fit = cfg.capacity_words - a.size_words
    if last_fit < 0:
        raise InstanceError(
            "Burst of %d words for flow %s is larger than the frame."
            % (a.size_words, a.flow_id)
        )
    target = a.sla.latency_target_words
    if target is None:
        return last_fit
    return min(a.requested_start + target, last_fit)


@dataclass(frozen=True, slots=True)
class Grant:
    """Outcome of one allocation request in the physical bandwidth map."""

    flow_id: str
    vno_id: int
    start: Optional[int]
    size_words: int
    origin_requested_start: int
    sla: SlaClass
    delayed: bool
    dropped: bool
    carried_from: Optional[tuple[int, int]] = None

    @classmethod
    def placed(cls, a: AllocationRequest, start: int) -> Grant:
        sla = a.sla
        target = sla.latency_target_words
        delayed = target is not None and start - a.requested_start > target
        return cls(a.flow_id, a.vno_id, start, a.size_words, a.requested_start, sla, delayed,
                   False, a.carried_from)

    @classmethod
    def rejected(cls, a: AllocationRequest) -> Grant:
        return cls(
            flow_id=a.flow_id,
            vno_id=a.vno_id,
            start=None,
            size_words=a.size_words,
            origin_requested_start=a.requested_start,
            sla=a.sla,
            delayed=not a.sla.is_best_effort,
            dropped=True,
            carried_from=a.carried_from,
        )

    @property
    def end(self) -> Optional[int]:
        return None if self.start is None else self.start + self.size_words

    @property
    def delay(self) -> Optional[int]:
        return None if self.start is None else self.start - self.origin_requested_start

    @property
    def key(self) -> tuple:
        return (self.vno_id, self.flow_id, self.origin_requested_start, self.carried_from)

    def carried_over(self, frame_index: int) -> AllocationRequest:
        """The request re-injected at the start of the next frame."""
        return AllocationRequest(
            vno_id=self.vno_id,
            flow_id=self.flow_id,
            requested_start=0,
            size_words=self.size_words,
            sla=self.sla,
            carried_from=self.carried_from or (frame_index, self.origin_requested_start),
        )


@dataclass(frozen=True, slots=True)
class Violation:
    kind: str
    message: str


def _spacing_violations(intervals, guard_words):
    """Overlap and guard checks over (start, end, label) triples sorted by start."""
    found = []
    for (_, g_end, g_label), (h_start, _, h_label) in zip(intervals, intervals[1:]):
        if h_start < g_end:
            found.append(Violation("overlap", "%s overlaps %s" % (h_label, g_label)))
        elif h_start < g_end + guard_words:
            found.append(
                Violation(
                    "guard",
                    "%s starts %d words after %s, guard is %d"
                    % (h_label, h_start - g_end, g_label, guard_words),
                )
            )
    return found


@dataclass(frozen=True, slots=True)
class VirtualBMap:
    """One VNO's proposed allocations for a frame."""

    vno_id: int
    frame_index: int
    allocations: tuple[AllocationRequest, ...] = ()

    def violations(self, cfg: FrameConfig) -> list[Violation]:
        found = []
        for a in self.allocations:
            if a.vno_id != self.vno_id:
                found.append(
                    Violation("vno", "flow %s carries vno %d in vBMap of vno %d"
                              % (a.flow_id, a.vno_id, self.vno_id))
                )
            try:
                a.check(cfg)
            except InstanceError as exc:
                found.append(Violation("bounds", str(exc)))
        ordered = sorted(
            (a.requested_start, a.end, "%s@%d" % (a.flow_id, a.requested_start))
            for a in self.allocations
        )
        found.extend(_spacing_violations(ordered, cfg.guard_words))
        return found


@dataclass(frozen=True, slots=True)
class PhysicalBMap:
    """
    The merged bandwidth map of one frame. Scheduled grants come first,
    sorted by start; dropped grants follow.
    """

    frame_index: int
    grants: tuple[Grant, ...] = ()

    @classmethod
    def from_grants(cls, frame_index: int, grants: Iterable[Grant]) -> PhysicalBMap:
        scheduled = []
        dropped = []
        for g in grants:
            (dropped if g.dropped else scheduled).append(g)
        scheduled.sort(key=lambda g: (g.start, g.vno_id, g.flow_id))
        dropped.sort(key=lambda g: (g.vno_id, g.flow_id, g.origin_requested_start))
        return cls(frame_index, tuple(scheduled) + tuple(dropped))

    @property
    def scheduled(self) -> tuple[Grant, ...]:
        return tuple(g for g in self.grants if not g.dropped)

    @property
    def dropped(self) -> tuple[Grant, ...]:
        return tuple(g for g in self.grants if g.dropped)

    @property
    def scheduled_words(self) -> int:
        return sum(g.size_words for g in self.grants if not g.dropped)


def validate_physical_bmap(bmap: PhysicalBMap, cfg: FrameConfig) -> list[Violation]:
    """Every broken PhysicalBMap invariant; an empty list means the map is valid."""
    found = []
    seen = set()
    scheduled = []
    for g in bmap.grants:
        if g.key in seen:
            found.append(Violation("duplicate", "more than one grant for %r" % (g.key,)))
        seen.add(g.key)
        if g.dropped:
            continue
        label = "%s@%d" % (g.flow_id, g.start)
        if g.start < 0 or g.end > cfg.capacity_words:
            found.append(
                Violation("bounds", "%s ends at word %d outside [0, %d]"
                          % (label, g.end, cfg.capacity_words))
            )
        if g.start < g.origin_requested_start:
            found.append(
                Violation("early_start", "%s starts before its requested word %d"
                          % (label, g.origin_requested_start))
            )
        scheduled.append((g.start, g.end, label))
    if scheduled != sorted(scheduled):
        found.append(Violation("order", "scheduled grants are not sorted by start"))
        scheduled.sort()
    found.extend(_spacing_violations(scheduled, cfg.guard_words))
    return found


def frame_index_of(vbmaps: Sequence[VirtualBMap], default: int = 0) -> int:
    indices = {vb.frame_index for vb in vbmaps}
    if len(indices) > 1:
        raise UsageError("vBMaps from different frames: %s" % sorted(indices))
    return indices.pop() if indices else default
