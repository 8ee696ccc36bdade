"""
Seeded synthetic workload: per-frame virtual bandwidth maps for a set of
VNOs with a given upstream load, SLA share and burst size.

Every VNO owns a fixed roster of flows, each bound to one service class
for the whole run. A frame is built by drawing the number of bursts that
reaches the load target, labelling them with service classes in the
configured proportions, and handing them out round-robin across VNOs.
Each burst gets a start drawn uniformly over the frame; when the draw
collides with the VNO's own map it is re-drawn a few times and finally
placed at the earliest free start.
"""
from __future__ import annotations

import enum
import logging
from collections.abc import Iterator, Mapping
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .core import (
    DEFAULT_CAPACITY_WORDS,
    DEFAULT_GUARD_WORDS,
    AllocationRequest,
    FrameConfig,
    SlaClass,
    SlaType,
    VirtualBMap,
    sla_classes,
)
from .exceptions import GenerationError
from .timeline import Timeline

logger = logging.getLogger("ponhv.trafficgen")

START_REDRAWS = 16


class BurstClass(str, enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"

    @property
    def bytes(self) -> int:
        return _BURST_BYTES[self]

    @property
    def words(self) -> int:
        return self.bytes // 4


_BURST_BYTES = {BurstClass.SMALL: 1300, BurstClass.MEDIUM: 4700, BurstClass.LARGE: 9500}


@dataclass(frozen=True)
class ScenarioConfig:
    num_vnos: int = 5
    load_fraction: float = 0.5
    sla_share: float = 0.5
    burst_class: BurstClass = BurstClass.MEDIUM
    # Share of SLA load that is Type1, the rest is Type2.
    sla_mix: float = 0.5
    flows_per_vno: int = 4
    frames: int = 1000
    seed: int = 0
    capacity_words: int = DEFAULT_CAPACITY_WORDS
    guard_words: int = DEFAULT_GUARD_WORDS

    def __post_init__(self):
        object.__setattr__(self, "burst_class", BurstClass(self.burst_class))
        if self.num_vnos < 1:
            raise ValueError("num_vnos must be at least 1, got %r" % self.num_vnos)
        if not 0 < self.load_fraction <= 1:
            raise ValueError("load_fraction must be in (0, 1], got %r" % self.load_fraction)
        if not 0 <= self.sla_share <= 1:
            raise ValueError("sla_share must be in [0, 1], got %r" % self.sla_share)
        if not 0 <= self.sla_mix <= 1:
            raise ValueError("sla_mix must be in [0, 1], got %r" % self.sla_mix)
        if self.flows_per_vno < 1:
            raise ValueError("flows_per_vno must be at least 1, got %r" % self.flows_per_vno)
        if self.frames < 0:
            raise ValueError("frames must not be negative, got %r" % self.frames)
        # Raises for a bad capacity or guard.
        frame = self.frame
        if self.burst_class.words > frame.capacity_words:
            raise ValueError(
                "%s bursts (%d words) do not fit a %d-word frame"
                % (self.burst_class.value, self.burst_class.words, frame.capacity_words)
            )

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.capacity_words, self.guard_words)

    @property
    def burst_words(self) -> int:
        return self.burst_class.words

    @property
    def target_words(self) -> float:
        return self.load_fraction * self.capacity_words

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["burst_class"] = self.burst_class.value
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ScenarioConfig:
        return cls(**data)


@dataclass(frozen=True, slots=True)
class Flow:
    flow_id: str
    vno_id: int
    sla_type: SlaType


def _class_pattern(sla_mix: float) -> list[SlaType]:
    if sla_mix >= 1:
        sla_part = [SlaType.TYPE1, SlaType.TYPE1]
    elif sla_mix <= 0:
        sla_part = [SlaType.TYPE2, SlaType.TYPE2]
    else:
        sla_part = [SlaType.TYPE1, SlaType.TYPE2]
    return sla_part + [SlaType.BEST_EFFORT, SlaType.BEST_EFFORT]


def flow_roster(cfg: ScenarioConfig) -> list[Flow]:
    """
    The flows of a run. Flow ``j`` of VNO ``v`` takes entry ``(j + v) % 4``
    of a four-slot class pattern (two SLA slots, two best effort), so with
    four flows per VNO every VNO carries every class and with fewer the
    classes rotate across VNOs.
    """
    pattern = _class_pattern(cfg.sla_mix)
    return [
        Flow("v%df%d" % (v, j), v, pattern[(j + v) % len(pattern)])
        for v in range(cfg.num_vnos)
        for j in range(cfg.flows_per_vno)
    ]


def roster_slas(cfg: ScenarioConfig) -> list[tuple[str, SlaClass]]:
    """(flow_id, SlaClass) pairs, as taken by ``init_sla_table``."""
    classes = sla_classes(cfg.frame)
    return [(f.flow_id, classes[f.sla_type]) for f in flow_roster(cfg)]


@dataclass(frozen=True)
class GeneratedFrame:
    frame_index: int
    vbmaps: tuple[VirtualBMap, ...]
    # Service class of each allocation, keyed by AllocationRequest.key.
    truth: Mapping[tuple, SlaType] = field(default_factory=dict)

    @property
    def allocations(self) -> list[AllocationRequest]:
        return [a for vb in self.vbmaps for a in vb.allocations]

    @property
    def requested_words(self) -> int:
        return sum(a.size_words for a in self.allocations)


def burst_counts(cfg: ScenarioConfig) -> dict[SlaType, int]:
    """Bursts per frame for each class. Load counts payload words only."""
    total = round(cfg.target_words / cfg.burst_words)
    sla = round(total * cfg.sla_share)
    type1 = round(sla * cfg.sla_mix)
    return {
        SlaType.TYPE1: type1,
        SlaType.TYPE2: sla - type1,
        SlaType.BEST_EFFORT: total - sla,
    }


class _FrameBuilder:
    def __init__(self, cfg: ScenarioConfig, frame_index: int, rng: np.random.Generator,
                 roster: list[Flow]):
        self.cfg = cfg
        self.frame_index = frame_index
        self.rng = rng
        self.size = cfg.burst_words
        self.last_start = cfg.capacity_words - self.size
        self.classes = sla_classes(cfg.frame)
        self.timelines = [Timeline(cfg.guard_words) for _ in range(cfg.num_vnos)]
        self.allocations: list[list[AllocationRequest]] = [[] for _ in range(cfg.num_vnos)]
        self.flows: dict[tuple[int, SlaType], list[str]] = {}
        for f in roster:
            self.flows.setdefault((f.vno_id, f.sla_type), []).append(f.flow_id)

    def vnos_with(self, sla_type: SlaType, first: int) -> list[int]:
        n = self.cfg.num_vnos
        order = [(first + k) % n for k in range(n)]
        return [v for v in order if (v, sla_type) in self.flows]

    def draw_start(self, timeline: Timeline):
        for _ in range(START_REDRAWS):
            start = int(self.rng.integers(0, self.last_start + 1))
            if timeline.fits(start, self.size):
                return start
        return timeline.first_fit(self.size, 0, self.last_start)

    def add(self, sla_type: SlaType, turn: int) -> None:
        candidates = self.vnos_with(sla_type, turn % self.cfg.num_vnos)
        if not candidates:
            raise GenerationError(
                "No flow carries %s traffic; raise flows_per_vno (now %d) or num_vnos."
                % (sla_type.value, self.cfg.flows_per_vno),
                constraint="flows_per_vno",
            )
        for v in candidates:
            start = self.draw_start(self.timelines[v])
            if start is None:
                continue
            flow_ids = self.flows[(v, sla_type)]
            flow_id = flow_ids[int(self.rng.integers(len(flow_ids)))]
            self.timelines[v].insert(start, self.size)
            self.allocations[v].append(
                AllocationRequest(v, flow_id, start, self.size, self.classes[sla_type])
            )
            return
        raise GenerationError(
            "Frame %d: no VNO has room for another %d-word burst with a %d-word guard; "
            "load %.2f is out of reach for %s bursts."
            % (self.frame_index, self.size, self.cfg.guard_words, self.cfg.load_fraction,
               self.cfg.burst_class.value),
            constraint="capacity_words/guard_words",
        )

    def build(self) -> GeneratedFrame:
        labels = [t for t, n in burst_counts(self.cfg).items() for _ in range(n)]
        order = self.rng.permutation(len(labels))
        for turn, k in enumerate(order):
            self.add(labels[int(k)], turn)
        vbmaps = []
        truth = {}
        for v, allocations in enumerate(self.allocations):
            allocations.sort(key=lambda a: a.requested_start)
            vbmaps.append(VirtualBMap(v, self.frame_index, tuple(allocations)))
            for a in allocations:
                truth[a.key] = a.sla.sla_type
        return GeneratedFrame(self.frame_index, tuple(vbmaps), truth)


def generate_frame(cfg: ScenarioConfig, frame_index: int,
                   rng: np.random.Generator) -> GeneratedFrame:
    """One frame of vBMaps, drawn from ``rng``."""
    return _FrameBuilder(cfg, frame_index, rng, flow_roster(cfg)).build()


def generate_run(cfg: ScenarioConfig) -> Iterator[GeneratedFrame]:
    """``cfg.frames`` frames from a generator seeded with ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    roster = flow_roster(cfg)
    logger.debug("Generating %d frames for %d flows (seed %d)", cfg.frames, len(roster), cfg.seed)
    for index in range(cfg.frames):
        yield _FrameBuilder(cfg, index, rng, roster).build()
