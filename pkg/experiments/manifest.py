"""
Experiment manifests: the JSON config file format, the built-in presets
and their expansion into jobs.

A config is one JSON object. Every key is optional::

    {
        "seed": 7,
        "preset": "paper-heuristic",
        "schedulers": ["heuristic", "stateless"],
        "grid": {
            "load_fraction": [0.2, 0.5, 0.9],
            "sla_share": [0.1, 0.3, 0.5],
            "burst_class": ["small", "large"]
        },
        "scenario": {"num_vnos": 5, "flows_per_vno": 4, "sla_mix": 0.5},
        "frames": 1000,
        "carryover": false,
        "timing": false,
        "exact": {"sampled": true, "sample_frames": 20,
                  "max_allocations": 12, "time_budget_s": 10.0},
        "jobs": 4,
        "out_dir": "results"
    }

``scenario`` takes any ScenarioConfig field; ``grid`` lists override it and
are crossed. A preset fills in schedulers, grid, frames and exact settings;
keys given next to it win. Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import itertools
import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from ponhv.dba.oracle import ExactLimits
from ponhv.dba.trafficgen import BurstClass, ScenarioConfig, burst_counts

SCHEDULERS = ("heuristic", "stateless", "exact")

PRESET_LOADS = (0.2, 0.5, 0.9)
PRESET_SLA_SHARES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
PRESET_FRAMES = 1000


class ConfigError(ImproperlyConfigured):
    """A run config cannot be turned into a manifest."""


class ConfigFileMissing(ConfigError):
    pass


class ConfigSchemaError(ConfigError):
    pass


class ConfigRangeError(ConfigError):
    pass


@dataclass(frozen=True)
class ExactOptions:
    sampled: bool = False
    sample_frames: int = 20
    limits: ExactLimits = field(default_factory=ExactLimits)


@dataclass(frozen=True)
class Job:
    scenario: ScenarioConfig
    scheduler: str
    carryover: bool = False
    exact: ExactOptions = field(default_factory=ExactOptions)
    warmup: int = 100

    @property
    def sampled(self) -> bool:
        return self.scheduler == "exact" and self.exact.sampled

    def describe(self) -> str:
        s = self.scenario
        return "%s load=%g share=%g %s seed=%d" % (
            self.scheduler, s.load_fraction, s.sla_share, s.burst_class.value, s.seed,
        )


@dataclass(frozen=True)
class RunManifest:
    jobs: tuple[Job, ...]
    out_dir: Path
    parallelism: int = 1
    seed: int = 0
    timing: bool = False
    source: str = "<dict>"

    def with_overrides(self, **changes) -> RunManifest:
        """
        Apply command-line overrides. ``seed`` and ``warmup`` are pushed into
        every job; None values are ignored.
        """
        data = {k: v for k, v in changes.items() if v is not None}
        seed = data.get("seed")
        warmup = data.pop("warmup", None)
        if seed is not None or warmup is not None:
            data["jobs"] = tuple(
                Job(
                    j.scenario if seed is None else _replace_scenario(j.scenario, seed=seed),
                    j.scheduler,
                    j.carryover,
                    j.exact,
                    j.warmup if warmup is None else warmup,
                )
                for j in self.jobs
            )
        if "out_dir" in data:
            data["out_dir"] = Path(data["out_dir"])
        return _copy(self, data)


def _copy(manifest: RunManifest, data: Mapping[str, Any]) -> RunManifest:
    current = {f.name: getattr(manifest, f.name) for f in fields(manifest)}
    current.update(data)
    return RunManifest(**current)


def _replace_scenario(scenario: ScenarioConfig, **changes) -> ScenarioConfig:
    data = scenario.to_dict()
    data.update(changes)
    return ScenarioConfig.from_dict(data)


def _grid_preset(scheduler: str) -> dict[str, Any]:
    preset = {
        "schedulers": [scheduler],
        "grid": {
            "load_fraction": list(PRESET_LOADS),
            "sla_share": list(PRESET_SLA_SHARES),
            "burst_class": [b.value for b in BurstClass],
        },
        "frames": PRESET_FRAMES,
    }
    if scheduler == "exact":
        preset["exact"] = {"sampled": True}
    return preset


PRESETS = {"paper-%s" % s: _grid_preset(s) for s in SCHEDULERS}

_TOP_KEYS = {
    "seed", "preset", "schedulers", "grid", "scenario", "frames", "carryover",
    "timing", "exact", "jobs", "out_dir",
}
_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)}
_GRID_KEYS = {"load_fraction", "sla_share", "burst_class", "num_vnos", "flows_per_vno", "sla_mix"}
_EXACT_KEYS = {"sampled", "sample_frames", "max_allocations", "time_budget_s"}


class _Reader:
    """Type checks with messages that point at the offending key and line."""

    def __init__(self, text: Optional[str], source: str):
        self.text = text
        self.source = source

    def line_of(self, path: Sequence[str]) -> Optional[int]:
        if not self.text or not path:
            return None
        start, end = 0, len(self.text)
        match = None
        for key in path:
            if isinstance(key, int):
                continue
            match = self._member(str(key), start, end)
            if match is None:
                return None
            start, end = match.end(), self._value_end(match.end(), end)
        if match is None:
            return None
        return self.text.count("\n", 0, match.start()) + 1

    def _scan(self, start: int, end: int):
        """Yield (offset, char, depth) for characters outside string bodies."""
        text = self.text
        depth = 0
        i = start
        while i < end:
            c = text[i]
            if c == '"':
                yield i, c, depth
                i += 1
                while i < end and text[i] != '"':
                    i += 2 if text[i] == "\\" else 1
            elif c in "{[":
                depth += 1
                yield i, c, depth
            elif c in "}]":
                yield i, c, depth
                depth -= 1
            else:
                yield i, c, depth
            i += 1

    def _member(self, key: str, start: int, end: int):
        """The ``"key":`` match directly inside the object spanning [start, end)."""
        pattern = re.compile(r'"%s"\s*:' % re.escape(key))
        for i, c, depth in self._scan(start, end):
            if c == '"' and depth == 1:
                match = pattern.match(self.text, i, end)
                if match is not None:
                    return match
        return None

    def _value_end(self, start: int, end: int) -> int:
        for i, c, depth in self._scan(start, end):
            if c in "}]" and depth <= 1:
                return i + 1 if depth == 1 else i
            if c == "," and depth == 0:
                return i
        return end

    def where(self, path: Sequence[str]) -> str:
        dotted = ".".join(str(p) for p in path) or "<root>"
        line = self.line_of(path)
        if line is None:
            return "%s: %s" % (self.source, dotted)
        return "%s:%d: %s" % (self.source, line, dotted)

    def schema(self, path, message) -> ConfigSchemaError:
        return ConfigSchemaError("%s: %s" % (self.where(path), message))

    def range(self, path, message) -> ConfigRangeError:
        return ConfigRangeError("%s: %s" % (self.where(path), message))

    def object(self, value, path, allowed) -> dict:
        if not isinstance(value, dict):
            raise self.schema(path, "expected an object, got %s" % type(value).__name__)
        for key in value:
            if key not in allowed:
                raise self.schema(list(path) + [key], "unknown key")
        return value

    def integer(self, value, path) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.schema(path, "expected an integer, got %r" % (value,))
        return value

    def number(self, value, path) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.schema(path, "expected a number, got %r" % (value,))
        return value

    def boolean(self, value, path) -> bool:
        if not isinstance(value, bool):
            raise self.schema(path, "expected true or false, got %r" % (value,))
        return value

    def string(self, value, path) -> str:
        if not isinstance(value, str):
            raise self.schema(path, "expected a string, got %r" % (value,))
        return value

    def scalar(self, key, value, path):
        if key == "burst_class":
            name = self.string(value, path)
            try:
                return BurstClass(name).value
            except ValueError:
                raise self.range(
                    path, "unknown burst class %r, expected one of %s"
                    % (name, ", ".join(b.value for b in BurstClass))
                )
        if key in ("load_fraction", "sla_share", "sla_mix"):
            return self.number(value, path)
        return self.integer(value, path)


def _merge_preset(data: dict, reader: _Reader) -> dict:
    name = data.get("preset")
    if name is None:
        return data
    name = reader.string(name, ["preset"])
    if name not in PRESETS:
        raise reader.range(
            ["preset"], "unknown preset %r, expected one of %s" % (name, ", ".join(sorted(PRESETS)))
        )
    merged = copy.deepcopy(PRESETS[name])
    for key, value in data.items():
        if key == "exact" and isinstance(value, dict):
            merged.setdefault("exact", {}).update(value)
        else:
            merged[key] = value
    return merged


def _grid(data: dict, reader: _Reader) -> list[dict[str, Any]]:
    grid = reader.object(data.get("grid", {}), ["grid"], _GRID_KEYS)
    axes = []
    for key in sorted(grid, key=_grid_order):
        values = grid[key]
        path = ["grid", key]
        if not isinstance(values, list) or not values:
            raise reader.schema(path, "expected a non-empty list")
        axes.append([(key, reader.scalar(key, v, path)) for v in values])
    return [dict(point) for point in itertools.product(*axes)]


def _grid_order(key: str) -> int:
    # Jobs come out grouped by load, then burst class, then sla_share.
    order = ["load_fraction", "burst_class", "num_vnos", "flows_per_vno", "sla_mix", "sla_share"]
    return order.index(key)


def _scenario(data: dict, point: dict, seed: int, reader: _Reader) -> ScenarioConfig:
    base = reader.object(data.get("scenario", {}), ["scenario"], _SCENARIO_KEYS)
    values = {k: reader.scalar(k, v, ["scenario", k]) for k, v in base.items()}
    frame = settings.PONHV.get("FRAME", {})
    values.setdefault("capacity_words", frame.get("capacity_words", 38_880))
    values.setdefault("guard_words", frame.get("guard_words", 31))
    if "frames" in data:
        values["frames"] = reader.integer(data["frames"], ["frames"])
    values["seed"] = seed
    values.update(point)
    try:
        return ScenarioConfig.from_dict(values)
    except ValueError as exc:
        culprit = _culprit(str(exc), values)
        path = ["grid", culprit] if culprit in point else ["scenario", culprit]
        if culprit == "frames":
            path = ["frames"]
        raise reader.range(path, str(exc))


def _culprit(message: str, values: Mapping[str, Any]) -> str:
    for key in values:
        if message.startswith(key):
            return key
    return "burst_class"


def _exact(data: dict, reader: _Reader) -> ExactOptions:
    raw = reader.object(data.get("exact", {}), ["exact"], _EXACT_KEYS)
    defaults = settings.PONHV
    sampled = reader.boolean(raw.get("sampled", False), ["exact", "sampled"])
    sample_frames = reader.integer(
        raw.get("sample_frames", defaults.get("EXACT_SAMPLE_FRAMES", 20)), ["exact", "sample_frames"]
    )
    max_allocations = reader.integer(
        raw.get("max_allocations", defaults.get("EXACT_MAX_ALLOCATIONS", 12)),
        ["exact", "max_allocations"],
    )
    budget = reader.number(
        raw.get("time_budget_s", defaults.get("EXACT_TIME_BUDGET_S", 10.0)), ["exact", "time_budget_s"]
    )
    if sample_frames < 1:
        raise reader.range(["exact", "sample_frames"], "must be at least 1, got %d" % sample_frames)
    if max_allocations < 1:
        raise reader.range(["exact", "max_allocations"], "must be at least 1, got %d" % max_allocations)
    if budget <= 0:
        raise reader.range(["exact", "time_budget_s"], "must be positive, got %r" % budget)
    return ExactOptions(sampled, sample_frames, ExactLimits(max_allocations, float(budget)))


def manifest_from_dict(data: Any, text: Optional[str] = None,
                       source: str = "<dict>") -> RunManifest:
    """Validate a decoded config and expand it into a RunManifest."""
    reader = _Reader(text, source)
    reader.object(data, [], _TOP_KEYS)
    data = _merge_preset(data, reader)
    seed = reader.integer(data.get("seed", 0), ["seed"])
    if seed < 0:
        raise reader.range(["seed"], "must not be negative, got %d" % seed)

    schedulers = data.get("schedulers", ["heuristic"])
    if not isinstance(schedulers, list):
        raise reader.schema(["schedulers"], "expected a list")
    for name in schedulers:
        if name not in SCHEDULERS:
            raise reader.range(
                ["schedulers"], "unknown scheduler %r, expected one of %s"
                % (name, ", ".join(SCHEDULERS))
            )
    carryover = reader.boolean(data.get("carryover", False), ["carryover"])
    timing = reader.boolean(data.get("timing", False), ["timing"])
    exact = _exact(data, reader)
    if carryover and exact.sampled and "exact" in schedulers:
        raise reader.range(["carryover"], "carryover needs consecutive frames, sampled exact runs skip frames")
    parallelism = reader.integer(data.get("jobs", settings.PONHV.get("JOBS", 1)), ["jobs"])
    if parallelism < 1:
        raise reader.range(["jobs"], "must be at least 1, got %d" % parallelism)
    out_dir = Path(reader.string(data["out_dir"], ["out_dir"])) if "out_dir" in data \
        else Path(settings.PONHV["OUT_DIR"])
    warmup = settings.PONHV.get("WARMUP_CALLS", 100)

    scenarios = [_scenario(data, point, seed, reader) for point in _grid(data, reader)]
    jobs = tuple(
        Job(scenario, name, carryover, exact, warmup)
        for name in schedulers
        for scenario in scenarios
    )
    return RunManifest(jobs, out_dir, parallelism, seed, timing, source)


def parse_config(path) -> RunManifest:
    """Read a JSON run config from ``path``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigFileMissing("Config file %s does not exist." % path)
    except IsADirectoryError:
        raise ConfigFileMissing("Config path %s is a directory." % path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError("%s:%d: invalid JSON: %s" % (path, exc.lineno, exc.msg))
    return manifest_from_dict(data, text, str(path))


def preset_manifest(name: str) -> RunManifest:
    if name not in PRESETS:
        raise ConfigRangeError(
            "Unknown preset %r, expected one of %s" % (name, ", ".join(sorted(PRESETS)))
        )
    return manifest_from_dict({"preset": name}, source="preset %s" % name)


def manifest_summary(manifest: RunManifest, verbose: bool = False) -> str:
    """Human readable description; ``verbose`` lists every job."""
    lines = [
        "%s: %d jobs, %d in parallel, seed %d, output in %s%s"
        % (manifest.source, len(manifest.jobs), manifest.parallelism, manifest.seed,
           manifest.out_dir, ", timing on" if manifest.timing else "")
    ]
    if not verbose:
        return "\n".join(lines)
    for job in manifest.jobs:
        line = "  " + job.describe()
        if job.scheduler == "exact":
            bursts = sum(burst_counts(job.scenario).values())
            if bursts > job.exact.limits.max_allocations:
                line += " (%d bursts per frame, above the oracle limit of %d: will fail)" % (
                    bursts, job.exact.limits.max_allocations)
            if job.sampled:
                line += " [sampled, %d frames]" % min(job.exact.sample_frames, job.scenario.frames)
        lines.append(line)
    return "\n".join(lines)
