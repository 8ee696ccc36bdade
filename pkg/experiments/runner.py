"""
Execution of run manifests.

``execute_job`` runs one (scenario, scheduler) pair end to end and only
depends on ``ponhv.dba``, so jobs can be shipped to worker processes.
``run_sweep`` fans the jobs out, then writes every artifact from the
parent process.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ponhv.dba.baselines import StatelessScheduler
from ponhv.dba.core import SLA_TYPES, validate_physical_bmap
from ponhv.dba.exceptions import SchedulingError
from ponhv.dba.hypervisor import StatefulHypervisor
from ponhv.dba.metrics import (
    MergeProfiler,
    SweepResult,
    TimingSummary,
    accumulate,
    recompute_compliance,
    summarize_timings,
)
from ponhv.dba.oracle import ExactScheduler
from ponhv.dba.trafficgen import GeneratedFrame, ScenarioConfig, generate_run, roster_slas

from . import reporting
from .manifest import Job, RunManifest

logger = logging.getLogger("ponhv.runner")

# Sampled frames are drawn from a stream independent of the traffic itself.
_SAMPLE_STREAM = 0x5A3D


def make_scheduler(job: Job):
    """A fresh scheduler instance for ``job``; each job owns its own state."""
    cfg = job.scenario.frame
    if job.scheduler == "heuristic":
        return StatefulHypervisor(cfg, roster_slas(job.scenario), carryover=job.carryover)
    if job.scheduler == "stateless":
        return StatelessScheduler(cfg, carryover=job.carryover)
    if job.scheduler == "exact":
        return ExactScheduler(cfg, job.exact.limits, carryover=job.carryover)
    raise ValueError("Unknown scheduler %r" % job.scheduler)


def sample_indices(scenario: ScenarioConfig, size: int) -> list[int]:
    """Frame indices kept by a sampled exact run, in increasing order."""
    if size >= scenario.frames:
        return list(range(scenario.frames))
    rng = np.random.default_rng([scenario.seed, _SAMPLE_STREAM])
    return sorted(int(i) for i in rng.choice(scenario.frames, size=size, replace=False))


def job_frames(job: Job) -> list[GeneratedFrame]:
    frames = generate_run(job.scenario)
    if not job.sampled:
        return list(frames)
    keep = set(sample_indices(job.scenario, job.exact.sample_frames))
    return [f for f in frames if f.frame_index in keep]


# Scheduler labels already warmed up in this process.
_warmed: set[str] = set()


def warm_up(job: Job, frames: list[GeneratedFrame]) -> int:
    """
    Run ``job.warmup`` throwaway merges the first time a scheduler is used in
    this process, so every frame of every job can be timed. Exact jobs stop
    after one pass over their frames. Returns the number of calls made.
    """
    if job.scheduler in _warmed or not job.warmup or not frames:
        return 0
    calls = min(job.warmup, len(frames)) if job.scheduler == "exact" else job.warmup
    scheduler = make_scheduler(replace(job, carryover=False))
    for k in range(calls):
        frame = frames[k % len(frames)]
        scheduler.merge(frame.vbmaps, frame.frame_index)
    _warmed.add(job.scheduler)
    logger.debug("Warmed up %s with %d merge calls", job.scheduler, calls)
    return calls


@dataclass(frozen=True)
class JobOutcome:
    job: Job
    result: Optional[SweepResult] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def execute_job(job: Job) -> JobOutcome:
    """
    Merge every frame of ``job`` and fold the reports into a SweepResult.
    Scheduling errors become a failed outcome instead of propagating.
    """
    try:
        frames = job_frames(job)
        scheduler = make_scheduler(job)
        warm_up(job, frames)
        profiler = MergeProfiler(warmup=0)
        reports = []
        bmaps = []
        for frame in frames:
            bmap, report = scheduler.merge(frame.vbmaps, frame.frame_index)
            violations = validate_physical_bmap(bmap, job.scenario.frame)
            if violations:
                raise SchedulingError(
                    "Frame %d: invalid bandwidth map: %s"
                    % (frame.frame_index, "; ".join(v.message for v in violations))
                )
            profiler.record(report.merge_wall_time)
            reports.append(report)
            bmaps.append(bmap)
        if not reports:
            return JobOutcome(job, error="no frames to merge")
        result = accumulate(
            reports, job.scenario, scheduler.label,
            sample_size=len(reports) if job.sampled else None,
        )
        check = recompute_compliance(bmaps)
        for t in SLA_TYPES:
            if abs(check[t] - result.compliance[t]) > 1e-12:
                raise SchedulingError(
                    "Compliance accounting disagrees for %s: %r vs %r"
                    % (t.value, result.compliance[t], check[t])
                )
        return JobOutcome(job, replace(result, timing=profiler.summary()))
    except SchedulingError as exc:
        logger.warning("Job %s failed: %s", job.describe(), exc)
        return JobOutcome(job, error=str(exc))


def execute_jobs(jobs, parallelism: int = 1) -> list[JobOutcome]:
    """Run ``jobs``; outcomes come back in job order whatever the parallelism."""
    jobs = list(jobs)
    if parallelism <= 1 or len(jobs) <= 1:
        outcomes = []
        for k, job in enumerate(jobs, 1):
            logger.info("[%d/%d] %s", k, len(jobs), job.describe())
            outcomes.append(execute_job(job))
        return outcomes
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(execute_job, jobs))


@dataclass
class SweepReport:
    outcomes: list[JobOutcome]
    out_dir: Path
    artifacts: list[Path] = field(default_factory=list)

    @property
    def results(self) -> list[SweepResult]:
        return [o.result for o in self.outcomes if not o.failed]

    @property
    def failures(self) -> list[JobOutcome]:
        return [o for o in self.outcomes if o.failed]

    @property
    def exit_status(self) -> int:
        return 1 if self.failures else 0


def run_sweep(manifest: RunManifest) -> SweepReport:
    """Execute every job of ``manifest`` and write CSV, charts and failures."""
    outcomes = execute_jobs(manifest.jobs, manifest.parallelism)
    report = SweepReport(outcomes, manifest.out_dir)
    out_dir = manifest.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    report.artifacts.append(
        reporting.write_compliance_csv(out_dir / reporting.COMPLIANCE_CSV, report.results,
                                       timing=manifest.timing)
    )
    report.artifacts.extend(reporting.write_charts(out_dir, report.results))
    if report.failures:
        report.artifacts.append(
            reporting.write_failures(out_dir / reporting.FAILURES_CSV, report.failures)
        )
    return report


def record_results(results, timing: bool = False) -> int:
    """Store one SweepRecord per CSV row; returns the number of rows."""
    from .models import SweepRecord

    rows = [
        SweepRecord(**row)
        for result in results
        for row in reporting.result_records(result, timing)
    ]
    SweepRecord.objects.bulk_create(rows)
    return len(rows)


@dataclass(frozen=True)
class BenchRow:
    scheduler: str
    load_fraction: float
    timing: Optional[TimingSummary]


def run_bench(manifest: RunManifest) -> list[BenchRow]:
    """
    Profile the heuristic and the stateless baseline on identical frames.
    Scenarios are taken from the manifest's jobs; durations are pooled per
    (scheduler, load).
    """
    scenarios = list(dict.fromkeys(j.scenario for j in manifest.jobs))
    warmup = manifest.jobs[0].warmup if manifest.jobs else 0
    carryover = any(j.carryover for j in manifest.jobs)
    pooled: dict[tuple[str, float], list[float]] = defaultdict(list)
    for scenario in scenarios:
        frames = list(generate_run(scenario))
        for label in ("heuristic", "stateless"):
            job = Job(scenario, label, carryover, warmup=warmup)
            warm_up(job, frames)
            scheduler = make_scheduler(job)
            profiler = MergeProfiler(warmup=0)
            for frame in frames:
                _, report = scheduler.merge(frame.vbmaps, frame.frame_index)
                profiler.record(report.merge_wall_time)
            pooled[(label, scenario.load_fraction)].extend(profiler.samples)
            logger.info("Benchmarked %s on %d frames at load %g", label, len(frames),
                        scenario.load_fraction)
    return [
        BenchRow(label, load, summarize_timings(samples))
        for (label, load), samples in sorted(pooled.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    ]
