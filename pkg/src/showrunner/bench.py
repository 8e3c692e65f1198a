"""Desk-scale latency benchmark: seeded synthetic workloads through the real
orchestrator in virtual time, with moderation bypassed so end-to-end time is
queue wait plus service, directly comparable to a plain queueing simulation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .clock import EventScheduler, VirtualClock
from .config import ShowConfig
from .errors import BadConfig
from .orchestrator import GenerationJob, JobPlan, Orchestrator, StagePlan


@dataclass
class BenchWorkload:
    """One task's arrival pattern: `count` jobs uniform over `window_ms` with
    service times uniform over [service_lo_ms, service_hi_ms]."""

    task: str
    count: int
    window_ms: int
    service_lo_ms: int
    service_hi_ms: int


@dataclass
class BenchConfig:
    pool_sizes: dict = field(default_factory=lambda: {"T1": 8, "T2": 8, "T3": 8})
    workloads: list[BenchWorkload] = field(default_factory=list)
    seed: int = 0

    def validate(self):
        for task, size in self.pool_sizes.items():
            if not isinstance(size, int) or size < 1:
                raise BadConfig(f"pool size for {task} must be a positive integer")
        if not self.workloads:
            raise BadConfig("bench needs at least one workload")
        for w in self.workloads:
            if w.task not in self.pool_sizes:
                raise BadConfig(f"workload task {w.task} has no pool")
            if w.count < 1:
                raise BadConfig("workload count must be >= 1")
            if w.window_ms < 0:
                raise BadConfig("arrival window must be >= 0")
            if not (0 <= w.service_lo_ms <= w.service_hi_ms):
                raise BadConfig("service range must satisfy 0 <= lo <= hi")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        workloads = [
            BenchWorkload(
                task=w["task"],
                count=int(w["count"]),
                window_ms=int(w["window_ms"]),
                service_lo_ms=int(w["service_lo_ms"]),
                service_hi_ms=int(w["service_hi_ms"]),
            )
            for w in data.get("workloads", [])
        ]
        return cls(
            pool_sizes={k: int(v) for k, v in data.get("pool_sizes", {"T1": 8, "T2": 8, "T3": 8}).items()},
            workloads=workloads,
            seed=int(data.get("seed", 0)),
        ).validate()


@dataclass(frozen=True)
class BenchJob:
    job_id: str
    task: str
    arrival_ms: int
    service_ms: int


def generate_workload(config: BenchConfig) -> list[BenchJob]:
    """The seeded job list; arrival ties keep workload order (stable FIFO)."""
    config.validate()
    rng = random.Random(config.seed)
    jobs = []
    for w in config.workloads:
        arrivals = sorted(rng.randint(0, w.window_ms) for _ in range(w.count))
        for i, arrival in enumerate(arrivals):
            jobs.append(
                BenchJob(
                    job_id=f"b-{w.task}-{i:04d}",
                    task=w.task,
                    arrival_ms=arrival,
                    service_ms=rng.randint(w.service_lo_ms, w.service_hi_ms),
                )
            )
    jobs.sort(key=lambda j: (j.arrival_ms, j.job_id))
    return jobs


@dataclass
class BenchResult:
    report: dict
    completions: dict  # job_id -> {"arrival_ms", "start_ms", "completion_ms", "service_ms"}

    def to_dict(self) -> dict:
        return {"report": self.report, "completions": self.completions}


def run_bench(config: BenchConfig) -> BenchResult:
    config.validate()
    jobs = generate_workload(config)
    service_by_id = {j.job_id: j.service_ms for j in jobs}

    scheduler = EventScheduler(VirtualClock())
    show_config = ShowConfig(
        show_id="bench", pool_sizes=dict(config.pool_sizes), seed=config.seed
    )

    def runner(job: GenerationJob) -> JobPlan:
        return JobPlan(stages=[StagePlan("service", service_by_id[job.job_id])])

    orchestrator = Orchestrator(
        show_config,
        scheduler,
        runner,
        on_complete=lambda job, result: orchestrator.mark_published(job),
        on_dead_letter=lambda job: None,
    )

    for bench_job in jobs:
        gen_job = GenerationJob(
            job_id=bench_job.job_id,
            submission_id=bench_job.job_id,
            task_type=bench_job.task,
        )
        scheduler.call_at(bench_job.arrival_ms, lambda j=gen_job: orchestrator.enqueue(j))

    scheduler.run_until_idle()

    completions = {}
    for bench_job in jobs:
        job = orchestrator.get_job(bench_job.job_id)
        completions[bench_job.job_id] = {
            "arrival_ms": job.stamp_of("enqueue"),
            "start_ms": job.stamp_of("dispatch"),
            "completion_ms": job.stamp_of("publish"),
            "service_ms": bench_job.service_ms,
        }
    return BenchResult(
        report=orchestrator.latency_report().to_dict(), completions=completions
    )
