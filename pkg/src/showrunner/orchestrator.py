"""Per-task FIFO queues, worker-pool dispatch, retry and dead-letter policy,
and latency accounting against the publish budget.

The orchestrator never runs model code itself: a pluggable runner turns a
dispatched job into a timed stage plan (the real pipelines, or a stub for
bench runs), and the scheduler walks that plan so the same logic runs in
wall-clock or virtual time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .clock import EventScheduler
from .config import TASK_QUEUE, ShowConfig
from .errors import NoCompletedJobs, QueueClosed, UnknownTask, UnknownJob

TERMINAL_PHASES = {"PUBLISHED", "SUBSTITUTED", "DEAD_LETTER"}


def route(task_type: str) -> str:
    """Stable task-to-queue mapping."""
    try:
        return TASK_QUEUE[task_type]
    except KeyError:
        raise UnknownTask(f"no queue for task {task_type!r}") from None


@dataclass
class GenerationJob:
    job_id: str
    submission_id: str
    task_type: str
    phase: str = "QUEUED"
    stage_index: int = 0
    attempts: int = 0
    stage_timestamps: list = field(default_factory=list)
    assigned_worker: Optional[str] = None

    @property
    def state(self) -> str:
        if self.phase == "STAGE":
            return f"STAGE({self.stage_index})"
        return self.phase

    def stamp(self, label: str, t_ms: int) -> None:
        if self.stage_timestamps and t_ms < self.stage_timestamps[-1][1]:
            raise ValueError("stage timestamps must be monotonic")
        self.stage_timestamps.append((label, t_ms))

    def stamp_of(self, label: str) -> Optional[int]:
        for lbl, t in self.stage_timestamps:
            if lbl == label:
                return t
        return None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "submission_id": self.submission_id,
            "task_type": self.task_type,
            "state": self.state,
            "attempts": self.attempts,
            "stage_timestamps": [[lbl, t] for lbl, t in self.stage_timestamps],
            "assigned_worker": self.assigned_worker,
        }


@dataclass
class StagePlan:
    label: str
    duration_ms: int


@dataclass
class JobPlan:
    """What executing a dispatched job will look like on the timeline.

    For successful runs, stages covers the whole execution and result holds
    the produced value. For failures, stages covers completed stages only and
    the failure fields place the error.
    """

    stages: list[StagePlan]
    result: object = None
    failed_stage: Optional[str] = None
    failure_at_ms: int = 0
    transient: bool = True

    @property
    def ok(self) -> bool:
        return self.failed_stage is None


class WorkerPool:
    def __init__(self, task_type: str, size: int):
        self.task_type = task_type
        self.size = size
        self.busy: dict[str, str] = {}  # worker -> job_id
        self._idle = [f"w-{task_type}-{i}" for i in range(size)]

    def acquire(self, job_id: str) -> Optional[str]:
        if not self._idle:
            return None
        worker = self._idle.pop(0)
        self.busy[worker] = job_id
        return worker

    def release(self, worker: str) -> None:
        self.busy.pop(worker, None)
        self._idle.append(worker)
        self._idle.sort()

    @property
    def in_flight(self) -> int:
        return len(self.busy)


class Journal:
    """Append-only NDJSON event journal; in-memory unless given a path."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        self._fh = self.path.open("a", encoding="utf-8") if self.path else None

    def append(self, t_ms: int, job_id: str, event: str, detail: dict) -> None:
        record = {"t_ms": t_ms, "job_id": job_id, "event": event, "detail": detail}
        self.records.append(record)
        if self._fh:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None

    @staticmethod
    def read(path) -> list[dict]:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return [json.loads(line) for line in lines if line.strip()]


class Orchestrator:
    """Queue, dispatch, and account for generation jobs.

    runner(job) -> JobPlan is invoked at dispatch time; on_complete(job,
    result) fires when the final stage lands; on_dead_letter(job) fires when
    retries are exhausted or the error is permanent.
    """

    def __init__(
        self,
        config: ShowConfig,
        scheduler: EventScheduler,
        runner: Callable[[GenerationJob], JobPlan],
        on_complete: Callable[[GenerationJob, object], None],
        on_dead_letter: Callable[[GenerationJob], None],
        journal: Optional[Journal] = None,
    ):
        self.config = config
        self.scheduler = scheduler
        self.runner = runner
        self.on_complete = on_complete
        self.on_dead_letter = on_dead_letter
        self.journal = journal or Journal()
        self.jobs: dict[str, GenerationJob] = {}
        self.pools = {
            task: WorkerPool(task, size) for task, size in config.pool_sizes.items()
        }
        self.queues: dict[str, list[str]] = {q: [] for q in TASK_QUEUE.values()}
        self._heads: dict[str, int] = {q: 0 for q in TASK_QUEUE.values()}
        self.closed = False

    # queueing

    def waiting(self, task_type: str) -> int:
        q = route(task_type)
        return len(self.queues[q]) - self._heads[q]

    def in_flight(self, task_type: str) -> int:
        return self.pools[task_type].in_flight

    def enqueue(self, job: GenerationJob) -> int:
        if self.closed:
            raise QueueClosed("show has ended; queue closed")
        if job.phase != "QUEUED":
            raise ValueError(f"cannot enqueue job in phase {job.phase}")
        queue_name = route(job.task_type)
        first_time = job.job_id not in self.jobs
        self.jobs[job.job_id] = job
        position = self.waiting(job.task_type)
        self.queues[queue_name].append(job.job_id)
        now = self.scheduler.now_ms()
        if first_time:
            job.stamp("enqueue", now)
            self.journal.append(
                now,
                job.job_id,
                "enqueue",
                {
                    "queue": queue_name,
                    "position": position,
                    "task_type": job.task_type,
                    "submission_id": job.submission_id,
                    "attempts": job.attempts,
                },
            )
        else:
            self.journal.append(
                now, job.job_id, "requeue", {"queue": queue_name, "attempts": job.attempts}
            )
        self.scheduler.call_at(now, lambda: self._try_dispatch(job.task_type))
        return position

    def close(self) -> None:
        self.closed = True

    def get_job(self, job_id: str) -> GenerationJob:
        try:
            return self.jobs[job_id]
        except KeyError:
            raise UnknownJob(f"unknown job {job_id}") from None

    # dispatch and stage progression

    def _try_dispatch(self, task_type: str) -> None:
        queue_name = route(task_type)
        pool = self.pools[task_type]
        while self.waiting(task_type) > 0:
            head = self.queues[queue_name][self._heads[queue_name]]
            job = self.jobs[head]
            worker = pool.acquire(job.job_id)
            if worker is None:
                return
            self._heads[queue_name] += 1
            if self._heads[queue_name] > 256:
                del self.queues[queue_name][: self._heads[queue_name]]
                self._heads[queue_name] = 0
            now = self.scheduler.now_ms()
            job.phase = "DISPATCHED"
            job.assigned_worker = worker
            job.stamp("dispatch", now)
            self.journal.append(now, job.job_id, "dispatch", {"worker": worker})
            plan = self.runner(job)
            self._schedule_plan(job, plan, now)

    def _schedule_plan(self, job: GenerationJob, plan: JobPlan, t0: int) -> None:
        job.phase = "STAGE"
        job.stage_index = 1
        elapsed = 0
        for k, stage in enumerate(plan.stages, start=1):
            elapsed += stage.duration_ms
            self.scheduler.call_at(
                t0 + elapsed,
                lambda job=job, k=k, stage=stage, plan=plan: self._on_stage(
                    job, k, stage.label, plan
                ),
            )
        if not plan.ok:
            self.scheduler.call_at(
                t0 + plan.failure_at_ms,
                lambda job=job, plan=plan: self._on_failure(job, plan),
            )

    def _on_stage(self, job: GenerationJob, k: int, label: str, plan: JobPlan) -> None:
        now = self.scheduler.now_ms()
        job.stamp(label, now)
        self.journal.append(now, job.job_id, "stage", {"stage": label, "index": k})
        if k < len(plan.stages):
            job.stage_index = k + 1
            return
        if plan.ok:
            self._release_worker(job)
            self.on_complete(job, plan.result)

    def _on_failure(self, job: GenerationJob, plan: JobPlan) -> None:
        self._release_worker(job)
        self.retry_or_deadletter(job.job_id, plan.failed_stage, plan.transient)

    def _release_worker(self, job: GenerationJob) -> None:
        if job.assigned_worker is not None:
            pool = self.pools[job.task_type]
            pool.release(job.assigned_worker)
            job.assigned_worker = None
            now = self.scheduler.now_ms()
            self.scheduler.call_at(now, lambda: self._try_dispatch(job.task_type))

    def retry_or_deadletter(self, job_id: str, error_stage: str, transient: bool) -> str:
        """Requeue with backoff while the error is transient and attempts
        remain; otherwise dead-letter (which triggers fallback substitution
        downstream). Returns the job's new state."""
        job = self.get_job(job_id)
        now = self.scheduler.now_ms()
        if transient and not self.closed and job.attempts < self.config.max_attempts:
            job.attempts += 1
            job.phase = "QUEUED"
            job.stage_index = 0
            job.stamp(f"retry#{job.attempts}", now)
            backoff = self.config.retry_backoff_ms[
                min(job.attempts - 1, len(self.config.retry_backoff_ms) - 1)
            ]
            self.journal.append(
                now,
                job.job_id,
                "retry",
                {"stage": error_stage, "attempts": job.attempts, "backoff_ms": backoff},
            )
            self.scheduler.call_at(now + backoff, lambda: self._requeue(job))
        else:
            job.phase = "DEAD_LETTER"
            job.stamp("dead_letter", now)
            self.journal.append(
                now,
                job.job_id,
                "dead_letter",
                {"stage": error_stage, "attempts": job.attempts, "transient": transient},
            )
            self.on_dead_letter(job)
        return job.state

    def _requeue(self, job: GenerationJob) -> None:
        if self.closed:
            # Show ended while the job waited out its backoff: dead-letter so
            # the fallback substitution still happens.
            job.phase = "DEAD_LETTER"
            job.stamp("dead_letter", self.scheduler.now_ms())
            self.journal.append(
                self.scheduler.now_ms(), job.job_id, "dead_letter", {"stage": "requeue"}
            )
            self.on_dead_letter(job)
            return
        self.enqueue(job)

    # completion bookkeeping (driven by the engine)

    def mark_pending_moderation(self, job: GenerationJob) -> None:
        now = self.scheduler.now_ms()
        job.phase = "PENDING_MODERATION"
        job.stamp("pending_moderation", now)
        self.journal.append(now, job.job_id, "pending_moderation", {})

    def mark_decided(self, job: GenerationJob, approved: bool) -> None:
        now = self.scheduler.now_ms()
        job.phase = "APPROVED" if approved else "REJECTED"
        job.stamp("decided", now)
        self.journal.append(now, job.job_id, "decided", {"approved": approved})

    def mark_published(self, job: GenerationJob, substituted: bool = False) -> None:
        now = self.scheduler.now_ms()
        job.phase = "SUBSTITUTED" if substituted else "PUBLISHED"
        job.stamp("substituted" if substituted else "publish", now)
        self.journal.append(
            now, job.job_id, "substitute" if substituted else "publish", {}
        )

    # reporting

    def latency_report(self) -> "LatencyReport":
        completed = [
            j for j in self.jobs.values() if j.phase in ("PUBLISHED", "SUBSTITUTED")
        ]
        if not completed:
            raise NoCompletedJobs("no completed jobs to report on")
        return LatencyReport.build(
            self.config.show_id, completed, self.config.budget_window_ms, self.jobs
        )


@dataclass
class LatencyReport:
    show_id: str
    completed_count: int
    budget_window_ms: tuple
    per_job: dict
    p50_ms: int
    p95_ms: int
    max_ms: int
    budget_violations: list
    phase_counts: dict

    @staticmethod
    def _percentile(sorted_values: list, q: float):
        rank = max(1, math.ceil(q * len(sorted_values)))
        return sorted_values[rank - 1]

    @classmethod
    def build(cls, show_id, completed, budget_window_ms, all_jobs) -> "LatencyReport":
        per_job = {}
        durations = []
        violations = []
        for job in completed:
            stamps = job.stage_timestamps
            end_to_end = stamps[-1][1] - stamps[0][1]
            stages = {}
            for (_, t_prev), (label, t) in zip(stamps, stamps[1:]):
                stages[label] = stages.get(label, 0) + (t - t_prev)
            pending_t = job.stamp_of("pending_moderation")
            decided_t = job.stamp_of("decided")
            moderation_dwell = (
                decided_t - pending_t
                if pending_t is not None and decided_t is not None
                else None
            )
            per_job[job.job_id] = {
                "end_to_end_ms": end_to_end,
                "stages": stages,
                "moderation_dwell_ms": moderation_dwell,
                "terminal": job.phase,
            }
            durations.append(end_to_end)
            if end_to_end > budget_window_ms[1]:
                violations.append(job.job_id)
        durations.sort()
        phase_counts = {}
        for job in all_jobs.values():
            phase_counts[job.phase] = phase_counts.get(job.phase, 0) + 1
        return cls(
            show_id=show_id,
            completed_count=len(completed),
            budget_window_ms=tuple(budget_window_ms),
            per_job=per_job,
            p50_ms=cls._percentile(durations, 0.50),
            p95_ms=cls._percentile(durations, 0.95),
            max_ms=durations[-1],
            budget_violations=sorted(violations),
            phase_counts=phase_counts,
        )

    def to_dict(self) -> dict:
        return {
            "show_id": self.show_id,
            "completed_count": self.completed_count,
            "budget_window_ms": list(self.budget_window_ms),
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "max_ms": self.max_ms,
            "budget_violations": self.budget_violations,
            "phase_counts": self.phase_counts,
            "per_job": self.per_job,
        }
