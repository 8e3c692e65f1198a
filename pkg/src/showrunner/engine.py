"""One show, end to end: round gating, job creation, pipeline execution under
the worker pools, the moderation gate, the stage sink, and the Oracle
sequence. The engine is the linearization point: every externally visible
operation takes the engine lock, and all timing flows through one scheduler
so shows run identically on the wall clock or in virtual time.
"""

from __future__ import annotations

import hashlib
import random
import threading
from typing import Optional

from .backends import FlakyBackend, MockBackend, ModelBackend
from .clock import EventScheduler, VirtualClock, WallClock
from .config import ROUND_TASK, MuseProfile, ShowConfig
from .digests import short_id
from .errors import BackendFailure, MalformedPayload, RoundClosed, ShowClosed
from .ingest import IngestGateway, Submission
from .moderation import ModerationGate, ModerationOutcome
from .oracle import ChoreographyCue, MoveLibrary, ScoreReport, select_moves, score
from .orchestrator import GenerationJob, Journal, JobPlan, Orchestrator, StagePlan
from .pipelines import PipelineContext, run_task
from .pose_metrics import PoseSequence
from .sink import StageSink


class ShowEngine:
    def __init__(
        self,
        config: ShowConfig,
        profiles: dict[int, MuseProfile],
        library: MoveLibrary,
        backends: Optional[ModelBackend] = None,
        virtual: bool = True,
        journal_path=None,
    ):
        config.validate()
        self.config = config
        self.profiles = profiles
        self.library = library
        self.virtual = virtual
        clock = VirtualClock() if virtual else WallClock()
        self.scheduler = EventScheduler(clock)
        self.lock = threading.RLock()

        if backends is not None:
            base = backends
        elif config.remote_backend_url:
            from .backends import RemoteBackend

            base = RemoteBackend(config.remote_backend_url, config.remote_timeout_s)
        else:
            base = MockBackend(config.mock_latencies_ms, config.keypoint_wild_percent)
        if config.failure_rate > 0:
            self.flaky: Optional[FlakyBackend] = FlakyBackend(
                base, config.flaky_seed, config.failure_rate
            )
            self.backends: ModelBackend = self.flaky
        else:
            self.flaky = None
            self.backends = base

        self.ingest = IngestGateway(config)
        self.gate = ModerationGate(profiles, self.scheduler.now_ms)
        self.sink = StageSink(config.show_id, self.scheduler.now_ms, self.gate.release_kind)
        self.orchestrator = Orchestrator(
            config,
            self.scheduler,
            self._run_job,
            self._on_complete,
            self._on_dead_letter,
            Journal(journal_path),
        )

        self.open_round: Optional[str] = None
        self.closed = False
        self.last_cue: Optional[ChoreographyCue] = None
        self._submissions: dict[str, Submission] = {}
        self._receipts: dict[str, dict] = {}
        self._published_originals: list = []

    # lifecycle

    def start(self) -> None:
        if not self.virtual:
            self.scheduler.start_pump()

    def stop(self) -> None:
        if not self.virtual:
            self.scheduler.stop_pump()

    def run_until_idle(self) -> int:
        return self.scheduler.run_until_idle()

    def set_round(self, round_name: Optional[str]) -> None:
        with self.lock:
            if self.closed:
                raise ShowClosed("show is closed")
            if round_name is not None and round_name not in ROUND_TASK:
                raise MalformedPayload(f"unknown round {round_name!r}")
            self.open_round = round_name

    def close_show(self) -> None:
        """Stop admitting work. In virtual mode call finalize() afterwards to
        drain in-flight jobs and seal the manifest."""
        with self.lock:
            self.closed = True
            self.open_round = None
            self.orchestrator.close()

    def finalize(self) -> None:
        if self.virtual:
            self.scheduler.run_until_idle()
        with self.lock:
            self.sink.close()

    # intake

    def register_device(self, device_id: str) -> dict:
        with self.lock:
            if self.closed:
                raise ShowClosed("show is closed")
            assignment = self.ingest.assigner.assign(device_id)
            return {
                "device_id": assignment.device_id,
                "muse_id": assignment.muse_id,
                "seat_group": assignment.seat_group,
            }

    def submit(self, meta: dict, sketch_bytes: bytes) -> dict:
        with self.lock:
            if self.closed:
                raise RoundClosed("show is closed")
            submission, created = self.ingest.accept(
                meta, sketch_bytes, self.scheduler.now_ms(), self.open_round
            )
            if not created:
                return self._receipts[submission.client_token]
            self._submissions[submission.submission_id] = submission
            job = GenerationJob(
                job_id=short_id("j", submission.submission_id),
                submission_id=submission.submission_id,
                task_type=ROUND_TASK[submission.round],
            )
            position = self.orchestrator.enqueue(job)
            receipt = {"submission_id": submission.submission_id, "queue_position": position}
            self._receipts[submission.client_token] = receipt
            return receipt

    # pipeline execution (orchestrator runner)

    def _job_seed(self, job: GenerationJob) -> int:
        material = f"{self.config.seed}:{job.job_id}:{job.attempts}"
        return int(hashlib.sha256(material.encode()).hexdigest()[:12], 16)

    def _run_job(self, job: GenerationJob) -> JobPlan:
        submission = self._submissions[job.submission_id]
        muse = self.profiles[submission.muse_id]
        if self.flaky is not None:
            self.flaky.set_context(job.job_id, job.attempts)
        ctx = PipelineContext(
            job_id=job.job_id,
            seed=self._job_seed(job),
            intermediate_size=self.config.intermediate_size,
            output_size=self.config.output_size,
            frieze_margin=self.config.frieze_margin,
            denoise_steps=self.config.denoise_steps,
        )
        try:
            asset = run_task(job.task_type, submission.sketch.data, muse, self.backends, ctx)
        except BackendFailure as failure:
            partial = getattr(failure, "partial_records", [])
            return JobPlan(
                stages=[StagePlan(r.stage, r.latency_ms) for r in partial],
                failed_stage=failure.stage,
                failure_at_ms=getattr(failure, "elapsed_ms", 0),
                transient=failure.transient,
            )
        return JobPlan(
            stages=[StagePlan(r.stage, r.latency_ms) for r in asset.manifest],
            result=asset,
        )

    # moderation wiring

    def _on_complete(self, job: GenerationJob, asset) -> None:
        with self.lock:
            submission = self._submissions[job.submission_id]
            self.orchestrator.mark_pending_moderation(job)
            ticket = self.gate.submit_for_review(asset, submission.muse_id, job.task_type)
            self.scheduler.call_later(
                self.config.dwell_limit_ms,
                lambda tid=ticket.ticket_id: self._auto_decide(tid),
            )

    def _auto_decide(self, ticket_id: str) -> None:
        with self.lock:
            outcome = self.gate.auto_decide_timeout(
                ticket_id, self.config.dwell_limit_ms, self.config.timeout_policy
            )
            if outcome is not None:
                self._apply_outcome(outcome)

    def decide(self, ticket_id: str, decision: str, operator: str) -> ModerationOutcome:
        with self.lock:
            outcome = self.gate.decide(ticket_id, decision, operator)
            self._apply_outcome(outcome)
            return outcome

    def _apply_outcome(self, outcome: ModerationOutcome) -> None:
        job = self.orchestrator.get_job(outcome.job_id)
        ticket = self.gate.get_ticket(outcome.ticket_id)
        self.orchestrator.mark_decided(job, approved=not outcome.substituted)
        self.sink.publish_asset(
            outcome.released_asset,
            muse_id=ticket.muse_id,
            substituted=outcome.substituted,
            ticket_id=outcome.ticket_id,
            original_asset_id=outcome.original_asset_id,
        )
        self.orchestrator.mark_published(job, substituted=outcome.substituted)
        if not outcome.substituted:
            self._published_originals.append(outcome.released_asset)

    def _on_dead_letter(self, job: GenerationJob) -> None:
        with self.lock:
            submission = self._submissions.get(job.submission_id)
            muse_id = submission.muse_id if submission else min(self.profiles)
            outcome = self.gate.substitute_for_dead_letter(
                job.job_id, muse_id, job.task_type
            )
            self.sink.publish_asset(
                outcome.released_asset,
                muse_id=muse_id,
                substituted=True,
                ticket_id=None,
                original_asset_id=None,
            )

    # oracle

    def oracle_cue(self, seed: int) -> ChoreographyCue:
        with self.lock:
            pool = list(self._published_originals)
            rng = random.Random(
                int(hashlib.sha256(f"{self.config.seed}:cue:{seed}".encode()).hexdigest()[:12], 16)
            )
            k = min(self.config.oracle_sample_size, len(pool))
            sampled = rng.sample(pool, k) if k else []
            cue = select_moves(
                sampled,
                self.library,
                seed,
                self.backends,
                show_id=self.config.show_id,
            )
            self.last_cue = cue
            self.sink.publish_cue(cue.to_dict())
            return cue

    def oracle_score(self, audience: PoseSequence) -> ScoreReport:
        with self.lock:
            if self.last_cue is None:
                raise MalformedPayload("no choreography cue has been issued")
            report = score(audience, self.last_cue, self.library, self.config.score)
            self.sink.publish_feedback(report.composite, "ORACLE")
            return report

    def oracle_override(self, composite: float) -> int:
        with self.lock:
            return self.sink.publish_feedback(composite, "OVERRIDE")

    # views

    def job_state(self, job_id: str) -> dict:
        with self.lock:
            return self.orchestrator.get_job(job_id).to_dict()

    def find_job_for_token(self, client_token: str) -> Optional[str]:
        with self.lock:
            submission = self.ingest.admitted(client_token)
            if submission is None:
                return None
            return short_id("j", submission.submission_id)

    def latency_report(self) -> dict:
        with self.lock:
            return self.orchestrator.latency_report().to_dict()

    def status(self) -> dict:
        with self.lock:
            return {
                "show_id": self.config.show_id,
                "open_round": self.open_round,
                "closed": self.closed,
                "group_sizes": self.ingest.assigner.group_sizes(),
                "queues": {
                    task: {
                        "waiting": self.orchestrator.waiting(task),
                        "in_flight": self.orchestrator.in_flight(task),
                        "pool_size": self.orchestrator.pools[task].size,
                    }
                    for task in self.orchestrator.pools
                },
                "pending_tickets": len(self.gate.pending()),
                "manifest_entries": len(self.sink.entries),
                "t_ms": self.scheduler.now_ms(),
            }

    def fingerprint(self) -> str:
        return self.sink.fingerprint()
