"""Acceptance suite: one test per shipped criterion, each printing a
PASS/FAIL line (run with -s or -v to see them). Tolerances are pinned here,
not configurable.
"""

import json
import math
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chi2

from showrunner.backends import MockBackend
from showrunner.bench import BenchConfig, BenchWorkload, generate_workload, run_bench
from showrunner.digests import sha256_hex
from showrunner.errors import GateViolation
from showrunner.moderation import ModerationGate, verify_audit
from showrunner.oracle import select_moves
from showrunner.pipelines import GeneratedAsset, PipelineContext, StageRecord, run_task1
from showrunner.pose import canonical_pose, control_schedule, normalize_proportions
from showrunner.pose_metrics import (
    DEFAULT_KEYPOINT_TOLERANCES,
    PoseFrame,
    PoseSequence,
    dtw,
    energy,
    oks,
)
from showrunner.recording import ShowRecording, replay
from showrunner.sink import StageSink

from conftest import FIXTURES, make_profiles, sketch
from refsim import RefJob, simulate
from test_pose_metrics import brute_force_dtw, grid_pose


def report(n, text):
    print(f"\n[criterion {n}] PASS — {text}")


class TestCriterion1QueueingOracleEquivalence:
    def test_fifty_random_configs_match_reference_exactly(self):
        t0 = time.perf_counter()
        rng = random.Random(20250809)
        total_jobs = 0
        for trial in range(50):
            tasks = ["T1", "T2", "T3"]
            pools = {t: rng.randint(1, 16) for t in tasks}
            workloads = []
            jobs_left = rng.randint(1, 200)
            for t in tasks:
                count = rng.randint(0, jobs_left)
                jobs_left -= count
                if count:
                    lo = rng.randint(0, 20_000)
                    workloads.append(
                        BenchWorkload(t, count, rng.randint(0, 100_000), lo, lo + rng.randint(0, 30_000))
                    )
            if not workloads:
                workloads.append(BenchWorkload("T1", 1, 1000, 500, 1500))
            config = BenchConfig(pool_sizes=pools, workloads=workloads, seed=rng.getrandbits(32))
            jobs = generate_workload(config)
            total_jobs += len(jobs)
            result = run_bench(config)
            expected = simulate(
                [RefJob(j.job_id, j.task, j.arrival_ms, j.service_ms) for j in jobs], pools
            )
            for j in jobs:
                got = result.completions[j.job_id]
                want = expected[j.job_id]
                assert got["start_ms"] == want.start_ms, (trial, j.job_id)
                assert got["completion_ms"] == want.completion_ms, (trial, j.job_id)
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"took {elapsed:.1f}s"
        report(1, f"50 configs, {total_jobs} jobs, exact completion-time match in {elapsed:.1f}s")


class TestCriterion2PaperScaleLatencyRegime:
    def test_production_scale_config_matches_oracle(self):
        t0 = time.perf_counter()
        config = BenchConfig(
            pool_sizes={"T1": 8, "T2": 8, "T3": 8},
            workloads=[BenchWorkload("T1", 33, 120_000, 20_000, 30_000)],
            seed=1,
        )
        # the full production bands; only T1 receives jobs in this scenario
        bands = {"T1": (20_000, 30_000), "T2": (40_000, 60_000), "T3": (20_000, 30_000)}
        jobs = generate_workload(config)
        result = run_bench(config)
        for j in jobs:
            lo, hi = bands[j.task]
            assert lo <= j.service_ms <= hi, f"{j.job_id} service {j.service_ms}"
            assert result.completions[j.job_id]["service_ms"] == j.service_ms
        expected = simulate(
            [RefJob(j.job_id, j.task, j.arrival_ms, j.service_ms) for j in jobs],
            config.pool_sizes,
        )
        durations = sorted(c.end_to_end_ms for c in expected.values())
        rank = max(1, math.ceil(0.95 * len(durations)))
        oracle_p95 = durations[rank - 1]
        assert result.report["p95_ms"] == oracle_p95
        oracle_violations = sorted(
            jid for jid, c in expected.items() if c.end_to_end_ms > 60_000
        )
        assert result.report["budget_violations"] == oracle_violations
        assert result.report["budget_window_ms"] == [30_000, 60_000]
        for j in jobs:
            assert (
                result.completions[j.job_id]["completion_ms"]
                == expected[j.job_id].completion_ms
            )
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        report(
            2,
            f"33 T1 jobs, services within bands, p95={oracle_p95}ms, "
            f"{len(oracle_violations)} violations, oracle-exact in {elapsed:.2f}s",
        )


class TestCriterion3DtwExactness:
    def test_thousand_random_pairs_and_worked_example(self):
        metric = lambda a, b: abs(a - b)
        assert dtw([0, 2], [0, 1, 2], frame_metric=metric) == 1.0
        rng = random.Random(99)
        for _ in range(1000):
            n, m = rng.randint(1, 6), rng.randint(1, 6)
            a = [rng.uniform(-10, 10) for _ in range(n)]
            b = [rng.uniform(-10, 10) for _ in range(m)]
            got = dtw(a, b, frame_metric=metric)
            want = brute_force_dtw(a, b, metric)
            assert got == want, (a, b, got, want)
        report(3, "1000 random pairs equal exhaustive enumeration; [0,2] vs [0,1,2] = 1")


class TestCriterion4OksProperties:
    def test_identity_invariance_monotonicity_closed_form(self):
        rng = np.random.default_rng(17)
        ref = canonical_pose()
        frame = canonical_pose()
        frame.points[:, :2] += rng.normal(0, 0.02, (18, 2))

        assert abs(oks(ref, ref) - 1.0) <= 1e-9

        base = oks(frame, ref)
        shift = np.array([3.3, -1.1])
        f2, r2 = frame.copy(), ref.copy()
        f2.points[:, :2] += shift
        r2.points[:, :2] += shift
        assert abs(oks(f2, r2) - base) <= 1e-9

        for alpha in (0.2, 5.0):
            f3, r3 = frame.copy(), ref.copy()
            f3.points[:, :2] *= alpha
            r3.points[:, :2] *= alpha
            assert abs(oks(f3, r3) - base) <= 1e-9

        for i in range(18):
            worse = frame.copy()
            d = worse.points[i, :2] - ref.points[i, :2]
            norm = np.linalg.norm(d)
            direction = d / norm if norm > 0 else np.array([1.0, 0.0])
            worse.points[i, :2] += 0.04 * direction
            assert oks(worse, ref) < base

        single = canonical_pose()
        single.points[:, 2] = 0.0
        single.points[0, 2] = 1.0
        s, k = 0.7, DEFAULT_KEYPOINT_TOLERANCES["head"]
        moved = single.copy()
        moved.points[0, 0] += math.sqrt(2.0) * s * k
        assert abs(oks(moved, single, scale=s) - math.exp(-1.0)) <= 1e-9
        report(4, "identity=1, translation/scale invariant (1e-9), strictly monotone, e^-1 closed form")


class TestCriterion5EnergyProperties:
    def test_static_homogeneity_scale_invariance(self):
        static = PoseSequence([PoseFrame(0.5 * k, canonical_pose()) for k in range(10)])
        assert energy(static) == 0.0

        base_pose = canonical_pose()

        def translated(factor):
            frames = []
            for k in range(6):
                p = base_pose.copy()
                p.points[:, 0] += factor * 0.02 * k
                frames.append(PoseFrame(0.5 * k, p))
            return PoseSequence(frames)

        e1, e2 = energy(translated(1.0)), energy(translated(2.0))
        assert abs(e2 - 2.0 * e1) <= 1e-12

        rng = np.random.default_rng(23)
        frames = []
        for k in range(6):
            p = base_pose.copy()
            p.points[:, :2] += rng.normal(0, 0.02, (18, 2))
            frames.append(PoseFrame(0.5 * k, p))
        seq = PoseSequence(frames)
        base = energy(seq)
        for alpha in (0.3, 7.0):
            scaled_frames = [
                PoseFrame(
                    f.t_s,
                    type(f.pose)(
                        np.column_stack([f.pose.points[:, :2] * alpha, f.pose.points[:, 2]])
                    ),
                )
                for f in seq.frames
            ]
            assert abs(energy(PoseSequence(scaled_frames)) - base) <= 1e-9
        report(5, "static=0 exactly, degree-1 homogeneous (1e-12), scale invariant (1e-9)")


class TestCriterion6ModerationGateFuzz:
    def test_ten_thousand_event_interleaving(self):
        rng = random.Random(606)
        profiles = make_profiles()
        clock = {"t": 0}
        gate = ModerationGate(profiles, lambda: clock["t"])
        sink = StageSink("fuzz", lambda: clock["t"], gate.release_kind)
        policy = {"T1": "APPROVE", "T2": "REJECT", "T3": "APPROVE"}
        dwell = 20_000

        def fake_asset(i):
            payload = f"payload-{i}".encode()
            record = StageRecord(
                stage="GEN", input_digests={}, output_digest=sha256_hex(payload),
                backend_id="fuzz", latency_ms=1,
            )
            return GeneratedAsset(
                asset_id=f"a-{i:05d}", job_id=f"j-{i:05d}",
                kind=rng.choice(["BACKGROUND_IMAGE", "MUSE_TEXTURE", "MESH"]),
                payload=payload, manifest=[record],
            )

        def apply(outcome, ticket_id=None, original=None):
            sink.publish_asset(
                outcome.released_asset,
                muse_id=1,
                substituted=outcome.substituted,
                ticket_id=ticket_id,
                original_asset_id=original,
            )

        events = 0
        made = 0
        dead = 0
        reject_count = 0
        leak_attempts = 0
        open_tickets = []
        while events < 10_000:
            events += 1
            clock["t"] += rng.randint(0, 900)
            roll = rng.random()
            if roll < 0.42:
                asset = fake_asset(made)
                made += 1
                task = rng.choice(["T1", "T2", "T3"])
                ticket = gate.submit_for_review(asset, rng.randint(1, 7), task)
                open_tickets.append(ticket.ticket_id)
                if rng.random() < 0.05:
                    # an unapproved publish must bounce off the gate
                    leak_attempts += 1
                    with pytest.raises(GateViolation):
                        sink.publish_asset(asset, 1, substituted=False)
            elif roll < 0.70 and open_tickets:
                tid = open_tickets.pop(rng.randrange(len(open_tickets)))
                ticket = gate.get_ticket(tid)
                if ticket.state != "PENDING":
                    continue
                decision = "APPROVE" if rng.random() < 0.7 else "REJECT"
                outcome = gate.decide(tid, decision, "op-fuzz")
                if outcome.substituted:
                    reject_count += 1
                apply(outcome, tid, ticket.asset_id)
            elif roll < 0.9 and open_tickets:
                tid = open_tickets[rng.randrange(len(open_tickets))]
                outcome = gate.auto_decide_timeout(tid, dwell, policy)
                if outcome is not None:
                    open_tickets.remove(tid)
                    if outcome.substituted:
                        reject_count += 1
                    apply(outcome, tid, gate.get_ticket(tid).asset_id)
            else:
                outcome = gate.substitute_for_dead_letter(f"dl-{dead:05d}", rng.randint(1, 7), "T2")
                dead += 1
                apply(outcome)

        # drain: time out everything left pending
        clock["t"] += dwell + 1
        for tid in list(open_tickets):
            outcome = gate.auto_decide_timeout(tid, dwell, policy)
            if outcome is not None:
                if outcome.substituted:
                    reject_count += 1
                apply(outcome, tid, gate.get_ticket(tid).asset_id)

        # zero unapproved assets in the sink manifest
        substitute_publishes = {}
        for entry in sink.manifest_dicts():
            assert entry["kind"] == "ASSET"
            assert entry["detail"]["release"] in ("APPROVED", "SUBSTITUTED")
            if entry["detail"]["substituted"]:
                job = entry["detail"]["job_id"]
                substitute_publishes[job] = substitute_publishes.get(job, 0) + 1
        # every REJECT and dead-letter produced exactly one fallback publish
        assert all(v == 1 for v in substitute_publishes.values())
        assert len(substitute_publishes) == reject_count + dead
        assert verify_audit(gate.audit.entries)
        report(
            6,
            f"{events} events ({made} submits, {reject_count} rejects, {dead} dead-letters, "
            f"{leak_attempts} blocked leaks): no unapproved publishes, substitution exactly-once, audit intact",
        )


class TestCriterion7ReplayDeterminism:
    def test_five_replays_and_process_restarts_match_golden(self):
        golden = (FIXTURES / "golden_fingerprint.txt").read_text().strip()
        recording = ShowRecording.load(FIXTURES / "sample_recording.json")
        fingerprints = [replay(recording).fingerprint for _ in range(3)]
        assert set(fingerprints) == {golden}, fingerprints

        # two more replays in fresh processes via the CLI
        for _ in range(2):
            proc = subprocess.run(
                [
                    sys.executable, "-m", "showrunner.cli", "replay",
                    str(FIXTURES / "sample_recording.json"),
                    "--expect-fingerprint", golden,
                ],
                capture_output=True, text=True, cwd=str(FIXTURES.parent),
            )
            assert proc.returncode == 0, proc.stderr
            assert json.loads(proc.stdout)["fingerprint"] == golden
        report(7, f"5 replays across 3 processes -> {golden[:16]}…")


class TestCriterion8OracleCue:
    def test_triples_distinct_fixed_and_chi_square_uniform(self, sample_library):
        cue_a = select_moves([], sample_library, 42, MockBackend())
        cue_b = select_moves([], sample_library, 42, MockBackend())
        assert len(set(cue_a.selected_move_ids)) == 3
        assert cue_a.selected_move_ids == cue_b.selected_move_ids

        counts = {}
        n = 10_000
        for seed in range(n):
            cue = select_moves([], sample_library, seed, MockBackend())
            ids = cue.selected_move_ids
            assert len(set(ids)) == 3
            key = tuple(sorted(ids))
            counts[key] = counts.get(key, 0) + 1
        cells = 220
        assert len(counts) <= cells
        expected = n / cells
        stat = sum((c - expected) ** 2 / expected for c in counts.values())
        stat += (cells - len(counts)) * expected  # unobserved triples
        p_value = chi2.sf(stat, cells - 1)
        assert p_value > 0.01, f"chi2={stat:.1f}, p={p_value:.4f}"
        report(8, f"always 3 distinct of 12; seed-stable; chi2 p={p_value:.3f} over {len(counts)}/220 triples")


class TestCriterion9PipelineStageFidelity:
    def test_intermediate_size_schedule_and_idempotence(self):
        profiles = make_profiles(1)
        mock = MockBackend(keypoint_wild_percent=0)
        from showrunner.imaging import png_decode

        for i in range(15):
            ctx = PipelineContext(job_id=f"j-{i}", seed=i, output_size=(640, 480))
            asset = run_task1(sketch(1000 + i), profiles[1], mock, ctx)
            stylize = asset.manifest[1]
            assert stylize.stage == "STYLIZE"
            assert stylize.detail["size"] == [512, 384]

        for n in list(range(4, 64)) + [100, 255, 512]:
            cs = control_schedule(n)
            assert (cs.pose_first, cs.pose_last) == (1, n // 2)
            pose_steps = set(cs.pose_steps())
            identity_steps = set(cs.identity_steps())
            assert pose_steps and pose_steps < identity_steps

        rng = np.random.default_rng(31337)
        worst = 0.0
        for _ in range(1000):
            pose = canonical_pose()
            pose.points[:, :2] += rng.normal(0, 0.1, (18, 2))
            once = normalize_proportions(pose)
            twice = normalize_proportions(once)
            worst = max(worst, float(np.abs(twice.points - once.points).max()))
        assert worst <= 1e-9, worst
        report(9, f"512x384 intermediates recorded; schedule [1, N//2] ⊂ [0, N); idempotence worst drift {worst:.2e}")
