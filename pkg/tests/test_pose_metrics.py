import math
import random

import numpy as np
import pytest

from showrunner.errors import EmptySequence, NoVisibleKeypoints, TooFewFrames
from showrunner.pose import KeypointPose, canonical_pose
from showrunner.pose_metrics import (
    DEFAULT_KEYPOINT_TOLERANCES,
    PoseFrame,
    PoseSequence,
    dtw,
    dtw_alignment,
    energy,
    keypoint_bbox,
    oks,
)


def brute_force_dtw(a, b, metric):
    """Exhaustive minimum over all monotonic alignment paths; no DP reuse."""
    n, m = len(a), len(b)
    best = [math.inf]

    def walk(i, j, total):
        total += metric(a[i], b[j])
        if total >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = total
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, total)
        if i + 1 < n:
            walk(i + 1, j, total)
        if j + 1 < m:
            walk(i, j + 1, total)

    walk(0, 0, 0.0)
    return best[0]


class TestOks:
    def test_identical_frames_give_exactly_one(self):
        pose = canonical_pose()
        assert oks(pose, pose) == 1.0

    def test_closed_form_single_keypoint(self):
        ref = KeypointPose(np.zeros((18, 3)))
        ref.points[:, :2] = canonical_pose().points[:, :2]
        ref.points[0, 2] = 1.0  # only the head is visible
        s = 0.5
        k = DEFAULT_KEYPOINT_TOLERANCES["head"]
        moved = KeypointPose(ref.points.copy())
        moved.points[0, 0] += math.sqrt(2.0) * s * k  # d^2 = 2 s^2 k^2
        assert oks(moved, ref, scale=s) == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_no_visible_keypoints(self):
        ref = canonical_pose()
        ref.points[:, 2] = 0.0
        with pytest.raises(NoVisibleKeypoints):
            oks(canonical_pose(), ref)

    def test_translation_invariance(self):
        rng = np.random.default_rng(0)
        a = canonical_pose()
        b = canonical_pose()
        b.points[:, :2] += rng.normal(0, 0.02, (18, 2))
        base = oks(a, b)
        shift = np.array([1.7, -0.4])
        a.points[:, :2] += shift
        b.points[:, :2] += shift
        assert oks(a, b) == pytest.approx(base, abs=1e-9)

    def test_scale_invariance_with_recomputed_scale(self):
        rng = np.random.default_rng(1)
        a = canonical_pose()
        b = canonical_pose()
        a.points[:, :2] += rng.normal(0, 0.02, (18, 2))
        base = oks(a, b)
        for alpha in (0.25, 3.0, 17.5):
            a2, b2 = a.copy(), b.copy()
            a2.points[:, :2] *= alpha
            b2.points[:, :2] *= alpha
            assert oks(a2, b2) == pytest.approx(base, abs=1e-9)

    def test_monotone_decrease_in_any_single_distance(self):
        rng = np.random.default_rng(2)
        ref = canonical_pose()
        frame = canonical_pose()
        frame.points[:, :2] += rng.normal(0, 0.01, (18, 2))
        base = oks(frame, ref)
        for i in range(18):
            worse = frame.copy()
            # push keypoint i directly away from its reference position
            d = worse.points[i, :2] - ref.points[i, :2]
            norm = np.linalg.norm(d)
            direction = d / norm if norm > 0 else np.array([1.0, 0.0])
            worse.points[i, :2] += 0.05 * direction
            assert oks(worse, ref) < base

    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            oks(canonical_pose(), canonical_pose(), scale=0.0)


class TestDtw:
    def test_identical_sequences_cost_zero(self):
        seq = PoseSequence([PoseFrame(0.0, canonical_pose()), PoseFrame(1.0, canonical_pose())])
        assert dtw(seq, seq) == 0.0

    def test_one_dimensional_example(self):
        assert dtw([0, 2], [0, 1, 2], frame_metric=lambda a, b: abs(a - b)) == 1.0

    def test_swapped_inputs_same_cost_with_symmetric_metric(self):
        rng = random.Random(3)
        a = [rng.random() for _ in range(5)]
        b = [rng.random() for _ in range(4)]
        metric = lambda x, y: abs(x - y)
        assert dtw(a, b, metric) == pytest.approx(dtw(b, a, metric), abs=0)

    def test_empty_sequence_raises(self):
        with pytest.raises(EmptySequence):
            dtw([], [1], frame_metric=lambda a, b: abs(a - b))

    def test_exact_against_brute_force_enumeration(self):
        rng = random.Random(7)
        metric = lambda x, y: abs(x - y)
        for _ in range(300):
            n, m = rng.randint(1, 6), rng.randint(1, 6)
            a = [rng.uniform(-5, 5) for _ in range(n)]
            b = [rng.uniform(-5, 5) for _ in range(m)]
            assert dtw(a, b, metric) == pytest.approx(
                brute_force_dtw(a, b, metric), abs=1e-12
            )

    def test_normalized_divides_by_path_length(self):
        a, b = [0, 2], [0, 1, 2]
        metric = lambda x, y: abs(x - y)
        cost, path = dtw_alignment(a, b, metric)
        assert cost == 1.0
        assert dtw(a, b, metric, normalized=True) == pytest.approx(cost / len(path))

    def test_path_is_monotone_and_connected(self):
        rng = random.Random(9)
        a = [rng.random() for _ in range(6)]
        b = [rng.random() for _ in range(5)]
        _, path = dtw_alignment(a, b, lambda x, y: abs(x - y))
        assert path[0] == (0, 0) and path[-1] == (5, 4)
        for (i1, j1), (i2, j2) in zip(path, path[1:]):
            assert (i2 - i1, j2 - j1) in {(0, 1), (1, 0), (1, 1)}


def grid_pose(corner_a=(0.0, 0.0), corner_b=None) -> KeypointPose:
    """All joints visible; joints 1 and 2 pin the bbox corners."""
    c = 1.0 / math.sqrt(2.0)
    corner_b = corner_b or (c, c)
    pose = KeypointPose(np.zeros((18, 3)))
    pose.points[:, 2] = 1.0
    pose.points[:, 0] = corner_a[0]
    pose.points[:, 1] = corner_a[1]
    pose.points[1, :2] = corner_a
    pose.points[2, :2] = corner_b
    return pose


class TestEnergy:
    def test_static_sequence_is_exactly_zero(self):
        frames = [PoseFrame(0.5 * k, canonical_pose()) for k in range(8)]
        assert energy(PoseSequence(frames)) == 0.0

    def test_single_joint_unit_move_gives_one_eighteenth(self):
        # bbox corners pinned by static joints 1 and 2 (diagonal exactly 1);
        # joint 0 travels between the corners: distance 1 over 1 s.
        c = 1.0 / math.sqrt(2.0)
        a = grid_pose()
        b = grid_pose()
        b.points[0, :2] = (c, c)
        seq = PoseSequence([PoseFrame(0.0, a), PoseFrame(1.0, b)])
        assert energy(seq) == pytest.approx(1.0 / 18.0, abs=1e-12)

    def test_degree_one_homogeneity_in_displacement(self):
        base = canonical_pose()
        seqs = []
        for factor in (1.0, 2.0):
            frames = []
            for k in range(5):
                p = base.copy()
                p.points[:, 0] += factor * 0.01 * k  # rigid translation per frame
                frames.append(PoseFrame(0.5 * k, p))
            seqs.append(PoseSequence(frames))
        assert energy(seqs[1]) == pytest.approx(2.0 * energy(seqs[0]), abs=1e-12)

    def test_uniform_scale_invariance(self):
        rng = np.random.default_rng(5)
        frames = []
        base = canonical_pose()
        for k in range(6):
            p = base.copy()
            p.points[:, :2] += rng.normal(0, 0.02, (18, 2))
            frames.append(PoseFrame(0.5 * k, p))
        seq = PoseSequence(frames)
        base_energy = energy(seq)
        for alpha in (0.5, 4.0):
            scaled = PoseSequence(
                [
                    PoseFrame(f.t_s, KeypointPose(np.column_stack([f.pose.points[:, :2] * alpha, f.pose.points[:, 2]])))
                    for f in seq.frames
                ]
            )
            assert energy(scaled) == pytest.approx(base_energy, abs=1e-9)

    def test_too_few_frames(self):
        with pytest.raises(TooFewFrames):
            energy(PoseSequence([PoseFrame(0.0, canonical_pose())]))


class TestSequencePlumbing:
    def test_timestamps_must_increase(self):
        with pytest.raises(ValueError):
            PoseSequence([PoseFrame(1.0, canonical_pose()), PoseFrame(1.0, canonical_pose())])

    def test_jsonl_round_trip(self):
        frames = [PoseFrame(0.5 * k, canonical_pose()) for k in range(3)]
        seq = PoseSequence(frames)
        again = PoseSequence.from_jsonl(seq.to_jsonl())
        assert len(again) == 3
        assert again.frames[2].t_s == 1.0

    def test_bbox_visible_only(self):
        pose = canonical_pose()
        pose.points[0, 0] = 50.0
        pose.points[0, 2] = 0.0  # far-away head is invisible
        w, h = keypoint_bbox(pose)
        assert w < 1.0
