"""Choreography scoring metrics over timestamped skeletal sequences.

Three raw measures feed the crowd score: keypoint similarity per aligned
frame pair (accuracy), the minimal monotonic alignment cost between the
audience and reference timelines (timing), and scale-normalized mean joint
speed (energy).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence, NoVisibleKeypoints, TooFewFrames
from .pose import KP_INDEX, KeypointPose, N_KEYPOINTS

# Per-keypoint distance tolerances: the widely used 17-keypoint table mapped
# onto this skeleton (head takes the nose value), plus 0.08 for the neck.
DEFAULT_KEYPOINT_TOLERANCES = {
    "head": 0.026,
    "neck": 0.080,
    "l_shoulder": 0.079,
    "r_shoulder": 0.079,
    "l_elbow": 0.072,
    "r_elbow": 0.072,
    "l_wrist": 0.062,
    "r_wrist": 0.062,
    "l_hip": 0.107,
    "r_hip": 0.107,
    "l_knee": 0.087,
    "r_knee": 0.087,
    "l_ankle": 0.089,
    "r_ankle": 0.089,
    "l_eye": 0.025,
    "r_eye": 0.025,
    "l_ear": 0.035,
    "r_ear": 0.035,
}


def tolerance_vector(tolerances=None) -> np.ndarray:
    table = DEFAULT_KEYPOINT_TOLERANCES if tolerances is None else tolerances
    return np.array([table[name] for name in KP_INDEX], dtype=float)


@dataclass
class PoseFrame:
    t_s: float
    pose: KeypointPose

    def to_record(self) -> dict:
        return {"t_s": self.t_s, "kp": self.pose.to_list()}

    @classmethod
    def from_record(cls, rec: dict) -> "PoseFrame":
        return cls(t_s=float(rec["t_s"]), pose=KeypointPose.from_list(rec["kp"]))


class PoseSequence:
    """Ordered skeletal frames with strictly increasing timestamps."""

    def __init__(self, frames: list[PoseFrame]):
        for a, b in zip(frames, frames[1:]):
            if b.t_s <= a.t_s:
                raise ValueError("frame timestamps must be strictly increasing")
        self.frames = list(frames)

    def __len__(self) -> int:
        return len(self.frames)

    def duration_s(self) -> float:
        if not self.frames:
            return 0.0
        return self.frames[-1].t_s - self.frames[0].t_s

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(f.to_record()) for f in self.frames) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "PoseSequence":
        frames = [
            PoseFrame.from_record(json.loads(line))
            for line in text.splitlines()
            if line.strip()
        ]
        return cls(frames)

    @classmethod
    def from_records(cls, records) -> "PoseSequence":
        return cls([PoseFrame.from_record(r) for r in records])

    def to_records(self) -> list[dict]:
        return [f.to_record() for f in self.frames]


def concatenate(sequences: list[PoseSequence], gap_s: float = 0.5) -> PoseSequence:
    """Join sequences on one timeline, inserting a rest gap between them."""
    frames: list[PoseFrame] = []
    cursor = 0.0
    for i, seq in enumerate(sequences):
        if not seq.frames:
            continue
        start = seq.frames[0].t_s
        offset = cursor + (gap_s if frames else 0.0)
        for f in seq.frames:
            frames.append(PoseFrame(t_s=f.t_s - start + offset, pose=f.pose.copy()))
        cursor = frames[-1].t_s
    return PoseSequence(frames)


def _visible(pose: KeypointPose) -> np.ndarray:
    return pose.points[:, 2] > 0.0


def keypoint_bbox(pose: KeypointPose, visible_only: bool = True):
    """(width, height) of the keypoint bounding box, or None if nothing visible."""
    mask = _visible(pose) if visible_only else np.ones(N_KEYPOINTS, dtype=bool)
    if not mask.any():
        return None
    xy = pose.points[mask, :2]
    return (
        float(xy[:, 0].max() - xy[:, 0].min()),
        float(xy[:, 1].max() - xy[:, 1].min()),
    )


def oks(
    frame: KeypointPose,
    ref_frame: KeypointPose,
    tolerances=None,
    scale: float | None = None,
) -> float:
    """Keypoint similarity in [0, 1] against a reference frame.

    Each reference-visible keypoint i contributes exp(-d_i^2 / (2 s^2 k_i^2)),
    where d_i is the Euclidean distance, k_i its tolerance constant, and s the
    object scale (sqrt of the reference keypoint bounding-box area unless
    supplied). Invisible reference keypoints (confidence 0) are excluded.
    """
    vis = _visible(ref_frame)
    if not vis.any():
        raise NoVisibleKeypoints("reference frame has no visible keypoints")
    if scale is None:
        w, h = keypoint_bbox(ref_frame)
        scale = math.sqrt(w * h)
    if not scale > 0:
        raise ValueError("object scale must be positive")
    k = tolerance_vector(tolerances)
    d2 = ((frame.points[:, :2] - ref_frame.points[:, :2]) ** 2).sum(axis=1)
    terms = np.exp(-d2[vis] / (2.0 * scale * scale * k[vis] ** 2))
    return float(terms.sum() / vis.sum())


def _sequence_bbox_diagonal(seq: PoseSequence) -> float:
    xs, ys = [], []
    for f in seq.frames:
        mask = _visible(f.pose)
        if mask.any():
            xy = f.pose.points[mask, :2]
            xs.extend((xy[:, 0].min(), xy[:, 0].max()))
            ys.extend((xy[:, 1].min(), xy[:, 1].max()))
    if not xs:
        return 0.0
    return math.hypot(max(xs) - min(xs), max(ys) - min(ys))


def pose_frame_metric(seq: PoseSequence, ref: PoseSequence):
    """Default frame cost: mean keypoint distance over reference-visible
    keypoints, normalized by the reference sequence's bounding-box diagonal."""
    diag = _sequence_bbox_diagonal(ref)
    norm = diag if diag > 0 else 1.0

    def metric(frame: PoseFrame, ref_frame: PoseFrame) -> float:
        vis = _visible(ref_frame.pose)
        if not vis.any():
            return 0.0
        d = np.linalg.norm(
            frame.pose.points[vis, :2] - ref_frame.pose.points[vis, :2], axis=1
        )
        return float(d.mean()) / norm

    return metric


def _frames_of(seq) -> list:
    return seq.frames if isinstance(seq, PoseSequence) else list(seq)


def dtw_alignment(seq, ref, frame_metric=None):
    """Dynamic time warping between two sequences.

    Returns (cost, path): the minimal total frame cost over monotonic
    alignments and one optimal alignment path as (i, j) index pairs. With no
    explicit frame_metric, both inputs must be PoseSequences and the default
    pose metric is used.
    """
    a = _frames_of(seq)
    b = _frames_of(ref)
    if not a or not b:
        raise EmptySequence("cannot align an empty sequence")
    if frame_metric is None:
        if not (isinstance(seq, PoseSequence) and isinstance(ref, PoseSequence)):
            raise TypeError("default frame metric requires PoseSequence inputs")
        frame_metric = pose_frame_metric(seq, ref)

    n, m = len(a), len(b)
    cost = np.empty((n, m), dtype=float)
    for i in range(n):
        for j in range(m):
            cost[i, j] = frame_metric(a[i], b[j])

    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = cost[0, j] + acc[0, j - 1]
    for i in range(1, n):
        acc[i, 0] = cost[i, 0] + acc[i - 1, 0]
        for j in range(1, m):
            acc[i, j] = cost[i, j] + min(
                acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            )

    # Backtrack one optimal path, preferring diagonal, then vertical, then
    # horizontal moves on ties, so the path (and its length) is deterministic.
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            candidates = (
                (acc[i - 1, j - 1], i - 1, j - 1),
                (acc[i - 1, j], i - 1, j),
                (acc[i, j - 1], i, j - 1),
            )
            best = min(c[0] for c in candidates)
            for value, pi, pj in candidates:
                if value == best:
                    i, j = pi, pj
                    break
        path.append((i, j))
    path.reverse()
    return float(acc[n - 1, m - 1]), path


def dtw(seq, ref, frame_metric=None, normalized: bool = False) -> float:
    """DTW cost; with normalized=True, cost divided by the optimal path length."""
    cost, path = dtw_alignment(seq, ref, frame_metric)
    if normalized:
        return cost / len(path)
    return cost


def energy(seq: PoseSequence) -> float:
    """Scale-normalized mean joint speed.

    Mean of ||p_next - p|| / dt over consecutive frame pairs and joints
    visible at both ends, divided by the sequence's mean per-frame keypoint
    bounding-box diagonal. Zero when nothing moves.
    """
    if len(seq) < 2:
        raise TooFewFrames("energy needs at least 2 frames")
    speeds = []
    for a, b in zip(seq.frames, seq.frames[1:]):
        dt = b.t_s - a.t_s
        vis = _visible(a.pose) & _visible(b.pose)
        if not vis.any():
            continue
        d = np.linalg.norm(b.pose.points[vis, :2] - a.pose.points[vis, :2], axis=1)
        speeds.extend(d / dt)
    if not speeds:
        return 0.0

    diags = []
    for f in seq.frames:
        box = keypoint_bbox(f.pose)
        if box is not None:
            diags.append(math.hypot(*box))
    mean_diag = sum(diags) / len(diags) if diags else 0.0
    if mean_diag == 0.0:
        # A skeleton with no spatial extent carries no scale information.
        return 0.0
    return float(np.mean(speeds)) / mean_diag
