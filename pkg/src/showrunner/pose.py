"""2-D keypoint skeletons: proportion normalization, validity, control schedule.

The skeleton is an 18-keypoint body (head, neck, paired eyes/ears/shoulders/
elbows/wrists/hips/knees/ankles). Limb lengths are expressed as ratios to the
torso (neck to mid-hip), with defaults drawn from standard artistic figure
proportions; shows can override the table in config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePose, TooFewSteps

KEYPOINT_NAMES = (
    "head",
    "neck",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
    "l_eye",
    "r_eye",
    "l_ear",
    "r_ear",
)
KP_INDEX = {name: i for i, name in enumerate(KEYPOINT_NAMES)}
N_KEYPOINTS = len(KEYPOINT_NAMES)

# Limb ratios relative to torso length (neck -> mid-hip == 1.0).
# hip_half is each hip's offset from the mid-hip point.
DEFAULT_LIMB_RATIOS = {
    "neck:head": 0.30,
    "head:l_eye": 0.12,
    "head:r_eye": 0.12,
    "l_eye:l_ear": 0.10,
    "r_eye:r_ear": 0.10,
    "neck:l_shoulder": 0.45,
    "neck:r_shoulder": 0.45,
    "l_shoulder:l_elbow": 0.75,
    "r_shoulder:r_elbow": 0.75,
    "l_elbow:l_wrist": 0.70,
    "r_elbow:r_wrist": 0.70,
    "hip_half": 0.30,
    "l_hip:l_knee": 1.00,
    "r_hip:r_knee": 1.00,
    "l_knee:l_ankle": 0.95,
    "r_knee:r_ankle": 0.95,
}

# Traversal order: each child is positioned after its parent has moved.
SEGMENT_TREE = (
    ("neck", "head"),
    ("head", "l_eye"),
    ("head", "r_eye"),
    ("l_eye", "l_ear"),
    ("r_eye", "r_ear"),
    ("neck", "l_shoulder"),
    ("neck", "r_shoulder"),
    ("l_shoulder", "l_elbow"),
    ("r_shoulder", "r_elbow"),
    ("l_elbow", "l_wrist"),
    ("r_elbow", "r_wrist"),
    ("l_hip", "l_knee"),
    ("r_hip", "r_knee"),
    ("l_knee", "l_ankle"),
    ("r_knee", "r_ankle"),
)

# Unit directions used when an input segment has zero length and therefore no
# direction of its own (upright standing figure, y grows downward).
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
CANONICAL_DIRECTIONS = {
    "neck:head": (0.0, -1.0),
    "head:l_eye": (-0.6, -0.8),
    "head:r_eye": (0.6, -0.8),
    "l_eye:l_ear": (-_INV_SQRT2, _INV_SQRT2),
    "r_eye:r_ear": (_INV_SQRT2, _INV_SQRT2),
    "neck:l_shoulder": (-1.0, 0.0),
    "neck:r_shoulder": (1.0, 0.0),
    "l_shoulder:l_elbow": (0.0, 1.0),
    "r_shoulder:r_elbow": (0.0, 1.0),
    "l_elbow:l_wrist": (0.0, 1.0),
    "r_elbow:r_wrist": (0.0, 1.0),
    "hip_half": (-1.0, 0.0),
    "l_hip:l_knee": (0.0, 1.0),
    "r_hip:r_knee": (0.0, 1.0),
    "l_knee:l_ankle": (0.0, 1.0),
    "r_knee:r_ankle": (0.0, 1.0),
}


@dataclass
class KeypointPose:
    """18 named 2-D keypoints with confidences, as an (18, 3) array of x, y, c."""

    points: np.ndarray = field(
        default_factory=lambda: np.zeros((N_KEYPOINTS, 3), dtype=float)
    )

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape != (N_KEYPOINTS, 3):
            raise ValueError(f"expected ({N_KEYPOINTS}, 3) keypoints array")
        if not np.isfinite(self.points[:, :2]).all():
            raise ValueError("keypoint coordinates must be finite")
        conf = self.points[:, 2]
        if ((conf < 0) | (conf > 1)).any() or not np.isfinite(conf).all():
            raise ValueError("confidence must lie in [0, 1]")

    def xy(self, name: str) -> np.ndarray:
        return self.points[KP_INDEX[name], :2]

    def confidence(self, name: str) -> float:
        return float(self.points[KP_INDEX[name], 2])

    def mid_hip(self) -> np.ndarray:
        return 0.5 * (self.xy("l_hip") + self.xy("r_hip"))

    def torso_length(self) -> float:
        return float(np.linalg.norm(self.xy("neck") - self.mid_hip()))

    def copy(self) -> "KeypointPose":
        return KeypointPose(self.points.copy())

    def to_list(self) -> list:
        return [[float(x), float(y), float(c)] for x, y, c in self.points]

    @classmethod
    def from_list(cls, rows) -> "KeypointPose":
        return cls(np.asarray(rows, dtype=float))


def canonical_pose(torso_length: float = 0.22, ratios=None) -> KeypointPose:
    """A standing figure whose segments sit exactly at the canonical ratios."""
    ratios = dict(DEFAULT_LIMB_RATIOS if ratios is None else ratios)
    T = torso_length
    pose = KeypointPose()
    pose.points[:, 2] = 1.0
    neck = np.array([0.5, 0.30])
    mid = neck + np.array([0.0, T])

    def put(name, xy):
        pose.points[KP_INDEX[name], :2] = xy

    put("neck", neck)
    hip_off = np.array(CANONICAL_DIRECTIONS["hip_half"]) * (ratios["hip_half"] * T)
    put("l_hip", mid + hip_off)
    put("r_hip", mid - hip_off)
    for parent, child in SEGMENT_TREE:
        key = f"{parent}:{child}"
        d = np.array(CANONICAL_DIRECTIONS[key])
        put(child, pose.xy(parent) + d * (ratios[key] * T))
    return pose


def _unit(vec: np.ndarray, fallback_key: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return np.array(CANONICAL_DIRECTIONS[fallback_key])
    return vec / norm


def normalize_proportions(pose: KeypointPose, ratios=None) -> KeypointPose:
    """Rescale every limb segment about its proximal joint to the canonical
    ratio of torso length, preserving segment directions.

    The torso itself (neck and mid-hip) is the yardstick and does not move,
    and the hip pair is scaled symmetrically about mid-hip, so the operation
    is a fixed point on already-canonical poses and idempotent on all others.
    Raises DegeneratePose when the torso has zero length.
    """
    ratios = dict(DEFAULT_LIMB_RATIOS if ratios is None else ratios)
    mid = pose.mid_hip()
    neck = pose.xy("neck")
    T = float(np.linalg.norm(neck - mid))
    if T == 0.0:
        raise DegeneratePose("zero-length torso")

    out = pose.copy()

    def put(name, xy):
        out.points[KP_INDEX[name], :2] = xy

    # Hips: equal-and-opposite offsets about mid-hip keep the midpoint (and
    # hence the torso) exactly where it was.
    u = _unit(pose.xy("l_hip") - mid, "hip_half")
    half = ratios["hip_half"] * T
    put("l_hip", mid + u * half)
    put("r_hip", mid - u * half)

    for parent, child in SEGMENT_TREE:
        key = f"{parent}:{child}"
        d = _unit(pose.xy(child) - pose.xy(parent), key)
        put(child, out.xy(parent) + d * (ratios[key] * T))
    return out


def segment_ratios(pose: KeypointPose) -> dict:
    """Observed segment_length / torso_length for every limb segment."""
    T = pose.torso_length()
    if T == 0.0:
        raise DegeneratePose("zero-length torso")
    mid = pose.mid_hip()
    out = {"hip_half": float(np.linalg.norm(pose.xy("l_hip") - mid)) / T}
    for parent, child in SEGMENT_TREE:
        length = float(np.linalg.norm(pose.xy(child) - pose.xy(parent)))
        out[f"{parent}:{child}"] = length / T
    return out


def pose_validity(
    pose: KeypointPose,
    ratios=None,
    min_visible: int = 12,
    min_confidence: float = 0.3,
    ratio_window: tuple = (0.25, 4.0),
) -> bool:
    """True iff enough keypoints are confident, all segment ratios are within
    the window around canonical, and no two distinct joints coincide exactly.
    """
    ratios = dict(DEFAULT_LIMB_RATIOS if ratios is None else ratios)
    visible = int((pose.points[:, 2] >= min_confidence).sum())
    if visible < min_visible:
        return False
    if pose.torso_length() == 0.0:
        return False
    lo, hi = ratio_window
    observed = segment_ratios(pose)
    for key, canonical in ratios.items():
        r = observed[key]
        if not (lo * canonical <= r <= hi * canonical):
            return False
    xy = pose.points[:, :2]
    for i in range(N_KEYPOINTS):
        for j in range(i + 1, N_KEYPOINTS):
            if xy[i, 0] == xy[j, 0] and xy[i, 1] == xy[j, 1]:
                return False
    return True


@dataclass(frozen=True)
class ControlSchedule:
    """Denoise-step intervals for the identity and pose control networks.

    identity covers [identity_start, identity_end) — the whole generation;
    pose covers [pose_first, pose_last] inclusive — starting right after the
    first step and ending midway.
    """

    identity_start: int
    identity_end: int
    pose_first: int
    pose_last: int

    def identity_steps(self) -> range:
        return range(self.identity_start, self.identity_end)

    def pose_steps(self) -> range:
        return range(self.pose_first, self.pose_last + 1)


def control_schedule(
    total_steps: int, pose_start_step: int = 1, pose_end_fraction: float = 0.5
) -> ControlSchedule:
    """Identity active for all steps [0, N); pose control for [1, floor(N/2)]."""
    if total_steps < 4:
        raise TooFewSteps(f"need at least 4 denoise steps, got {total_steps}")
    pose_last = math.floor(total_steps * pose_end_fraction)
    return ControlSchedule(
        identity_start=0,
        identity_end=total_steps,
        pose_first=pose_start_step,
        pose_last=pose_last,
    )
