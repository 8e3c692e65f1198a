"""Show configuration: capacities, pools, budgets, moderation policy, muse
profiles, and scoring parameters. Everything the production run pinned is a
default here and overridable per show.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BadConfig
from .pose import KeypointPose

TASK_TYPES = ("T1", "T2", "T3")
ROUNDS = ("R1_BACKGROUND", "R2_POSE", "R3_OBJECT")
ROUND_TASK = {"R1_BACKGROUND": "T1", "R2_POSE": "T2", "R3_OBJECT": "T3"}
TASK_QUEUE = {"T1": "gen-background", "T2": "gen-pose", "T3": "gen-object"}


@dataclass
class MuseProfile:
    muse_id: int
    name: str
    palette: list[str] = field(default_factory=list)
    style_ref_png: bytes = b""
    garment_ref_png: bytes = b""
    frieze_png: bytes = b""
    fallback_png: bytes = b""
    pose_library: list[KeypointPose] = field(default_factory=list)


@dataclass
class ScoreConfig:
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)  # accuracy, timing, energy
    threshold: float = 0.6
    tau_timing: float = 0.5
    e_max: float | None = None  # None: calibrate to the reference's own energy

    def validate(self):
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise BadConfig("score weights must sum to 1")
        if not (0.0 <= self.threshold <= 1.0):
            raise BadConfig("threshold must lie in [0, 1]")
        if self.tau_timing <= 0:
            raise BadConfig("tau_timing must be positive")


@dataclass
class ShowConfig:
    show_id: str = "show"
    seed: int = 0
    capacity: int = 65
    group_count: int = 7
    pool_sizes: dict = field(default_factory=lambda: {"T1": 8, "T2": 8, "T3": 8})
    max_attempts: int = 3
    retry_backoff_ms: tuple = (1000, 2000, 4000)
    budget_window_ms: tuple = (30_000, 60_000)
    dwell_limit_ms: int = 20_000
    timeout_policy: dict = field(
        default_factory=lambda: {"T1": "APPROVE", "T2": "REJECT", "T3": "APPROVE"}
    )
    max_sketch_pixels: int = 4096 * 4096
    intermediate_size: tuple = (512, 384)
    output_size: tuple = (1024, 768)
    frieze_margin: int = 16
    denoise_steps: int = 30
    mock_latencies_ms: dict = field(default_factory=dict)
    keypoint_wild_percent: int = 15
    failure_rate: float = 0.0
    flaky_seed: int = 1
    remote_backend_url: str | None = None  # None: the deterministic mock
    remote_timeout_s: float = 90.0
    oracle_sample_size: int = 7
    move_count: int = 12
    score: ScoreConfig = field(default_factory=ScoreConfig)

    def validate(self):
        if self.group_count < 1:
            raise BadConfig("group_count must be >= 1")
        if self.capacity < 1:
            raise BadConfig("capacity must be >= 1")
        for task in TASK_TYPES:
            size = self.pool_sizes.get(task, 0)
            if not isinstance(size, int) or size < 1:
                raise BadConfig(f"pool size for {task} must be a positive integer")
        if self.max_attempts < 1:
            raise BadConfig("max_attempts must be >= 1")
        lo, hi = self.budget_window_ms
        if not (0 <= lo <= hi):
            raise BadConfig("budget window must satisfy 0 <= low <= high")
        if self.dwell_limit_ms < 0:
            raise BadConfig("dwell_limit_ms must be >= 0")
        for task, outcome in self.timeout_policy.items():
            if outcome not in ("APPROVE", "REJECT"):
                raise BadConfig(f"timeout policy for {task} must be APPROVE or REJECT")
        self.score.validate()
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ShowConfig":
        data = dict(data)
        score = data.pop("score", None)
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        if score:
            weights = score.get("weights")
            cfg.score = ScoreConfig(
                weights=tuple(weights) if weights else ScoreConfig.weights,
                threshold=score.get("threshold", 0.6),
                tau_timing=score.get("tau_timing", 0.5),
                e_max=score.get("e_max"),
            )
        for key in ("retry_backoff_ms", "budget_window_ms", "intermediate_size", "output_size"):
            setattr(cfg, key, tuple(getattr(cfg, key)))
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "ShowConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read show config {path}: {exc}") from exc
        return cls.from_dict(data)


def load_muse_profiles(path) -> dict[int, MuseProfile]:
    """Read the muse profile config file; asset paths resolve relative to it."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfig(f"cannot read muse profiles {path}: {exc}") from exc
    base = path.parent
    profiles = {}
    for entry in data.get("muses", []):
        try:
            profile = MuseProfile(
                muse_id=int(entry["muse_id"]),
                name=entry["name"],
                palette=list(entry.get("palette", [])),
                style_ref_png=(base / entry["style_ref"]).read_bytes(),
                garment_ref_png=(base / entry["garment_ref"]).read_bytes(),
                frieze_png=(base / entry["frieze"]).read_bytes(),
                fallback_png=(base / entry["fallback_asset"]).read_bytes(),
                pose_library=[
                    KeypointPose.from_list(rows) for rows in entry.get("pose_library", [])
                ],
            )
        except (KeyError, OSError, ValueError) as exc:
            raise BadConfig(f"bad muse profile entry: {exc}") from exc
        profiles[profile.muse_id] = profile
    return profiles
