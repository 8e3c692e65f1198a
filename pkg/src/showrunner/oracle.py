"""The Oracle sequence: seeded selection of three moves from the library,
poem generation over the night's assets, and scoring of an audience pose
recording against the taught choreography.

Scoring maps three raw measures to a 0-1 scale: mean keypoint similarity
along the warped alignment (accuracy), an exponential of the normalized
alignment cost (timing), and joint speed relative to the reference's own
intensity (energy); their weighted mean crosses or misses the feedback
threshold.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .backends import ModelBackend
from .config import ScoreConfig
from .digests import digest_obj
from .errors import BadConfig, EmptySequence, InsufficientMoves, NoVisibleKeypoints
from .pose_metrics import PoseSequence, concatenate, dtw_alignment, energy, oks

import random


@dataclass
class Move:
    move_id: str
    name: str
    reference: PoseSequence


class MoveLibrary:
    def __init__(self, moves: list[Move], expected_count: int | None = None):
        ids = [m.move_id for m in moves]
        if len(set(ids)) != len(ids):
            raise BadConfig("move ids must be unique")
        if expected_count is not None and len(moves) != expected_count:
            raise BadConfig(f"expected {expected_count} moves, found {len(moves)}")
        self.moves = list(moves)
        self._by_id = {m.move_id: m for m in moves}

    def __len__(self) -> int:
        return len(self.moves)

    def get(self, move_id: str) -> Move:
        return self._by_id[move_id]

    @classmethod
    def from_dict(cls, data: dict, expected_count: int | None = None) -> "MoveLibrary":
        moves = [
            Move(
                move_id=entry["move_id"],
                name=entry["name"],
                reference=PoseSequence.from_records(entry["frames"]),
            )
            for entry in data["moves"]
        ]
        return cls(moves, expected_count)

    @classmethod
    def load(cls, path, expected_count: int | None = None) -> "MoveLibrary":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read move library {path}: {exc}") from exc
        return cls.from_dict(data, expected_count)

    def to_dict(self) -> dict:
        return {
            "moves": [
                {
                    "move_id": m.move_id,
                    "name": m.name,
                    "frames": m.reference.to_records(),
                }
                for m in self.moves
            ]
        }


@dataclass
class ChoreographyCue:
    show_id: str
    seed: int
    selected_move_ids: list[str]
    poem_text: str
    source_asset_ids: list[str]

    def to_dict(self) -> dict:
        return {
            "show_id": self.show_id,
            "seed": self.seed,
            "selected_move_ids": list(self.selected_move_ids),
            "poem_text": self.poem_text,
            "source_asset_ids": list(self.source_asset_ids),
        }


def _name_tokens(name: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", name.lower()))


def select_moves(
    sampled_assets,
    library: MoveLibrary,
    seed: int,
    backends: ModelBackend,
    show_id: str = "show",
    count: int = 3,
) -> ChoreographyCue:
    """Draw `count` distinct moves, biased toward moves whose names share
    tokens with the sampled assets' tags (uniform when nothing overlaps),
    then have the poem backend write the night's verse.

    Assets are sorted before seeding the generator, so the cue is independent
    of the order they were sampled in.
    """
    if len(library) < count:
        raise InsufficientMoves(f"library has {len(library)} moves, need {count}")
    asset_ids = sorted(a.asset_id for a in sampled_assets)
    tag_pool: set[str] = set()
    for asset in sampled_assets:
        tag_pool.update(t.lower() for t in asset.tags)

    rng = random.Random(
        int(digest_obj({"seed": seed, "assets": asset_ids}), 16) & (2**63 - 1)
    )
    remaining = list(library.moves)
    weights = [1.0 + len(_name_tokens(m.name) & tag_pool) for m in remaining]
    selected: list[Move] = []
    for _ in range(count):
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        idx = len(remaining) - 1
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                idx = i
                break
        selected.append(remaining.pop(idx))
        weights.pop(idx)

    names = [m.name for m in selected]
    poem, _latency = backends.invoke("POEM", {"assets": asset_ids, "moves": names})
    if not poem:
        raise BadConfig("poem backend returned empty text")
    return ChoreographyCue(
        show_id=show_id,
        seed=seed,
        selected_move_ids=[m.move_id for m in selected],
        poem_text=poem,
        source_asset_ids=asset_ids,
    )


@dataclass
class ScoreReport:
    oks_mean: float
    dtw_cost: float
    dtw_normalized: float
    energy: float
    accuracy: float
    timing: float
    energy_norm: float
    composite: float
    threshold: float
    threshold_crossed: bool

    def to_dict(self) -> dict:
        return {
            "oks_mean": self.oks_mean,
            "dtw_cost": self.dtw_cost,
            "dtw_normalized": self.dtw_normalized,
            "energy": self.energy,
            "normalized": {
                "accuracy": self.accuracy,
                "timing": self.timing,
                "energy": self.energy_norm,
            },
            "composite": self.composite,
            "threshold": self.threshold,
            "threshold_crossed": self.threshold_crossed,
        }


def assemble_reference(cue: ChoreographyCue, library: MoveLibrary, gap_s: float = 0.5) -> PoseSequence:
    """Ground truth: the cue's three moves performed in sequence with rest gaps."""
    return concatenate(
        [library.get(mid).reference for mid in cue.selected_move_ids], gap_s=gap_s
    )


def score(
    audience: PoseSequence,
    cue: ChoreographyCue,
    library: MoveLibrary,
    config: ScoreConfig | None = None,
) -> ScoreReport:
    config = config or ScoreConfig()
    config.validate()
    if len(audience) == 0:
        raise EmptySequence("audience recording is empty")
    reference = assemble_reference(cue, library)

    cost, path = dtw_alignment(audience, reference)
    oks_values = []
    for i, j in path:
        try:
            oks_values.append(oks(audience.frames[i].pose, reference.frames[j].pose))
        except (NoVisibleKeypoints, ValueError):
            continue
    if not oks_values:
        raise NoVisibleKeypoints("no alignable frames with visible keypoints")
    accuracy = sum(oks_values) / len(oks_values)

    dtw_normalized = cost / len(path)
    timing = math.exp(-dtw_normalized / config.tau_timing)

    raw_energy = energy(audience)
    e_max = config.e_max if config.e_max is not None else energy(reference)
    if e_max > 0:
        energy_norm = min(raw_energy / e_max, 1.0)
    else:
        energy_norm = 1.0 if raw_energy > 0 else 0.0

    w_acc, w_tim, w_en = config.weights
    composite = w_acc * accuracy + w_tim * timing + w_en * energy_norm
    return ScoreReport(
        oks_mean=accuracy,
        dtw_cost=cost,
        dtw_normalized=dtw_normalized,
        energy=raw_energy,
        accuracy=accuracy,
        timing=timing,
        energy_norm=energy_norm,
        composite=composite,
        threshold=config.threshold,
        threshold_crossed=composite >= config.threshold,
    )
