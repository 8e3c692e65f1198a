"""Show recordings: every nondeterminism source (seeds, arrival times,
operator decisions, cue triggers, pose recordings) captured in one file, so a
show replays in virtual time to a bit-identical manifest fingerprint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import ROUNDS, ShowConfig, load_muse_profiles
from .engine import ShowEngine
from .errors import MalformedRecording, NoCompletedJobs
from .imaging import procedural_sketch
from .oracle import MoveLibrary
from .pose_metrics import PoseSequence

EVENT_TYPES = {
    "register",
    "open_round",
    "close_round",
    "submission",
    "decision",
    "oracle_cue",
    "oracle_score",
    "oracle_override",
    "close_show",
}

_REQUIRED_FIELDS = {
    "register": {"device_id"},
    "open_round": {"round"},
    "close_round": set(),
    "submission": {"client_token", "device_id", "muse_id", "round", "sketch"},
    "decision": {"ticket_index", "decision", "operator"},
    "oracle_cue": {"seed"},
    "oracle_score": {"recording"},
    "oracle_override": {"composite"},
    "close_show": set(),
}


@dataclass
class ShowRecording:
    config: ShowConfig
    profiles_path: Path
    library_path: Path
    events: list[dict]
    base_dir: Path

    @classmethod
    def load(cls, path) -> "ShowRecording":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedRecording(f"cannot read recording: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    @classmethod
    def from_dict(cls, data: dict, base_dir) -> "ShowRecording":
        if data.get("format") != "showrec/1":
            raise MalformedRecording("unknown or missing recording format")
        cfg_data = data.get("show_config")
        if not isinstance(cfg_data, dict):
            raise MalformedRecording("missing show_config")
        if "seed" not in cfg_data:
            raise MalformedRecording("show_config is missing its seed")
        config = ShowConfig.from_dict(cfg_data)
        events = data.get("events")
        if not isinstance(events, list):
            raise MalformedRecording("events must be a list")
        last_t = 0
        for i, ev in enumerate(events):
            t = ev.get("t_ms")
            kind = ev.get("type")
            if not isinstance(t, int) or t < 0:
                raise MalformedRecording(f"event {i}: bad t_ms")
            if t < last_t:
                raise MalformedRecording(f"event {i}: timestamps must be non-decreasing")
            last_t = t
            if kind not in EVENT_TYPES:
                raise MalformedRecording(f"event {i}: unknown type {kind!r}")
            missing = _REQUIRED_FIELDS[kind] - ev.keys()
            if missing:
                raise MalformedRecording(f"event {i} ({kind}): missing {sorted(missing)}")
            if kind in ("open_round",) and ev["round"] not in ROUNDS:
                raise MalformedRecording(f"event {i}: unknown round {ev['round']!r}")
        base = Path(base_dir)
        return cls(
            config=config,
            profiles_path=base / data.get("muse_profiles", "muse_profiles.json"),
            library_path=base / data.get("move_library", "move_library.json"),
            events=events,
            base_dir=base,
        )


@dataclass
class ReplayResult:
    fingerprint: str
    manifest: list[dict]
    latency: Optional[dict]
    cue: Optional[dict]
    status: dict
    engine: Optional[ShowEngine] = None

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "manifest_entries": len(self.manifest),
            "latency": self.latency,
            "cue": self.cue,
            "status": self.status,
            "manifest": self.manifest,
        }


def _sketch_bytes(spec: dict) -> bytes:
    return procedural_sketch(
        int(spec.get("width", 320)),
        int(spec.get("height", 240)),
        int(spec.get("pattern_seed", 0)),
    )


def replay(recording: ShowRecording, journal_path=None, keep_engine: bool = False) -> ReplayResult:
    """Run the recorded show in virtual time and return the sealed outcome."""
    profiles = load_muse_profiles(recording.profiles_path)
    library = MoveLibrary.load(recording.library_path, recording.config.move_count)
    engine = ShowEngine(
        recording.config, profiles, library, virtual=True, journal_path=journal_path
    )

    def make_action(ev: dict):
        kind = ev["type"]
        if kind == "register":
            return lambda: engine.register_device(ev["device_id"])
        if kind == "open_round":
            return lambda: engine.set_round(ev["round"])
        if kind == "close_round":
            return lambda: engine.set_round(None)
        if kind == "submission":
            meta = {
                "client_token": ev["client_token"],
                "device_id": ev["device_id"],
                "muse_id": ev["muse_id"],
                "round": ev["round"],
            }
            sketch = _sketch_bytes(ev["sketch"])
            return lambda: engine.submit(meta, sketch)
        if kind == "decision":
            index = int(ev["ticket_index"])

            def act():
                if index >= engine.gate.ticket_count():
                    raise MalformedRecording(
                        f"decision references ticket_index {index}, "
                        f"only {engine.gate.ticket_count()} tickets exist"
                    )
                ticket_id = engine.gate.ticket_id_by_index(index)
                engine.decide(ticket_id, ev["decision"], ev["operator"])

            return act
        if kind == "oracle_cue":
            return lambda: engine.oracle_cue(int(ev["seed"]))
        if kind == "oracle_score":
            seq = PoseSequence.from_jsonl(
                (recording.base_dir / ev["recording"]).read_text()
            )
            return lambda: engine.oracle_score(seq)
        if kind == "oracle_override":
            return lambda: engine.oracle_override(float(ev["composite"]))
        if kind == "close_show":
            return lambda: engine.close_show()
        raise MalformedRecording(f"unknown event type {kind!r}")

    for ev in recording.events:
        engine.scheduler.call_at(ev["t_ms"], make_action(ev))

    engine.run_until_idle()
    engine.close_show()
    engine.finalize()

    try:
        latency = engine.latency_report()
    except NoCompletedJobs:
        latency = None
    return ReplayResult(
        fingerprint=engine.fingerprint(),
        manifest=engine.sink.manifest_dicts(),
        latency=latency,
        cue=engine.last_cue.to_dict() if engine.last_cue else None,
        status=engine.status(),
        engine=engine if keep_engine else None,
    )
