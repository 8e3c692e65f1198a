#!/usr/bin/env python3
"""Generate the committed fixtures: muse profiles with procedural art, the
12-move library, the sample show recording (3 rounds, scripted decisions,
Oracle sequence), matching pose recordings, and the golden fingerprint.

The recording is built in phases because scripted decisions address tickets
by creation index and the pose recordings depend on the cue the replay
produces: a discovery replay finds ticket creation times, a second replay
with decisions yields the cue, and the final file adds the score events.
Everything is deterministic, so regenerating reproduces identical fixtures.
"""

import json
import math
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from showrunner.imaging import procedural_image  # noqa: E402
from showrunner.ingest import GroupAssigner  # noqa: E402
from showrunner.oracle import ChoreographyCue, MoveLibrary, assemble_reference  # noqa: E402
from showrunner.pose import canonical_pose  # noqa: E402
from showrunner.recording import ShowRecording, replay  # noqa: E402

SHOW_SEED = 2025
MOVE_NAMES = [
    "grapevine glide",
    "box step",
    "arm wave",
    "side reach",
    "knee lift",
    "hip sway",
    "star jump",
    "roller strut",
    "disco point",
    "shoulder shimmy",
    "heel dig",
    "spin step",
]

SHOW_CONFIG = {
    "show_id": "sample",
    "seed": SHOW_SEED,
    "capacity": 65,
    "group_count": 7,
    "pool_sizes": {"T1": 8, "T2": 8, "T3": 8},
    "dwell_limit_ms": 20_000,
    "output_size": [640, 480],
    "intermediate_size": [512, 384],
    "failure_rate": 0.04,
    "flaky_seed": 7,
    "keypoint_wild_percent": 15,
    "mock_latencies_ms": {
        "DESCRIBE": [3000, 5000],
        "STYLIZE": [9000, 14000],
        "VARIATION": [7000, 10000],
        "SKETCH_REFINE": [6000, 9000],
        "IMAGE_TO_MESH": [8000, 12000],
        "GARMENT_AGENT": [3000, 5000],
        "POSE_AGENT": [3000, 5000],
        "KEYPOINT_AGENT": [2000, 4000],
        "IDENTITY_POSE_GEN": [30000, 45000],
        "POEM": [2000, 4000],
    },
}

ROUND_PLANS = [
    ("R1_BACKGROUND", 33, 10_000, 120_000, "r1", 2),
    ("R2_POSE", 65, 150_000, 150_000, "r2", 3),
    ("R3_OBJECT", 65, 340_000, 150_000, "r3", 4),
]


def write_muse_assets():
    assets = FIXTURES / "assets"
    assets.mkdir(parents=True, exist_ok=True)
    palettes = [
        ["#ff6ec7", "#7afcff"],
        ["#ffd319", "#ff901f"],
        ["#9d72ff", "#38f3ff"],
        ["#ff2975", "#f222ff"],
        ["#00f5d4", "#8338ec"],
        ["#f4f482", "#fb5607"],
        ["#72ffb6", "#4361ee"],
    ]
    names = ["Halcyon", "Vesper", "Solara", "Nocturne", "Meridian", "Cascade", "Aurelia"]
    muses = []
    sizes = {"style": (64, 48), "garment": (64, 48), "frieze": (200, 120), "fallback": (320, 240)}
    keys = {"style": "style_ref", "garment": "garment_ref", "frieze": "frieze", "fallback": "fallback_asset"}
    for m in range(1, 8):
        entry = {
            "muse_id": m,
            "name": names[m - 1],
            "palette": palettes[m - 1],
            "pose_library": [canonical_pose().to_list()],
        }
        for kind, (w, h) in sizes.items():
            rel = f"assets/muse{m}_{kind}.png"
            (FIXTURES / rel).write_bytes(procedural_image(w, h, f"muse-{m}-{kind}"))
            entry[keys[kind]] = rel
        muses.append(entry)
    (FIXTURES / "muse_profiles.json").write_text(json.dumps({"muses": muses}, indent=2) + "\n")


def write_move_library():
    base = canonical_pose()
    moves = []
    for i, name in enumerate(MOVE_NAMES):
        rng = random.Random(1000 + i)
        joints = [
            {
                "ax": rng.uniform(0.01, 0.05),
                "ay": rng.uniform(0.01, 0.05),
                "fx": rng.choice([1, 2]),
                "fy": rng.choice([1, 2]),
                "px": rng.random(),
                "py": rng.random(),
            }
            for _ in range(18)
        ]
        frames = []
        for k in range(6):
            t = 0.5 * k
            pose = base.copy()
            for j, par in enumerate(joints):
                pose.points[j, 0] += par["ax"] * math.sin(2 * math.pi * (par["fx"] * t / 3.0 + par["px"]))
                pose.points[j, 1] += par["ay"] * math.sin(2 * math.pi * (par["fy"] * t / 3.0 + par["py"]))
            frames.append({"t_s": t, "kp": pose.to_list()})
        moves.append({"move_id": f"m{i:02d}", "name": name, "frames": frames})
    (FIXTURES / "move_library.json").write_text(json.dumps({"moves": moves}, indent=2) + "\n")


def base_events():
    """Registrations, rounds, and submissions (no decisions or oracle yet)."""
    events = [
        {"t_ms": 100 * d, "type": "register", "device_id": f"dev-{d:03d}"}
        for d in range(65)
    ]
    assigner = GroupAssigner(7, 65, SHOW_SEED)
    for d in range(65):
        assigner.assign(f"dev-{d:03d}")

    for round_name, count, t_open, window_ms, tag, offset in ROUND_PLANS:
        events.append({"t_ms": t_open, "type": "open_round", "round": round_name})
        rng = random.Random(f"{tag}-arrivals")
        arrivals = sorted(rng.randint(0, window_ms) for _ in range(count))
        for i, dt in enumerate(arrivals):
            device = f"dev-{(i * 7 + offset) % 65:03d}"
            events.append(
                {
                    "t_ms": t_open + 1000 + dt,
                    "type": "submission",
                    "client_token": f"{tag}-{i:03d}",
                    "device_id": device,
                    "muse_id": assigner.lookup(device).muse_id,
                    "round": round_name,
                    "sketch": {"width": 320, "height": 240, "pattern_seed": 9000 + i},
                }
            )
        events.append({"t_ms": t_open + window_ms + 10_000, "type": "close_round"})
    return events


def recording_dict(events):
    return {
        "format": "showrec/1",
        "show_config": SHOW_CONFIG,
        "muse_profiles": "muse_profiles.json",
        "move_library": "move_library.json",
        "events": sorted(events, key=lambda e: e["t_ms"]),
    }


def main():
    FIXTURES.mkdir(exist_ok=True)
    write_muse_assets()
    write_move_library()
    library = MoveLibrary.load(FIXTURES / "move_library.json", 12)

    events = base_events()

    print("phase 1: discovery replay (ticket creation times) ...")
    discovery = ShowRecording.from_dict(recording_dict(list(events)), FIXTURES)
    engine = replay(discovery, keep_engine=True).engine
    tickets = [
        engine.gate.tickets[engine.gate.ticket_id_by_index(i)]
        for i in range(engine.gate.ticket_count())
    ]
    print(f"phase 1: {len(tickets)} tickets observed")

    # Scripted decisions: a third approved by hand, some rejected, rest time out.
    decisions = []
    for i, ticket in enumerate(tickets):
        if i % 3 == 0:
            decisions.append(
                {
                    "t_ms": ticket.created_at + 8000,
                    "type": "decision",
                    "ticket_index": i,
                    "decision": "APPROVE",
                    "operator": "mod-alpha",
                }
            )
        elif i % 7 == 3:
            decisions.append(
                {
                    "t_ms": ticket.created_at + 5000,
                    "type": "decision",
                    "ticket_index": i,
                    "decision": "REJECT",
                    "operator": "mod-beta",
                }
            )

    cue_t = 800_000
    events2 = events + decisions + [{"t_ms": cue_t, "type": "oracle_cue", "seed": 42}]

    print("phase 2: cue replay ...")
    rec2 = ShowRecording.from_dict(recording_dict(list(events2)), FIXTURES)
    cue = replay(rec2).cue
    print("phase 2: cue:", cue["selected_move_ids"])

    reference = assemble_reference(ChoreographyCue(**cue), library)
    (FIXTURES / "pose_perfect.jsonl").write_text(reference.to_jsonl())

    static_pose = canonical_pose()
    static_lines = [json.dumps({"t_s": 0.5 * k, "kp": static_pose.to_list()}) for k in range(21)]
    (FIXTURES / "pose_static.jsonl").write_text("\n".join(static_lines) + "\n")

    events3 = events2 + [
        {"t_ms": cue_t + 10_000, "type": "oracle_score", "recording": "pose_perfect.jsonl"},
        {"t_ms": cue_t + 15_000, "type": "oracle_score", "recording": "pose_static.jsonl"},
        {"t_ms": cue_t + 20_000, "type": "oracle_override", "composite": 0.9},
        {"t_ms": cue_t + 60_000, "type": "close_show"},
    ]
    (FIXTURES / "sample_recording.json").write_text(
        json.dumps(recording_dict(events3), indent=2) + "\n"
    )

    print("phase 3: final verification replays ...")
    rec3 = ShowRecording.load(FIXTURES / "sample_recording.json")
    fp1 = replay(rec3).fingerprint
    fp2 = replay(rec3).fingerprint
    assert fp1 == fp2, "fingerprint not stable across replays"
    (FIXTURES / "golden_fingerprint.txt").write_text(fp1 + "\n")
    print("golden fingerprint:", fp1)

    (FIXTURES / "show_config.json").write_text(
        json.dumps(
            {
                "show_config": SHOW_CONFIG,
                "muse_profiles": "muse_profiles.json",
                "move_library": "move_library.json",
            },
            indent=2,
        )
        + "\n"
    )
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
