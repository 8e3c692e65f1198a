"""showctl: run the live service, replay a recorded show deterministically,
run the virtual-time latency bench, or score a pose recording offline.

Exit codes: 0 success, 2 config error, 3 determinism check failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .backends import MockBackend
from .bench import BenchConfig, run_bench
from .config import ScoreConfig, ShowConfig, load_muse_profiles
from .errors import BadConfig, MalformedRecording, ShowError
from .oracle import MoveLibrary, score as score_sequence, select_moves
from .pose_metrics import PoseSequence
from .recording import ShowRecording, replay as run_replay

EXIT_CONFIG_ERROR = 2
EXIT_DETERMINISM_FAILURE = 3


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Show-control for queued generative pipelines and the Oracle sequence."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--virtual-time", is_flag=True, help="Demo mode: clock moves only via /advance.")
@click.option("--journal", "journal_dir", default=None, type=click.Path())
@click.option("--show-id", default="main", show_default=True)
def run(config_path, host, port, virtual_time, journal_dir, show_id):
    """Serve the show API (live wall clock unless --virtual-time)."""
    import uvicorn

    from .service import ShowRegistry, create_app

    try:
        registry = _build_registry(config_path, virtual_time, journal_dir)
        registry.create(show_id)
    except ShowError as exc:
        _fail(exc.message, EXIT_CONFIG_ERROR)
    click.echo(f"show {show_id!r} ready at http://{host}:{port} (virtual={virtual_time})")
    uvicorn.run(create_app(registry), host=host, port=port, log_level="warning")


def _build_registry(config_path, virtual, journal_dir):
    from .service import ShowRegistry

    base = Path(config_path).parent
    try:
        data = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfig(f"cannot read service config: {exc}") from exc
    show_config = ShowConfig.from_dict(data.get("show_config", {}))
    profiles = load_muse_profiles(base / data["muse_profiles"])
    library = MoveLibrary.load(base / data["move_library"], show_config.move_count)
    if journal_dir:
        Path(journal_dir).mkdir(parents=True, exist_ok=True)
    return ShowRegistry(show_config, profiles, library, virtual=virtual, journal_dir=journal_dir)


@main.command()
@click.argument("recording_path", type=click.Path(exists=True))
@click.option("--repeat", default=1, show_default=True, type=int, help="Replays to compare.")
@click.option("--expect-fingerprint", default=None, help="Fail (exit 3) on mismatch.")
@click.option("--journal", "journal_path", default=None, type=click.Path())
@click.option("--out", default=None, type=click.Path())
@click.option("--manifest-dir", default=None, type=click.Path(), help="Write {show_id}.manifest.jsonl here.")
@click.option("--full-manifest", is_flag=True, help="Include every manifest entry in the output.")
def replay(recording_path, repeat, expect_fingerprint, journal_path, out, manifest_dir, full_manifest):
    """Deterministically replay a recorded show in virtual time."""
    try:
        recording = ShowRecording.load(recording_path)
    except (MalformedRecording, BadConfig) as exc:
        _fail(exc.message, EXIT_CONFIG_ERROR)
    results = []
    for i in range(max(1, repeat)):
        try:
            keep = manifest_dir is not None and i == 0
            results.append(
                run_replay(recording, journal_path if i == 0 else None, keep_engine=keep)
            )
        except ShowError as exc:
            _fail(f"replay failed: {exc.message}", EXIT_CONFIG_ERROR)
    if manifest_dir is not None:
        Path(manifest_dir).mkdir(parents=True, exist_ok=True)
        results[0].engine.sink.write_manifest_file(manifest_dir)
    fingerprints = {r.fingerprint for r in results}
    if len(fingerprints) != 1:
        _fail(f"replays diverged: {sorted(fingerprints)}", EXIT_DETERMINISM_FAILURE)
    fingerprint = results[0].fingerprint
    if expect_fingerprint and fingerprint != expect_fingerprint:
        _fail(
            f"fingerprint {fingerprint} != expected {expect_fingerprint}",
            EXIT_DETERMINISM_FAILURE,
        )
    payload = results[0].to_dict()
    if not full_manifest:
        payload.pop("manifest")
    payload["replays"] = len(results)
    _emit(payload, out)


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--out", default=None, type=click.Path())
def bench(config_path, seed, out):
    """Run the queueing benchmark in virtual time and report latencies."""
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            _fail(f"cannot read bench config: {exc}", EXIT_CONFIG_ERROR)
    else:
        # the production-scale default: 8 workers per task, round-1 burst
        data = {
            "pool_sizes": {"T1": 8, "T2": 8, "T3": 8},
            "workloads": [
                {"task": "T1", "count": 33, "window_ms": 120_000,
                 "service_lo_ms": 20_000, "service_hi_ms": 30_000}
            ],
            "seed": 1,
        }
    if seed is not None:
        data["seed"] = seed
    try:
        config = BenchConfig.from_dict(data)
        result = run_bench(config)
    except ShowError as exc:
        _fail(exc.message, EXIT_CONFIG_ERROR)
    _emit(result.to_dict(), out)


@main.command()
@click.option("--recording", "recording_path", required=True, type=click.Path(exists=True))
@click.option("--library", "library_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=42, show_default=True, type=int, help="Cue seed.")
@click.option("--threshold", default=0.6, show_default=True, type=float)
@click.option("--out", default=None, type=click.Path())
def score(recording_path, library_path, seed, threshold, out):
    """Score a pose recording against a seeded cue from the move library."""
    try:
        library = MoveLibrary.load(library_path)
        sequence = PoseSequence.from_jsonl(Path(recording_path).read_text())
    except (ShowError, ValueError, KeyError) as exc:
        _fail(str(exc), EXIT_CONFIG_ERROR)
    try:
        cue = select_moves([], library, seed, MockBackend(), show_id="offline")
        config = ScoreConfig(threshold=threshold)
        report = score_sequence(sequence, cue, library, config)
    except ShowError as exc:
        _fail(exc.message, EXIT_CONFIG_ERROR)
    payload = report.to_dict()
    payload["cue"] = cue.to_dict()
    _emit(payload, out)


if __name__ == "__main__":
    main()
