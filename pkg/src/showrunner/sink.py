"""Boundary to the rendered world: the ordered show manifest plus event
broadcast to renderers and consoles.

Single writer per show; every broadcast event is a manifest entry with the
same seq, and late subscribers backfill from any seq to see the identical
ordered stream. The manifest digest over canonical JSON is the show
fingerprint used by the replay determinism checks.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .digests import canonical_json, digest_obj, sha256_hex
from .errors import GateViolation, ShowClosed, ShowOpen
from .pipelines import GeneratedAsset


@dataclass
class ManifestEntry:
    seq: int
    t_ms: int
    kind: str  # ASSET | FEEDBACK | CUE
    payload_digest: str
    detail: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "t_ms": self.t_ms,
            "kind": self.kind,
            "payload_digest": self.payload_digest,
            "detail": self.detail,
        }


class Subscription:
    """One subscriber's ordered event feed (backfill then live)."""

    def __init__(self):
        self._q: queue.Queue = queue.Queue()
        self.closed = False

    def push(self, event: dict) -> None:
        self._q.put(event)

    def get(self, timeout: Optional[float] = None) -> Optional[dict]:
        try:
            return self._q.get(timeout=timeout)
        except queue.Empty:
            return None

    def drain(self) -> list[dict]:
        out = []
        while True:
            try:
                out.append(self._q.get_nowait())
            except queue.Empty:
                return out


class StageSink:
    def __init__(
        self,
        show_id: str,
        now_ms: Callable[[], int],
        gate_check: Callable[[str], Optional[str]],
    ):
        self.show_id = show_id
        self.now_ms = now_ms
        self.gate_check = gate_check
        self.entries: list[ManifestEntry] = []
        self.closed = False
        self._subscribers: list[Subscription] = []
        self._payloads: dict[str, GeneratedAsset] = {}
        self._lock = threading.Lock()

    # publishing (single writer)

    def _append(self, kind: str, payload_digest: str, detail: dict) -> int:
        if self.closed:
            raise ShowClosed(f"show {self.show_id} is closed")
        with self._lock:
            entry = ManifestEntry(
                seq=len(self.entries),
                t_ms=self.now_ms(),
                kind=kind,
                payload_digest=payload_digest,
                detail=detail,
            )
            self.entries.append(entry)
            event = entry.to_dict()
            for sub in self._subscribers:
                sub.push(event)
            return entry.seq

    def publish_asset(
        self,
        asset: GeneratedAsset,
        muse_id: int,
        substituted: bool,
        ticket_id: Optional[str] = None,
        original_asset_id: Optional[str] = None,
    ) -> int:
        release = self.gate_check(asset.asset_id)
        if release is None:
            raise GateViolation(
                f"asset {asset.asset_id} has no approval or substitution record"
            )
        self._payloads[asset.asset_id] = asset
        return self._append(
            "ASSET",
            asset.payload_digest,
            {
                "asset_id": asset.asset_id,
                "job_id": asset.job_id,
                "muse_id": muse_id,
                "asset_kind": asset.kind,
                "substituted": bool(substituted),
                "release": release,
                "ticket_id": ticket_id,
                "original_asset_id": original_asset_id,
            },
        )

    def publish_feedback(self, value: float, source: str) -> int:
        clamped = min(1.0, max(0.0, float(value)))
        detail = {"value": clamped, "source": source}
        return self._append("FEEDBACK", digest_obj(detail), detail)

    def publish_cue(self, cue: dict) -> int:
        return self._append("CUE", digest_obj(cue), dict(cue))

    # subscribers

    def subscribe(self, from_seq: int = 0) -> Subscription:
        sub = Subscription()
        with self._lock:
            for entry in self.entries[max(0, from_seq):]:
                sub.push(entry.to_dict())
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
        sub.closed = True

    # lifecycle and fingerprint

    def close(self) -> None:
        self.closed = True

    def fingerprint(self) -> str:
        if not self.closed:
            raise ShowOpen("fingerprint requires a closed show")
        return sha256_hex(canonical_json([e.to_dict() for e in self.entries]))

    def manifest_dicts(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]

    def get_payload(self, asset_id: str) -> Optional[GeneratedAsset]:
        return self._payloads.get(asset_id)

    def write_manifest_file(self, directory) -> Path:
        path = Path(directory) / f"{self.show_id}.manifest.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
        return path
