"""Human-in-the-loop gate between generation and the stage.

Every asset gets exactly one review ticket; approval releases the original,
rejection (or a dead-lettered job) releases the muse's configured fallback
instead, so the shrine never shows a hole. Every action lands in a
hash-chained audit log for post-show review.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .config import MuseProfile
from .digests import canonical_json, short_id
from .errors import AlreadyDecided, DuplicateAsset, UnknownTicket
from .pipelines import GeneratedAsset, StageRecord

GENESIS_HASH = "0" * 64


@dataclass
class ReviewTicket:
    ticket_id: str
    asset_id: str
    job_id: str
    muse_id: int
    task_type: str
    created_at: int
    state: str = "PENDING"
    decided_by: Optional[str] = None
    decided_at: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "asset_id": self.asset_id,
            "job_id": self.job_id,
            "muse_id": self.muse_id,
            "task_type": self.task_type,
            "created_at": self.created_at,
            "state": self.state,
            "decided_by": self.decided_by,
            "decided_at": self.decided_at,
        }


@dataclass
class AuditEntry:
    seq: int
    t_ms: int
    ticket_id: str
    action: str
    operator: str
    prev_hash: str
    entry_hash: str

    def payload(self) -> dict:
        return {
            "seq": self.seq,
            "t_ms": self.t_ms,
            "ticket_id": self.ticket_id,
            "action": self.action,
            "operator": self.operator,
        }

    def to_dict(self) -> dict:
        d = self.payload()
        d["prev_hash"] = self.prev_hash
        d["entry_hash"] = self.entry_hash
        return d


def _chain_hash(prev_hash: str, payload: dict) -> str:
    return hashlib.sha256(prev_hash.encode("ascii") + canonical_json(payload)).hexdigest()


class AuditLog:
    def __init__(self):
        self.entries: list[AuditEntry] = []

    def append(self, t_ms: int, ticket_id: str, action: str, operator: str) -> AuditEntry:
        prev = self.entries[-1].entry_hash if self.entries else GENESIS_HASH
        entry = AuditEntry(
            seq=len(self.entries),
            t_ms=t_ms,
            ticket_id=ticket_id,
            action=action,
            operator=operator,
            prev_hash=prev,
            entry_hash="",
        )
        entry.entry_hash = _chain_hash(prev, entry.payload())
        self.entries.append(entry)
        return entry

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.entries)


def verify_audit(entries: list[AuditEntry]) -> bool:
    """True iff the hash chain is intact and seq numbers are gapless."""
    prev = GENESIS_HASH
    for i, entry in enumerate(entries):
        if entry.seq != i or entry.prev_hash != prev:
            return False
        if entry.entry_hash != _chain_hash(prev, entry.payload()):
            return False
        prev = entry.entry_hash
    return True


@dataclass
class ModerationOutcome:
    job_id: str
    decision: str  # APPROVE | REJECT | DEAD_LETTER
    operator: str
    released_asset: GeneratedAsset
    substituted: bool
    ticket_id: Optional[str] = None
    original_asset_id: Optional[str] = None


def make_fallback_asset(muse: MuseProfile, job_id: str, task_type: str, reason: str) -> GeneratedAsset:
    """The muse's pre-approved fallback image, wrapped as a publishable asset."""
    kind = "MUSE_TEXTURE" if task_type == "T2" else "BACKGROUND_IMAGE"
    payload = muse.fallback_png
    record = StageRecord(
        stage="FALLBACK",
        input_digests={"reason": reason},
        output_digest=hashlib.sha256(payload).hexdigest(),
        backend_id="library",
        latency_ms=0,
        detail={"muse_id": muse.muse_id},
    )
    return GeneratedAsset(
        asset_id=short_id("fb", job_id, reason),
        job_id=job_id,
        kind=kind,
        payload=payload,
        manifest=[record],
        tags=["fallback"],
    )


class ModerationGate:
    """Review queue, decisions, timeout policy, and the release ledger the
    stage sink checks against."""

    def __init__(self, profiles: dict[int, MuseProfile], now_ms: Callable[[], int]):
        self.profiles = profiles
        self.now_ms = now_ms
        self.audit = AuditLog()
        self.tickets: dict[str, ReviewTicket] = {}
        self._by_asset: dict[str, str] = {}
        self._pending_order: list[str] = []
        self._assets: dict[str, GeneratedAsset] = {}
        self._released: dict[str, str] = {}  # asset_id -> APPROVED | SUBSTITUTED
        self._substituted_jobs: set[str] = set()

    # intake

    def submit_for_review(self, asset: GeneratedAsset, muse_id: int, task_type: str) -> ReviewTicket:
        if asset.asset_id in self._by_asset:
            raise DuplicateAsset(f"asset {asset.asset_id} already has a ticket")
        ticket = ReviewTicket(
            ticket_id=short_id("t", asset.asset_id),
            asset_id=asset.asset_id,
            job_id=asset.job_id,
            muse_id=muse_id,
            task_type=task_type,
            created_at=self.now_ms(),
        )
        self.tickets[ticket.ticket_id] = ticket
        self._by_asset[asset.asset_id] = ticket.ticket_id
        self._pending_order.append(ticket.ticket_id)
        self._assets[asset.asset_id] = asset
        self.audit.append(ticket.created_at, ticket.ticket_id, "submit", "system")
        return ticket

    def pending(self, muse_id: Optional[int] = None) -> list[ReviewTicket]:
        out = []
        for tid in self._pending_order:
            ticket = self.tickets[tid]
            if ticket.state != "PENDING":
                continue
            if muse_id is not None and ticket.muse_id != muse_id:
                continue
            out.append(ticket)
        return out

    def get_asset(self, asset_id: str) -> Optional[GeneratedAsset]:
        return self._assets.get(asset_id)

    def ticket_count(self) -> int:
        return len(self._pending_order)

    def ticket_id_by_index(self, index: int) -> str:
        """Tickets in creation order; lets scripted decisions address tickets
        that do not exist until the show runs."""
        return self._pending_order[index]

    def get_ticket(self, ticket_id: str) -> ReviewTicket:
        try:
            return self.tickets[ticket_id]
        except KeyError:
            raise UnknownTicket(f"unknown ticket {ticket_id}") from None

    # decisions

    def decide(self, ticket_id: str, decision: str, operator: str) -> ModerationOutcome:
        if decision not in ("APPROVE", "REJECT"):
            raise ValueError(f"decision must be APPROVE or REJECT, got {decision!r}")
        ticket = self.get_ticket(ticket_id)
        if ticket.state != "PENDING":
            raise AlreadyDecided(f"ticket {ticket_id} already {ticket.state}")
        now = self.now_ms()
        ticket.state = "APPROVED" if decision == "APPROVE" else "REJECTED"
        ticket.decided_by = operator
        ticket.decided_at = now
        self.audit.append(now, ticket_id, decision.lower(), operator)

        original = self._assets[ticket.asset_id]
        if decision == "APPROVE":
            self._released[original.asset_id] = "APPROVED"
            return ModerationOutcome(
                job_id=ticket.job_id,
                decision="APPROVE",
                operator=operator,
                released_asset=original,
                substituted=False,
                ticket_id=ticket_id,
                original_asset_id=original.asset_id,
            )
        fallback = self._substitute(ticket.job_id, ticket.muse_id, ticket.task_type, "rejected")
        return ModerationOutcome(
            job_id=ticket.job_id,
            decision="REJECT",
            operator=operator,
            released_asset=fallback,
            substituted=True,
            ticket_id=ticket_id,
            original_asset_id=original.asset_id,
        )

    def auto_decide_timeout(self, ticket_id: str, dwell_limit_ms: int, policy: dict) -> Optional[ModerationOutcome]:
        """Apply the timeout policy if the ticket is still pending past its
        dwell limit; no-op (None) when a human got there first."""
        ticket = self.get_ticket(ticket_id)
        if ticket.state != "PENDING":
            return None
        if self.now_ms() - ticket.created_at < dwell_limit_ms:
            return None
        decision = policy.get(ticket.task_type, "APPROVE")
        return self.decide(ticket_id, decision, "timeout-policy")

    def substitute_for_dead_letter(self, job_id: str, muse_id: int, task_type: str) -> ModerationOutcome:
        fallback = self._substitute(job_id, muse_id, task_type, "dead_letter")
        self.audit.append(self.now_ms(), f"job:{job_id}", "dead_letter_substitute", "system")
        return ModerationOutcome(
            job_id=job_id,
            decision="DEAD_LETTER",
            operator="system",
            released_asset=fallback,
            substituted=True,
        )

    def _substitute(self, job_id: str, muse_id: int, task_type: str, reason: str) -> GeneratedAsset:
        if job_id in self._substituted_jobs:
            raise DuplicateAsset(f"job {job_id} already substituted")
        self._substituted_jobs.add(job_id)
        fallback = make_fallback_asset(self.profiles[muse_id], job_id, task_type, reason)
        self._assets[fallback.asset_id] = fallback
        self._released[fallback.asset_id] = "SUBSTITUTED"
        return fallback

    # the gate the sink checks

    def release_kind(self, asset_id: str) -> Optional[str]:
        return self._released.get(asset_id)

    def substitution_count(self) -> int:
        return len(self._substituted_jobs)
