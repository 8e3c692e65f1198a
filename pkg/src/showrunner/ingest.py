"""Submission intake: payload validation, idempotent admission, and balanced
assignment of devices to the muse groups.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .config import ROUNDS, ShowConfig
from .digests import sha256_hex, short_id
from .errors import ImageTooLarge, MalformedPayload, RoundClosed, ShowFull
from .imaging import is_png, png_dimensions

META_FIELDS = {"client_token", "muse_id", "round", "device_id"}


@dataclass
class SketchImage:
    width_px: int
    height_px: int
    format: str
    data: bytes
    checksum: str

    @classmethod
    def from_bytes(cls, data: bytes) -> "SketchImage":
        if not data or not is_png(data):
            return cls(0, 0, "UNKNOWN", data, sha256_hex(data))
        w, h = png_dimensions(data)
        return cls(w, h, "PNG", data, sha256_hex(data))


@dataclass
class ValidationResult:
    accepted: bool
    reason: Optional[str] = None

    ACCEPT = "accept"


def validate_sketch(image: SketchImage, max_pixels: int = 4096 * 4096) -> ValidationResult:
    """Accept, or Reject with a reason; rejection is a value, not an error."""
    if not image.data:
        return ValidationResult(False, "EmptyImage")
    if image.format != "PNG":
        return ValidationResult(False, "NotPng")
    if image.width_px <= 0 or image.height_px <= 0:
        return ValidationResult(False, "EmptyImage")
    if sha256_hex(image.data) != image.checksum:
        return ValidationResult(False, "ChecksumMismatch")
    if image.width_px * image.height_px > max_pixels:
        return ValidationResult(False, "ImageTooLarge")
    return ValidationResult(True)


@dataclass
class Submission:
    submission_id: str
    show_id: str
    client_token: str
    muse_id: int
    round: str
    sketch: SketchImage
    received_at: int


@dataclass
class MuseAssignment:
    device_id: str
    muse_id: int
    seat_group: str


class GroupAssigner:
    """Balanced, deterministic device-to-muse assignment.

    Devices are dealt round-robin over a seed-shuffled group order, so after
    any arrival prefix the group sizes differ by at most one, and the same
    seed and arrival order always reproduce the same assignment.
    """

    def __init__(self, group_count: int, capacity: int, seed: int):
        self.capacity = capacity
        order = list(range(1, group_count + 1))
        random.Random(seed).shuffle(order)
        self._order = order
        self._assignments: dict[str, MuseAssignment] = {}
        self._sizes = {m: 0 for m in order}

    def assign(self, device_id: str) -> MuseAssignment:
        existing = self._assignments.get(device_id)
        if existing is not None:
            return existing
        if len(self._assignments) >= self.capacity:
            raise ShowFull(f"show capacity {self.capacity} reached")
        muse_id = self._order[len(self._assignments) % len(self._order)]
        self._sizes[muse_id] += 1
        assignment = MuseAssignment(
            device_id=device_id,
            muse_id=muse_id,
            seat_group=f"muse-{muse_id}-seat-{self._sizes[muse_id]}",
        )
        self._assignments[device_id] = assignment
        return assignment

    def group_sizes(self) -> dict[int, int]:
        return dict(sorted(self._sizes.items()))

    def lookup(self, device_id: str) -> Optional[MuseAssignment]:
        return self._assignments.get(device_id)


def parse_meta(meta: dict, group_count: int) -> dict:
    """Validate the submission meta envelope: exactly the documented fields."""
    if not isinstance(meta, dict):
        raise MalformedPayload("meta must be a JSON object")
    missing = META_FIELDS - meta.keys()
    extra = meta.keys() - META_FIELDS
    if missing:
        raise MalformedPayload(f"meta missing fields: {sorted(missing)}")
    if extra:
        raise MalformedPayload(f"meta has unknown fields: {sorted(extra)}")
    try:
        muse_id = int(meta["muse_id"])
    except (TypeError, ValueError):
        raise MalformedPayload("muse_id must be an integer") from None
    if not 1 <= muse_id <= group_count:
        raise MalformedPayload(f"muse_id must be in [1, {group_count}]")
    if meta["round"] not in ROUNDS:
        raise MalformedPayload(f"unknown round {meta['round']!r}")
    if not isinstance(meta["client_token"], str) or not meta["client_token"]:
        raise MalformedPayload("client_token must be a non-empty string")
    if not isinstance(meta["device_id"], str) or not meta["device_id"]:
        raise MalformedPayload("device_id must be a non-empty string")
    return {
        "client_token": meta["client_token"],
        "muse_id": muse_id,
        "round": meta["round"],
        "device_id": meta["device_id"],
    }


class IngestGateway:
    """Validates envelopes and admits each (show, client_token) exactly once."""

    def __init__(self, config: ShowConfig):
        self.config = config
        self.assigner = GroupAssigner(config.group_count, config.capacity, config.seed)
        self._by_token: dict[str, Submission] = {}

    def admitted(self, client_token: str) -> Optional[Submission]:
        return self._by_token.get(client_token)

    def accept(
        self, meta: dict, sketch_bytes: bytes, now_ms: int, open_round: Optional[str]
    ) -> tuple[Submission, bool]:
        """Admit a submission. Returns (submission, created); created is False
        for an idempotent duplicate of an already-admitted client_token."""
        fields = parse_meta(meta, self.config.group_count)
        if open_round is None or fields["round"] != open_round:
            raise RoundClosed(
                f"round {fields['round']} is not open"
                + (f" (current: {open_round})" if open_round else "")
            )
        existing = self._by_token.get(fields["client_token"])
        if existing is not None:
            return existing, False

        image = SketchImage.from_bytes(sketch_bytes)
        result = validate_sketch(image, self.config.max_sketch_pixels)
        if not result.accepted:
            if result.reason == "ImageTooLarge":
                raise ImageTooLarge(
                    f"{image.width_px}x{image.height_px} exceeds pixel budget"
                )
            raise MalformedPayload(f"sketch rejected: {result.reason}")

        submission = Submission(
            submission_id=short_id("s", self.config.show_id, fields["client_token"]),
            show_id=self.config.show_id,
            client_token=fields["client_token"],
            muse_id=fields["muse_id"],
            round=fields["round"],
            sketch=image,
            received_at=now_ms,
        )
        self._by_token[fields["client_token"]] = submission
        return submission, True
