"""Content digests and canonical JSON serialization.

Canonical form (UTF-8, sorted keys, no insignificant whitespace) is what the
show fingerprint and the audit hash chain are computed over, so it must stay
byte-stable across processes.
"""

import hashlib
import json


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj) -> bytes:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def digest_obj(obj) -> str:
    return sha256_hex(canonical_json(obj))


def short_id(prefix: str, *parts: str) -> str:
    """Deterministic opaque id: prefix + 16 hex chars of the parts' digest."""
    body = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()[:16]
    return f"{prefix}-{body}"
