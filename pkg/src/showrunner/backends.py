"""Pluggable model backends behind the stage graphs.

A backend receives (role, inputs) and returns (output, latency_ms). The mock
implementation ships with the repo and is pure: outputs are deterministic
functions of the role and a digest of the inputs, so whole shows replay
byte-identically without any model. The remote adapter posts the same
contract to an HTTP endpoint.
"""

from __future__ import annotations

import base64
import hashlib
import random
import threading

import httpx

from .digests import canonical_json, sha256_hex
from .errors import BackendFailure
from .imaging import procedural_image, unit_cube_obj
from .pose import canonical_pose

ROLES = (
    "DESCRIBE",
    "STYLIZE",
    "VARIATION",
    "POSE_AGENT",
    "KEYPOINT_AGENT",
    "GARMENT_AGENT",
    "IDENTITY_POSE_GEN",
    "SKETCH_REFINE",
    "IMAGE_TO_MESH",
    "POEM",
)
TEXT_ROLES = {"DESCRIBE", "POSE_AGENT", "GARMENT_AGENT", "POEM"}
IMAGE_ROLES = {"STYLIZE", "VARIATION", "IDENTITY_POSE_GEN", "SKETCH_REFINE"}

DEFAULT_MOCK_LATENCIES_MS = {role: (20, 60) for role in ROLES}


def _jsonable(value):
    if isinstance(value, bytes):
        return {"__bytes_sha256__": sha256_hex(value)}
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def inputs_digest(inputs: dict) -> str:
    """Digest of a stage's inputs; raw bytes are folded in by their own digest."""
    return sha256_hex(canonical_json(_jsonable(inputs)))


class ModelBackend:
    backend_id = "backend"

    def invoke(self, role: str, inputs: dict):
        """Returns (output, latency_ms)."""
        raise NotImplementedError


_WORDS = (
    "neon", "tide", "mirror", "circuit", "laurel", "ember", "static",
    "orbit", "velvet", "chrome", "lantern", "echo", "prism", "halo",
)


def _pseudo_words(digest: str, count: int) -> list[str]:
    return [_WORDS[int(digest[2 * i : 2 * i + 2], 16) % len(_WORDS)] for i in range(count)]


class MockBackend(ModelBackend):
    """Deterministic stand-in for every model role.

    Text roles emit tagged pseudo-text; image roles emit a procedural image at
    the dimensions the stage asks for (inputs["output_size"]); the mesh role
    emits a unit cube stamped with the input digest. Declared latency is
    derived from the input digest within a configurable per-role range.
    """

    backend_id = "mock"

    def __init__(self, latencies_ms=None, keypoint_wild_percent: int = 15):
        self.latencies_ms = dict(DEFAULT_MOCK_LATENCIES_MS)
        if latencies_ms:
            self.latencies_ms.update(
                {role: tuple(rng) for role, rng in latencies_ms.items()}
            )
        self.keypoint_wild_percent = keypoint_wild_percent

    def _latency(self, role: str, digest: str) -> int:
        lo, hi = self.latencies_ms[role]
        if hi <= lo:
            return int(lo)
        return int(lo) + int(digest[:8], 16) % (int(hi) - int(lo) + 1)

    def invoke(self, role: str, inputs: dict):
        if role not in ROLES:
            raise ValueError(f"unknown backend role {role}")
        digest = inputs_digest(inputs)
        latency = self._latency(role, digest)
        if role == "POEM":
            words = _pseudo_words(digest, 8)
            poem = (
                f"{words[0]} {words[1]} over {words[2]} {words[3]},\n"
                f"{words[4]} hands answer the {words[5]},\n"
                f"we move as one {words[6]} {words[7]}."
            )
            return poem, latency
        if role in TEXT_ROLES:
            return f"[{role.lower()}] " + " ".join(_pseudo_words(digest, 6)), latency
        if role in IMAGE_ROLES:
            w, h = inputs["output_size"]
            return procedural_image(int(w), int(h), f"{role}:{digest}"), latency
        if role == "KEYPOINT_AGENT":
            return self._keypoints(digest), latency
        if role == "IMAGE_TO_MESH":
            return unit_cube_obj(digest), latency
        raise ValueError(f"unhandled role {role}")

    def _keypoints(self, digest: str) -> list:
        # Wild outputs model "too abstract" sketches: scattered joints and
        # fewer than the 12 confident keypoints validity requires, so they
        # deterministically fall back to the pose library.
        rng = random.Random(int(digest[:16], 16))
        pose = canonical_pose()
        wild = rng.randrange(100) < self.keypoint_wild_percent
        spread = 0.45 if wild else 0.015
        pts = pose.points
        confident = set(range(18)) if not wild else set(rng.sample(range(18), rng.randint(4, 11)))
        for i in range(pts.shape[0]):
            pts[i, 0] += rng.uniform(-spread, spread)
            pts[i, 1] += rng.uniform(-spread, spread)
            if i in confident:
                pts[i, 2] = rng.uniform(0.8, 1.0) if wild else 1.0
            else:
                pts[i, 2] = rng.uniform(0.0, 0.29)
        return pose.to_list()


class FlakyBackend(ModelBackend):
    """Failure-injecting wrapper for fuzz and replay runs.

    Whether an invocation fails is a pure function of (seed, job_id, attempt,
    role), so retries of the same job see fresh coin flips and full replays
    are deterministic regardless of event interleaving.
    """

    def __init__(
        self,
        inner: ModelBackend,
        seed: int,
        failure_rate: float = 0.0,
        permanent_share: float = 0.2,
    ):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.seed = seed
        self.failure_rate = failure_rate
        self.permanent_share = permanent_share
        self._ctx = threading.local()

    def set_context(self, job_id: str, attempt: int) -> None:
        self._ctx.key = f"{job_id}:{attempt}"

    def invoke(self, role: str, inputs: dict):
        key = getattr(self._ctx, "key", "")
        h = hashlib.sha256(f"{self.seed}:{key}:{role}".encode()).digest()
        roll = int.from_bytes(h[:4], "big") / 2**32
        if roll < self.failure_rate:
            transient = (h[4] / 255.0) >= self.permanent_share
            raise BackendFailure(
                role,
                f"injected {'transient' if transient else 'permanent'} failure",
                transient=transient,
            )
        return self.inner.invoke(role, inputs)


class RemoteBackend(ModelBackend):
    """HTTP adapter: POST {role, inputs} to a configured URL per invocation,
    expecting {output, latency_ms}. Bytes travel base64-encoded."""

    backend_id = "remote"

    def __init__(self, url: str, timeout_s: float = 90.0, transport=None):
        self.url = url
        self.timeout_s = timeout_s
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    @staticmethod
    def _encode(value):
        if isinstance(value, bytes):
            return {"__b64__": base64.b64encode(value).decode("ascii")}
        if isinstance(value, dict):
            return {k: RemoteBackend._encode(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [RemoteBackend._encode(v) for v in value]
        return value

    @staticmethod
    def _decode(value):
        if isinstance(value, dict):
            if set(value.keys()) == {"__b64__"}:
                return base64.b64decode(value["__b64__"])
            return {k: RemoteBackend._decode(v) for k, v in value.items()}
        if isinstance(value, list):
            return [RemoteBackend._decode(v) for v in value]
        return value

    def invoke(self, role: str, inputs: dict):
        try:
            resp = self._client.post(
                self.url, json={"role": role, "inputs": self._encode(inputs)}
            )
            resp.raise_for_status()
            body = resp.json()
        except httpx.HTTPError as exc:
            raise BackendFailure(role, f"remote backend error: {exc}") from exc
        return self._decode(body["output"]), int(body.get("latency_ms", 0))


class BackendRouter(ModelBackend):
    """Role-to-backend routing with a default."""

    backend_id = "router"

    def __init__(self, default: ModelBackend, overrides=None):
        self.default = default
        self.overrides = dict(overrides or {})

    def invoke(self, role: str, inputs: dict):
        return self.overrides.get(role, self.default).invoke(role, inputs)
