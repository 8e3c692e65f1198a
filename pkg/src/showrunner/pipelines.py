"""The three generation tasks as explicit stage graphs over pluggable
backends, plus the local math between model calls: frieze compositing,
keypoint proportion correction, pose validity with library fallback, and the
identity/pose control schedule.

Each produced asset carries a manifest of ordered stage records (input
digests, output digest, backend id, declared latency) so moderation and
replay can reconstruct exactly what happened.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .backends import ModelBackend
from .config import MuseProfile
from .digests import digest_obj, sha256_hex, short_id
from .errors import BackendFailure, MissingStyleRef
from .imaging import composite_frieze, png_dimensions
from .pose import DegeneratePose, KeypointPose, control_schedule, normalize_proportions, pose_validity

ASSET_KINDS = ("BACKGROUND_IMAGE", "MUSE_TEXTURE", "MESH")

STAGE_GRAPHS = {
    "T1": ("DESCRIBE", "STYLIZE", "VARIATION", "COMPOSITE"),
    "T2": ("GARMENT_AGENT", "POSE_AGENT", "KEYPOINT_AGENT", "IDENTITY_POSE_GEN"),
    "T3": ("DESCRIBE", "SKETCH_REFINE", "VARIATION", "IMAGE_TO_MESH"),
}

LOCAL_STAGE_LATENCY_MS = 50  # in-process math stages (compositing)


@dataclass
class StageRecord:
    stage: str
    input_digests: dict
    output_digest: str
    backend_id: str
    latency_ms: int
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "input_digests": self.input_digests,
            "output_digest": self.output_digest,
            "backend_id": self.backend_id,
            "latency_ms": self.latency_ms,
            "detail": self.detail,
        }


@dataclass
class GeneratedAsset:
    asset_id: str
    job_id: str
    kind: str
    payload: bytes
    manifest: list[StageRecord]
    tags: list[str] = field(default_factory=list)

    @property
    def payload_digest(self) -> str:
        return sha256_hex(self.payload)

    @property
    def media_type(self) -> str:
        return "model/obj" if self.kind == "MESH" else "image/png"

    def total_latency_ms(self) -> int:
        return sum(r.latency_ms for r in self.manifest)

    def manifest_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.manifest]


def _digest_value(value) -> str:
    if isinstance(value, bytes):
        return sha256_hex(value)
    if isinstance(value, str):
        return sha256_hex(value.encode("utf-8"))
    return digest_obj(value)


def _tokens(text: str) -> list[str]:
    return [w for w in re.findall(r"[a-z0-9]+", text.lower()) if len(w) > 2]


class _Recorder:
    """Runs stages in order, accumulating manifest records and elapsed latency.

    Backend exceptions are normalized to BackendFailure(stage) with the
    elapsed declared latency attached, so the orchestrator can place the
    failure on the job's timeline.
    """

    def __init__(self, backends: ModelBackend):
        self.backends = backends
        self.records: list[StageRecord] = []
        self.elapsed_ms = 0

    def run(self, stage: str, inputs: dict, detail: dict | None = None):
        digests = {name: _digest_value(value) for name, value in inputs.items()}
        try:
            output, latency_ms = self.backends.invoke(stage, inputs)
        except BackendFailure as exc:
            exc.stage = stage
            exc.elapsed_ms = self.elapsed_ms + getattr(exc, "latency_ms", 0)
            exc.partial_records = list(self.records)
            raise
        except Exception as exc:
            failure = BackendFailure(stage, str(exc))
            failure.elapsed_ms = self.elapsed_ms
            failure.partial_records = list(self.records)
            raise failure from exc
        self.record(stage, digests, output, self.backends.backend_id, latency_ms, detail)
        return output

    def record(self, stage, input_digests, output, backend_id, latency_ms, detail=None):
        self.elapsed_ms += int(latency_ms)
        self.records.append(
            StageRecord(
                stage=stage,
                input_digests=input_digests,
                output_digest=_digest_value(output),
                backend_id=backend_id,
                latency_ms=int(latency_ms),
                detail=detail or {},
            )
        )


@dataclass
class PipelineContext:
    """Per-job knobs the stage graphs need beyond their inputs."""

    job_id: str
    seed: int
    intermediate_size: tuple = (512, 384)
    output_size: tuple = (1024, 768)
    frieze_margin: int = 16
    denoise_steps: int = 30
    limb_ratios: dict | None = None


def _make_asset(kind: str, job_id: str, payload: bytes, rec: _Recorder, tags) -> GeneratedAsset:
    return GeneratedAsset(
        asset_id=short_id("a", job_id, sha256_hex(payload)),
        job_id=job_id,
        kind=kind,
        payload=payload,
        manifest=rec.records,
        tags=sorted(set(tags)),
    )


def run_task1(
    sketch_png: bytes, muse: MuseProfile, backends: ModelBackend, ctx: PipelineContext
) -> GeneratedAsset:
    """Background scene: describe, stylize at the low intermediate size,
    upscale variation, then composite the muse frieze along the bottom."""
    if not muse.style_ref_png:
        raise MissingStyleRef(f"muse {muse.muse_id} has no style reference")
    ow, oh = ctx.output_size
    fw, fh = png_dimensions(muse.frieze_png)
    if fw + 2 * ctx.frieze_margin > ow or fh > oh:
        failure = BackendFailure(
            "COMPOSITE", f"frieze {fw}x{fh} cannot fit {ow}x{oh}", transient=False
        )
        failure.elapsed_ms = 0
        raise failure

    rec = _Recorder(backends)
    text = rec.run("DESCRIBE", {"sketch": sketch_png})
    inter = rec.run(
        "STYLIZE",
        {
            "text": text,
            "style_ref": muse.style_ref_png,
            "sketch": sketch_png,
            "output_size": list(ctx.intermediate_size),
        },
        detail={"size": list(ctx.intermediate_size)},
    )
    final = rec.run(
        "VARIATION", {"image": inter, "output_size": list(ctx.output_size)}
    )
    composed, x = composite_frieze(final, muse.frieze_png, ctx.seed, ctx.frieze_margin)
    rec.record(
        "COMPOSITE",
        {"image": sha256_hex(final), "frieze": sha256_hex(muse.frieze_png)},
        composed,
        "local",
        LOCAL_STAGE_LATENCY_MS,
        detail={"x": x},
    )
    return _make_asset("BACKGROUND_IMAGE", ctx.job_id, composed, rec, _tokens(text))


def run_task2(
    sketch_png: bytes, muse: MuseProfile, backends: ModelBackend, ctx: PipelineContext
) -> GeneratedAsset:
    """Muse portrait texture: garment and pose agents, keypoints with
    proportion correction and library fallback, then identity-preserving
    generation under the control schedule."""
    rec = _Recorder(backends)
    garment_text = rec.run("GARMENT_AGENT", {"garment_ref": muse.garment_ref_png})
    pose_text = rec.run("POSE_AGENT", {"sketch": sketch_png})
    raw_rows = rec.run("KEYPOINT_AGENT", {"pose_text": pose_text})

    pose = KeypointPose.from_list(raw_rows)
    fallback_id = None
    try:
        normalized = normalize_proportions(pose, ctx.limb_ratios)
        valid = pose_validity(normalized, ctx.limb_ratios)
    except DegeneratePose:
        normalized, valid = pose, False
    if not valid:
        if not muse.pose_library:
            failure = BackendFailure(
                "KEYPOINT_AGENT", "invalid pose and empty fallback library", transient=False
            )
            failure.elapsed_ms = rec.elapsed_ms
            failure.partial_records = list(rec.records)
            raise failure
        idx = random.Random(ctx.seed).randrange(len(muse.pose_library))
        normalized = muse.pose_library[idx]
        fallback_id = f"fallback-{idx}"
    rec.records[-1].detail.update(
        {"keypoints": normalized.to_list(), "validity": valid, "fallback_pose_id": fallback_id}
    )

    schedule = control_schedule(ctx.denoise_steps)
    texture = rec.run(
        "IDENTITY_POSE_GEN",
        {
            "garment_text": garment_text,
            "keypoints": normalized.to_list(),
            "identity_ref": muse.style_ref_png,
            "identity_interval": [schedule.identity_start, schedule.identity_end],
            "pose_interval": [schedule.pose_first, schedule.pose_last],
            "output_size": list(ctx.output_size),
        },
        detail={
            "identity_interval": [schedule.identity_start, schedule.identity_end],
            "pose_interval": [schedule.pose_first, schedule.pose_last],
        },
    )
    tags = _tokens(garment_text) + _tokens(pose_text)
    return _make_asset("MUSE_TEXTURE", ctx.job_id, texture, rec, tags)


def run_task3(
    sketch_png: bytes, style_ref_png: bytes, backends: ModelBackend, ctx: PipelineContext
) -> GeneratedAsset:
    """Object offering: describe, refine the sketch in the designer style,
    upscale variation, then lift to a mesh."""
    if not style_ref_png:
        raise MissingStyleRef("task 3 requires a style reference")
    rec = _Recorder(backends)
    text = rec.run("DESCRIBE", {"sketch": sketch_png})
    refined = rec.run(
        "SKETCH_REFINE",
        {
            "text": text,
            "sketch": sketch_png,
            "style_ref": style_ref_png,
            "output_size": list(ctx.intermediate_size),
        },
    )
    image = rec.run("VARIATION", {"image": refined, "output_size": list(ctx.output_size)})
    mesh_text = rec.run("IMAGE_TO_MESH", {"image": image})
    return _make_asset(
        "MESH", ctx.job_id, mesh_text.encode("utf-8"), rec, _tokens(text)
    )


def run_task(
    task_type: str,
    sketch_png: bytes,
    muse: MuseProfile,
    backends: ModelBackend,
    ctx: PipelineContext,
) -> GeneratedAsset:
    if task_type == "T1":
        return run_task1(sketch_png, muse, backends, ctx)
    if task_type == "T2":
        return run_task2(sketch_png, muse, backends, ctx)
    if task_type == "T3":
        return run_task3(sketch_png, muse.style_ref_png, backends, ctx)
    raise ValueError(f"unknown task type {task_type}")
