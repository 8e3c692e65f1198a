"""The HTTP/WS service wrapping show engines.

One registry holds the engines for every show this process hosts; endpoints
are thin translations between the wire formats and engine calls. In virtual
mode (demo and tests) the clock only moves through POST /shows/{id}/advance,
which makes timing-dependent behavior (auto-decide, queue drain) exactly
controllable from a client.
"""

from __future__ import annotations

import json
from contextlib import asynccontextmanager

from fastapi import FastAPI, File, Form, Request, UploadFile, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from starlette.concurrency import run_in_threadpool

from ..config import MuseProfile, ShowConfig
from ..engine import ShowEngine
from ..errors import MalformedPayload, ShowError, UnknownShow, UnknownTicket
from ..imaging import mesh_bbox_preview
from ..oracle import MoveLibrary
from ..pose_metrics import PoseSequence
from . import schemas

_STATUS_BY_CODE = {
    "MalformedPayload": 400,
    "BadConfig": 400,
    "MalformedRecording": 400,
    "TooFewSteps": 400,
    "EmptySequence": 400,
    "TooFewFrames": 400,
    "NoVisibleKeypoints": 400,
    "InsufficientMoves": 400,
    "ImageTooLarge": 413,
    "UnknownJob": 404,
    "UnknownTicket": 404,
    "UnknownShow": 404,
    "UnknownTask": 404,
    "RoundClosed": 409,
    "QueueClosed": 409,
    "ShowClosed": 409,
    "ShowOpen": 409,
    "ShowFull": 409,
    "AlreadyDecided": 409,
    "DuplicateAsset": 409,
    "GateViolation": 409,
    "NoCompletedJobs": 409,
}


class ShowRegistry:
    """Creates and tracks the engines this service hosts."""

    def __init__(
        self,
        base_config: ShowConfig,
        profiles: dict[int, MuseProfile],
        library: MoveLibrary,
        virtual: bool = False,
        journal_dir=None,
    ):
        self.base_config = base_config
        self.profiles = profiles
        self.library = library
        self.virtual = virtual
        self.journal_dir = journal_dir
        self.engines: dict[str, ShowEngine] = {}

    def create(self, show_id: str, overrides: dict | None = None) -> ShowEngine:
        if show_id in self.engines:
            raise MalformedPayload(f"show {show_id} already exists")
        data = {
            k: v
            for k, v in self.base_config.__dict__.items()
            if k in ShowConfig.__dataclass_fields__ and k != "score"
        }
        data["show_id"] = show_id
        data.update(overrides or {})
        config = ShowConfig.from_dict(data)
        config.score = self.base_config.score
        journal_path = (
            None
            if self.journal_dir is None
            else f"{self.journal_dir}/{show_id}.journal.jsonl"
        )
        engine = ShowEngine(
            config,
            self.profiles,
            self.library,
            virtual=self.virtual,
            journal_path=journal_path,
        )
        engine.start()
        self.engines[show_id] = engine
        return engine

    def get(self, show_id: str) -> ShowEngine:
        try:
            return self.engines[show_id]
        except KeyError:
            raise UnknownShow(f"no show {show_id!r}") from None

    def find_asset(self, asset_id: str):
        for engine in self.engines.values():
            asset = engine.gate.get_asset(asset_id)
            if asset is not None:
                return asset
        return None

    def shutdown(self) -> None:
        for engine in self.engines.values():
            engine.stop()


def create_app(registry: ShowRegistry) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        registry.shutdown()

    app = FastAPI(title="showrunner", version="0.1.0", lifespan=lifespan)
    app.state.registry = registry

    @app.exception_handler(ShowError)
    async def show_error_handler(request: Request, exc: ShowError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status,
            content={"error_code": exc.code, "message": exc.message},
        )

    # show lifecycle

    @app.post("/shows", status_code=201)
    def create_show(body: schemas.CreateShowRequest):
        registry.create(body.show_id, body.overrides)
        return registry.get(body.show_id).status()

    @app.get("/shows/{show_id}")
    def show_status(show_id: str):
        return registry.get(show_id).status()

    @app.post("/shows/{show_id}/rounds/{round_name}/open")
    def open_round(show_id: str, round_name: str):
        engine = registry.get(show_id)
        engine.set_round(round_name)
        return engine.status()

    @app.post("/shows/{show_id}/rounds/close")
    def close_round(show_id: str):
        engine = registry.get(show_id)
        engine.set_round(None)
        return engine.status()

    @app.post("/shows/{show_id}/close")
    def close_show(show_id: str):
        engine = registry.get(show_id)
        engine.close_show()
        if engine.virtual:
            engine.finalize()
        else:
            engine.sink.close()
        if registry.journal_dir is not None:
            engine.sink.write_manifest_file(registry.journal_dir)
        return engine.status()

    @app.post("/shows/{show_id}/advance")
    def advance(show_id: str, body: schemas.AdvanceRequest):
        """Virtual-clock control for demo servers and integration tests."""
        engine = registry.get(show_id)
        if not engine.virtual:
            raise MalformedPayload("advance requires a virtual-time show")
        with engine.lock:
            engine.scheduler.run_until(engine.scheduler.now_ms() + body.ms)
        return engine.status()

    # ingest

    @app.post(
        "/shows/{show_id}/submissions",
        response_model=schemas.SubmissionReceipt,
        responses={400: {"model": schemas.ErrorBody}, 409: {"model": schemas.ErrorBody}},
    )
    async def submit(show_id: str, meta: str = Form(...), sketch: UploadFile = File(...)):
        engine = registry.get(show_id)
        try:
            meta_obj = json.loads(meta)
        except json.JSONDecodeError as exc:
            raise MalformedPayload(f"meta is not valid JSON: {exc}") from exc
        sketch_bytes = await sketch.read()
        receipt = engine.submit(meta_obj, sketch_bytes)
        return receipt

    @app.post("/shows/{show_id}/register", response_model=schemas.RegisterResponse)
    def register(show_id: str, body: schemas.RegisterRequest):
        return registry.get(show_id).register_device(body.device_id)

    # orchestrator views

    @app.get("/shows/{show_id}/latency")
    def latency(show_id: str):
        return registry.get(show_id).latency_report()

    @app.get("/shows/{show_id}/jobs/{job_id}")
    def job_state(show_id: str, job_id: str):
        return registry.get(show_id).job_state(job_id)

    # moderation

    @app.get("/shows/{show_id}/review", response_model=schemas.ReviewListResponse)
    def review(show_id: str, state: str = "PENDING", muse_id: int | None = None):
        engine = registry.get(show_id)
        now = engine.scheduler.now_ms()
        if state == "PENDING":
            tickets = engine.gate.pending(muse_id)
        else:
            tickets = [t for t in engine.gate.tickets.values() if t.state == state]
        views = [
            schemas.TicketView(
                **t.to_dict(),
                age_ms=max(0, now - t.created_at),
                preview_url=f"/assets/{t.asset_id}/preview",
            )
            for t in tickets
        ]
        return schemas.ReviewListResponse(
            show_id=show_id,
            tickets=views,
            dwell_limit_ms=engine.config.dwell_limit_ms,
        )

    @app.post("/tickets/{ticket_id}/decision", response_model=schemas.DecisionResponse)
    def decide(ticket_id: str, body: schemas.DecisionRequest):
        for engine in registry.engines.values():
            if ticket_id in engine.gate.tickets:
                outcome = engine.decide(ticket_id, body.decision, body.operator)
                return schemas.DecisionResponse(
                    ticket_id=ticket_id,
                    job_id=outcome.job_id,
                    decision=outcome.decision,
                    substituted=outcome.substituted,
                    released_asset_id=outcome.released_asset.asset_id,
                )
        raise UnknownTicket(f"no ticket {ticket_id} in any hosted show")

    @app.get("/shows/{show_id}/audit")
    def audit(show_id: str):
        engine = registry.get(show_id)
        return PlainTextResponse(
            engine.gate.audit.to_jsonl(), media_type="application/x-ndjson"
        )

    @app.get("/assets/{asset_id}/preview")
    def preview(asset_id: str):
        asset = registry.find_asset(asset_id)
        if asset is None:
            raise UnknownShow(f"no asset {asset_id}")
        if asset.kind == "MESH":
            return Response(
                mesh_bbox_preview(asset.payload.decode("utf-8")), media_type="image/png"
            )
        return Response(asset.payload, media_type="image/png")

    # oracle

    @app.post("/shows/{show_id}/oracle/cue", response_model=schemas.CueResponse)
    def oracle_cue(show_id: str, body: schemas.CueRequest):
        engine = registry.get(show_id)
        cue = engine.oracle_cue(body.seed)
        return schemas.CueResponse(
            **cue.to_dict(),
            move_names=[engine.library.get(mid).name for mid in cue.selected_move_ids],
        )

    @app.post("/shows/{show_id}/oracle/score")
    async def oracle_score(show_id: str, request: Request):
        engine = registry.get(show_id)
        body = (await request.body()).decode("utf-8")
        try:
            seq = PoseSequence.from_jsonl(body)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise MalformedPayload(f"bad pose recording: {exc}") from exc
        return engine.oracle_score(seq).to_dict()

    @app.post("/shows/{show_id}/oracle/override")
    def oracle_override(show_id: str, body: schemas.OverrideRequest):
        engine = registry.get(show_id)
        seq = engine.oracle_override(body.composite)
        return {"seq": seq, "value": body.composite}

    # event stream

    @app.websocket("/shows/{show_id}/stream")
    async def stream(websocket: WebSocket, show_id: str):
        await websocket.accept()
        try:
            engine = registry.get(show_id)
        except UnknownShow:
            await websocket.close(code=4404)
            return
        from_seq = int(websocket.query_params.get("from_seq", 0))
        sub = engine.sink.subscribe(from_seq)
        try:
            while True:
                event = await run_in_threadpool(sub.get, 2.0)
                if event is None:
                    await websocket.send_json(
                        {"kind": "HEARTBEAT", "t_ms": engine.scheduler.now_ms()}
                    )
                else:
                    await websocket.send_json(event)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            engine.sink.unsubscribe(sub)

    return app
