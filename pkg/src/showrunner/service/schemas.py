"""Pydantic request/response models for the service API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    error_code: str
    message: str


class SubmissionReceipt(BaseModel):
    submission_id: str
    queue_position: int


class RegisterRequest(BaseModel):
    device_id: str


class RegisterResponse(BaseModel):
    device_id: str
    muse_id: int
    seat_group: str


class DecisionRequest(BaseModel):
    decision: Literal["APPROVE", "REJECT"]
    operator: str


class DecisionResponse(BaseModel):
    ticket_id: str
    job_id: str
    decision: str
    substituted: bool
    released_asset_id: str


class TicketView(BaseModel):
    ticket_id: str
    asset_id: str
    job_id: str
    muse_id: int
    task_type: str
    created_at: int
    state: str
    decided_by: Optional[str] = None
    decided_at: Optional[int] = None
    age_ms: int = 0
    preview_url: str = ""


class ReviewListResponse(BaseModel):
    show_id: str
    tickets: list[TicketView]
    dwell_limit_ms: int


class CueRequest(BaseModel):
    seed: int = 0


class CueResponse(BaseModel):
    show_id: str
    seed: int
    selected_move_ids: list[str]
    move_names: list[str]
    poem_text: str
    source_asset_ids: list[str]


class OverrideRequest(BaseModel):
    composite: float = Field(ge=0.0, le=1.0)


class CreateShowRequest(BaseModel):
    show_id: str
    overrides: dict = Field(default_factory=dict)


class AdvanceRequest(BaseModel):
    ms: int = Field(gt=0)
