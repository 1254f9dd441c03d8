"""Pydantic request/response models for the session API."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class SessionCreateRequest(BaseModel):
    mask_path: str
    embedding_path: str
    frames_dir: Optional[str] = None
    dedup_tau: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    seed: int = 0


class PromptRequest(BaseModel):
    text: str
    mode: Literal["drop", "keep"]
    tau: float = Field(ge=-1.0, le=1.0)
    version: Optional[int] = None


class DecisionRequest(BaseModel):
    decision: Literal["keep", "drop"]
    version: Optional[int] = None


class ReclusterRequest(BaseModel):
    k: int = Field(ge=1)
    version: Optional[int] = None


class ResampleRequest(BaseModel):
    quota: int = Field(ge=1)
    seed: Optional[int] = None
    version: Optional[int] = None


class JobRequest(BaseModel):
    kind: Literal["recluster", "resample", "text_filter", "augment", "train", "eval"]
    params: dict[str, Any] = Field(default_factory=dict)


class ClusterView(BaseModel):
    cluster_id: int
    size: int
    decision: Literal["keep", "drop", "undecided"]
    sample_mask_ids: list[str]
    histogram: list[tuple[str, int]]


class HistogramResponse(BaseModel):
    survivors: list[tuple[str, int]]
    resampled: Optional[list[tuple[str, int]]] = None
    version: int


class SessionView(BaseModel):
    id: str
    version: int
    mask_count: int
    survivor_count: int
    prompts: list[dict[str, Any]]
    k: Optional[int]
    decisions: dict[int, str]
    resample_count: Optional[int]
    state_hash: str


class MutationResponse(BaseModel):
    result: dict[str, Any]
    session: SessionView


class ClusterMasksResponse(BaseModel):
    cluster_id: int
    mask_ids: list[str]
    page: int
    page_size: int
    total: int
    pages: int


class JobView(BaseModel):
    id: str
    session_id: str
    kind: str
    params: dict[str, Any]
    status: Literal["queued", "running", "done", "failed"]
    result: Optional[dict[str, Any]] = None
    error: Optional[dict[str, Any]] = None


class StateHashResponse(BaseModel):
    state_hash: str
    version: int


class LogResponse(BaseModel):
    entries: list[dict[str, Any]]


class ErrorBody(BaseModel):
    code: str
    message: str
    detail: Optional[Any] = None
