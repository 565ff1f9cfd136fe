"""Request and response models for the HTTP surface.

These mirror ``harness.RunConfig`` closely so the CLI can pass payloads
through without translation. Model endpoints echo the LLM config only in
redacted form; the API key itself never leaves the process.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class LlmSettingsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base_url: Optional[str] = None
    model_name: Optional[str] = None
    api_key: Optional[str] = None
    temperature: Optional[float] = None
    timeout_ms: Optional[int] = Field(default=None, ge=1)
    max_retries: Optional[int] = Field(default=None, ge=0)
    max_in_flight: Optional[int] = Field(default=None, ge=1)


class MemorySettingsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = False
    store_path: Optional[str] = None
    record_losses: bool = False
    k: int = Field(default=3, ge=1)


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 7
    battles_per_run: int = Field(default=50, ge=1)
    repetitions: int = Field(default=10, ge=1)
    policy: Literal["random", "heuristic", "memory", "llm"] = "heuristic"
    mask: Literal["full", "no-switch", "no-item", "no-escape"] = "full"
    transport: Literal["live", "record", "replay"] = "live"
    cassette_path: Optional[str] = None
    checkpoint_path: Optional[str] = None
    encounter_path: Optional[str] = None
    prompt_path: Optional[str] = None
    output_dir: str = "runs"
    run_id: Optional[str] = None
    llm: Optional[LlmSettingsModel] = None
    memory: MemorySettingsModel = Field(default_factory=MemorySettingsModel)


class MetricsModel(BaseModel):
    battles_per_run: int
    repetitions: int
    win_counts: list[int]
    total_wins: int
    mean_win_rate: float
    sem_win_rate: float
    action_distribution: dict[str, float]
    totals: dict[str, int]
    per_repetition: list[dict]


class RunResponse(BaseModel):
    run_id: str
    run_dir: str
    metrics: MetricsModel


class AblationRequest(RunRequest):
    """Same knobs as a run; the mask field is ignored and swept instead."""


class AblationResponse(BaseModel):
    sweep_dir: str
    variants: dict[str, MetricsModel]


class PilotRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    store_path: Optional[str] = None


class PilotResponse(BaseModel):
    seeded_record_id: str
    retrieved: list[dict]
    top_is_seeded: bool
    recommendation: Optional[dict]
    decision_wire: dict
    decision_source: str
    prompt_memory_block: list[str]
    store_path: str


class CompactRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    store_path: str


class CompactResponse(BaseModel):
    store_path: str
    records: int
    removed: int


class ValidateResponse(BaseModel):
    ok: bool
    root: str
    files: list[dict]


class SessionCreateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 7
    battles_per_run: int = Field(default=50, ge=1)
    repetition: int = Field(default=0, ge=0)
    mask: Literal["full", "no-switch", "no-item", "no-escape"] = "full"
    checkpoint_path: Optional[str] = None
    encounter_path: Optional[str] = None
    prompt_path: Optional[str] = None


class MenuEntryModel(BaseModel):
    wire: dict
    label: str


class ObservationModel(BaseModel):
    battle_number: int
    turn_number: int
    forced_switch: bool
    location: str
    prompt: str
    menu: list[MenuEntryModel]


class SessionSummaryModel(BaseModel):
    outcomes: list[str]
    wins: int
    battles_per_run: int


class SessionState(BaseModel):
    session_id: str
    finished: bool
    observation: Optional[ObservationModel] = None
    result: Optional[SessionSummaryModel] = None


class SessionActionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    action: str
    index: Optional[int] = None


class SessionStepResponse(BaseModel):
    session_id: str
    accepted: bool
    error: Optional[str] = None
    lines: list[str] = Field(default_factory=list)
    battle_ended: bool = False
    battle_outcome: Optional[str] = None
    finished: bool = False
    observation: Optional[ObservationModel] = None
    result: Optional[SessionSummaryModel] = None
