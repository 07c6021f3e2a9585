"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..search_space import GENOME_LENGTH


class MacroSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    layers: int = Field(default=5, ge=1)
    channels: int = Field(default=10, ge=1)
    reductions: list[int] | None = None  # default: thirds of the stack
    classes: int = Field(default=10, ge=2)


class EvalSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    classifiers: int = Field(default=5, ge=1)
    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=512, ge=1)
    lr0: float = Field(default=0.25, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)


class SearchSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pop: int = Field(default=20, ge=2)
    generations: int = Field(default=30, ge=0)
    crossover_prob: float = Field(default=0.9, ge=0, le=1)
    mutation_prob: float = Field(default=1.0 / GENOME_LENGTH, ge=0, le=1)
    eta_m: float = Field(default=20.0, ge=0)


class DataSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    root: str | None = None  # falls back to the service's data root
    train_fraction: float = Field(default=0.8, gt=0, lt=1)
    subsample: list[int] | None = None  # [train, validation]
    split_seed: int = Field(default=0, ge=0)


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    genome: list[int] = Field(min_length=GENOME_LENGTH, max_length=GENOME_LENGTH)
    seed: int = Field(default=0, ge=0)
    macro: MacroSettings = MacroSettings()
    eval: EvalSettings = EvalSettings()
    data: DataSettings = DataSettings()


class EvaluateResponse(BaseModel):
    error: float
    flops: int
    wall_time_s: float
    config: dict


class FlopsRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    genome: list[int] = Field(min_length=GENOME_LENGTH, max_length=GENOME_LENGTH)
    macro: MacroSettings = MacroSettings()


class LayerCostModel(BaseModel):
    layer: str
    flops: int
    params: int
    output_shape: list[int]


class FlopsResponse(BaseModel):
    flops: int
    params: int
    per_layer: list[LayerCostModel]


class SearchRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    search: SearchSettings = SearchSettings()
    macro: MacroSettings = MacroSettings()
    eval: EvalSettings = EvalSettings()
    data: DataSettings = DataSettings()
    threads: int = Field(default=1, ge=1)


class FrontEntry(BaseModel):
    genome: list[int]
    error: float
    flops: float


class SearchResponse(BaseModel):
    history: dict
    front: list[FrontEntry]
    interrupted: bool = False


class CorrelateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    predictions: dict[str, float]
    truth: dict[str, float]
    truth_provenance: str = ""


class CorrelateResponse(BaseModel):
    rho: float
    n: int
    truth_provenance: str
    pairs: list[dict]


class HealthResponse(BaseModel):
    status: str
    version: str
