"""Pydantic request/response models for the verification service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class KernelRequest(BaseModel):
    manifold: str
    x: list[float]
    y: list[float]
    t: float = Field(gt=0)


class KernelResponse(BaseModel):
    manifold: str
    x: list[float]
    y: list[float]
    t: float
    value: float
    log_value: float
    tail_bound: float
    grad_ln: list[float]
    grad_norm_sq: float
    lap_ln: float
    dt_ln: float
    method: str
    error_estimate: float
    t_y: float


class CheckRequest(BaseModel):
    manifold: str
    bound: str
    tgrid: str = "0.1:10:log:20"
    res: int = Field(default=128, ge=16)
    poles: int = Field(default=8, ge=1)
    window: float = Field(default=6.0, gt=0)
    constants: dict[str, float] | None = None
    alpha: float = 2.0
    t0: float = 0.5
    trials: int = Field(default=500, ge=1)
    seed: int = 0
    fit: bool = False
    format: Literal["json", "csv"] = "json"


class SweepRequest(BaseModel):
    manifold: str
    tgrid: str = "0.1:10:log:20"
    res: int = Field(default=128, ge=16)
    poles: int = Field(default=8, ge=1)
    window: float = Field(default=6.0, gt=0)
    refine: bool = True
    format: Literal["json", "csv"] = "json"


class CounterexampleRequest(BaseModel):
    h3: bool = True
    rmax: float = Field(default=40.0, gt=1)
    t: float = Field(default=1.0, gt=0)
    steps: int = Field(default=40, ge=4)
    format: Literal["json", "csv"] = "json"


class ProductRequest(BaseModel):
    manifold: str                      # the compact factor M0
    tgrid: str = "0.1:2:log:5"
    res: int = Field(default=128, ge=16)
    points: int = Field(default=200, ge=1)
    seed: int = 0


class TransferRequest(BaseModel):
    manifold: str
    trials: int = Field(default=50, ge=1)
    seed: int = 0
    tgrid: str = "0.05:2:log:6"
    res: int = Field(default=128, ge=16)


class FitRequest(BaseModel):
    manifold: str
    tgrid: str = "0.05:10:log:20"
    res: int = Field(default=64, ge=16)
    poles: int = Field(default=8, ge=1)


class ValidateRequest(BaseModel):
    radius: float = Field(default=1.0, gt=0)
    a: float = Field(default=1.0, gt=0)
    grid_n: int = Field(default=2048, ge=128)
    n_eigs: int = Field(default=25, ge=1)
    refinement: bool = True


class ErrorBody(BaseModel):
    error_kind: Literal["usage", "numerical"]
    message: str


class CatalogResponse(BaseModel):
    version: str
    manifold_kinds: list[str]
    manifold_examples: list[str]
    bounds: list[str]
    commands: list[str]
    default_constants: dict[str, float | None]
    exit_codes: dict[str, int]
