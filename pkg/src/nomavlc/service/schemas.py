"""Pydantic request/response models for the simulator service.

Every job request carries an optional config object (same schema as the
JSON config file; omitted fields take the indoor defaults) plus the same
overrides the CLI exposes: seed, variant filter and an SNR range string
"lo:hi:step". Results come back as named CSV artifacts so clients decide
where files land.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class JobRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict = Field(default_factory=dict)
    seed: int | None = None
    variant: str | None = None
    snr: str | None = Field(default=None, description="SNR grid override, 'lo:hi:step' in dB")


class Artifact(BaseModel):
    name: str
    content: str


class JobResponse(BaseModel):
    artifacts: list[Artifact]
    notices: list[str] = Field(default_factory=list)
    summary: dict = Field(default_factory=dict)


class ErrorBody(BaseModel):
    error: str
    detail: str


class MuLadderRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    modulation: int = 4
    powers: list[float] | None = None
    qos_rates: list[float] | None = None
    noise_variances: list[float] = Field(default=[0.05, 0.01, 0.001])


class MuLadderLayer(BaseModel):
    layer: int
    moduli: list[float]


class MuLadderResponse(BaseModel):
    powers: list[float]
    layers: list[MuLadderLayer]
    bounds: list[dict]


class TheoremCase(BaseModel):
    kappa: float
    pair: int
    left: float
    right: float
    std_error: float
    holds: bool


class TheoremResponse(BaseModel):
    cases: list[TheoremCase]
    all_hold: bool
    artifacts: list[Artifact]


class HealthResponse(BaseModel):
    status: str
    version: str
