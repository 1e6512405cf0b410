"""Simulation configuration: strict JSON schema with indoor-default values.

An empty JSON object loads the stock indoor setup: a 5 x 5 x 3 m room,
two ceiling LEDs 0.4 m apart at 2.25 m height, 70-degree emission
half-angle, 1 cm^2 photodiodes with a 60-degree field of view, and four
two-PD user arrays near the room center. Unknown keys are rejected.

Estimation-error levels are raw channel-entry variances when numeric;
a string like "33dB" maps to 10^(-X/10) times the mean-square entry of
the true channels (an error-to-signal ratio).
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .geometry import GeometryError, RoomGeometry, UserGeometry

VARIANTS = ("proposed", "grpa", "zf", "linear-ideal")

_DB_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*dB\s*$", re.IGNORECASE)


class ConfigError(ValueError):
    """Base class for configuration failures."""


class ConfigParseError(ConfigError):
    """The config file is not valid JSON."""


class ConfigSchemaError(ConfigError):
    """The config violates the schema (unknown keys, bad types, bad values)."""


class GeometryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    room_dims: tuple[float, float, float] = (5.0, 5.0, 3.0)
    ceiling_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    led_positions: list[tuple[float, float, float]] = Field(
        default=[(0.2, 0.0, -0.75), (-0.2, 0.0, -0.75)]
    )
    led_height: float = 2.25
    half_angle_deg: float = 70.0
    pd_area_m2: float = 1e-4
    fov_deg: float = 60.0
    user_pd_positions: list[list[tuple[float, float, float]]] = Field(
        default=[
            [(0.1, 0.1, -3.0), (0.1, -0.1, -3.0)],
            [(-0.1, 0.1, -3.0), (-0.1, -0.1, -3.0)],
            [(-0.35, 0.35, -3.0), (-0.35, -0.35, -3.0)],
            [(0.35, 0.35, -3.0), (0.35, -0.35, -3.0)],
        ]
    )

    def room(self) -> RoomGeometry:
        return RoomGeometry(
            room_dims=self.room_dims,
            led_positions=self.led_positions,
            led_height=self.led_height,
            half_angle=math.radians(self.half_angle_deg),
            ceiling_center=self.ceiling_center,
        )

    def user(self, index: int) -> UserGeometry:
        return UserGeometry(
            pd_positions=self.user_pd_positions[index],
            pd_area=self.pd_area_m2,
            fov=math.radians(self.fov_deg),
        )


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    num_users: int = 2
    modulation: int = 4
    qos_rates: list[float] = Field(default=[0.7, 0.6, 0.4, 0.4])
    snr_grid_db: list[float] = Field(default=[float(v) for v in range(0, 32, 2)])
    sigma_gamma2_levels: list[float | str] = Field(default=[0.0, "33dB", "36dB"])
    variants: list[str] = Field(default=list(VARIANTS))
    eta: float = 0.00022
    beta: float = 1.0
    n_cheb: int = 5
    lambda1: float = 1.0
    symbols_per_point: int = 100_000
    shards: int = 20
    train_fraction: float = 0.2
    train_epochs: int = 5
    i_max: float = 1.0
    rapp_p: float = 0.5
    drive_level: float = 0.8
    sum_rate_snr_db: float = 30.0
    master_seed: int = 20339
    emit_svg: bool = False

    @field_validator("eta", "beta", "i_max", "rapp_p", "drive_level")
    @classmethod
    def _positive(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive, got {v}")
        return v

    @field_validator("modulation")
    @classmethod
    def _valid_m(cls, v):
        if v not in (4, 16, 64):
            raise ValueError(f"modulation must be 4, 16 or 64, got {v}")
        return v

    @field_validator("n_cheb")
    @classmethod
    def _min_terms(cls, v):
        if v < 2:
            raise ValueError(f"n_cheb must be at least 2, got {v}")
        return v

    @field_validator("symbols_per_point")
    @classmethod
    def _enough_symbols(cls, v):
        if v < 10_000:
            raise ValueError(f"symbols_per_point must be at least 10000, got {v}")
        return v

    @field_validator("snr_grid_db")
    @classmethod
    def _increasing(cls, v):
        if len(v) < 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("snr_grid_db must be non-empty and strictly increasing")
        return v

    @field_validator("variants")
    @classmethod
    def _known_variants(cls, v):
        for tag in v:
            if tag not in VARIANTS:
                raise ValueError(f"unknown variant {tag!r}; pick from {VARIANTS}")
        if not v:
            raise ValueError("at least one variant required")
        return v

    @field_validator("sigma_gamma2_levels")
    @classmethod
    def _valid_levels(cls, v):
        if not v:
            raise ValueError("at least one estimation-error level required")
        for lev in v:
            if isinstance(lev, str):
                if not _DB_RE.match(lev):
                    raise ValueError(f"estimation-error level {lev!r} is not like '33dB'")
            elif lev < 0:
                raise ValueError(f"estimation-error variance must be nonnegative, got {lev}")
        return v

    @model_validator(mode="after")
    def _cross_checks(self):
        if not 1 <= self.num_users <= len(self.geometry.user_pd_positions):
            raise ValueError(
                f"num_users={self.num_users} needs PD arrays for each user "
                f"(have {len(self.geometry.user_pd_positions)})"
            )
        if len(self.qos_rates) < self.num_users:
            raise ValueError("need one QoS rate per user")
        if any(r <= 0 for r in self.qos_rates):
            raise ValueError("QoS rates must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0,1), got {self.train_fraction}")
        if self.shards < 1:
            raise ValueError("need at least one Monte Carlo shard")
        if self.train_epochs < 1:
            raise ValueError("need at least one training epoch")
        return self

    def validate_geometry(self) -> None:
        """Build the physical geometry once so invalid placements fail early."""
        self.geometry.room()
        for i in range(self.num_users):
            self.geometry.user(i)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True)


def resolve_sigma_level(level: float | str, channels: list[np.ndarray]) -> float:
    """Turn a configured estimation-error level into a raw entry variance.

    Numeric levels pass through; "XdB" scales the mean-square channel
    entry (averaged over users) by 10^(-X/10).
    """
    if isinstance(level, str):
        m = _DB_RE.match(level)
        if not m:
            raise ConfigSchemaError(f"bad estimation-error level {level!r}")
        ratio = 10.0 ** (-float(m.group(1)) / 10.0)
        msq = float(np.mean([np.mean(H**2) for H in channels]))
        return ratio * msq
    return float(level)


def load_config(path: str | Path) -> SimConfig:
    """Parse, schema-validate and geometry-check a JSON config file.

    Raises ConfigParseError for bad JSON, ConfigSchemaError for schema
    violations, GeometryError for physically invalid placements.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def parse_config(text: str) -> SimConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigSchemaError("config root must be a JSON object")
    try:
        cfg = SimConfig.model_validate(data)
    except Exception as exc:  # pydantic.ValidationError
        raise ConfigSchemaError(str(exc)) from exc
    cfg.validate_geometry()  # may raise GeometryError
    return cfg


__all__ = [
    "SimConfig",
    "GeometryConfig",
    "ConfigError",
    "ConfigParseError",
    "ConfigSchemaError",
    "GeometryError",
    "VARIANTS",
    "load_config",
    "parse_config",
    "resolve_sigma_level",
]
