"""Pydantic schemas for the command-line inputs."""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

SweepParameter = Literal["p", "mu_b", "mu_v", "theta", "R", "C"]

# Sweep names for the economic parameters map onto EconParams fields.
ECON_FIELDS = {"R": "reward", "C": "cost"}
UNIT_INTERVAL = ("p", "mu_b", "mu_v", "theta")


class ParameterFile(BaseModel):
    """Values read from a `key=value` configuration file."""

    model_config = ConfigDict(extra="forbid")

    p: float | None = None
    mu_b: float | None = None
    mu_v: float | None = None
    theta: float | None = None
    reward: float | None = None
    cost: float | None = None
    seed: int | None = Field(default=None, ge=0)
    slots: int | None = Field(default=None, gt=0)
    warmup: int | None = Field(default=None, ge=0)

    def present(self) -> dict[str, float | int]:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class SweepSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    parameter: SweepParameter
    start: float = Field(alias="from")
    stop: float = Field(alias="to")
    step: float = Field(gt=0)
    fixed: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_range(self) -> SweepSpec:
        lo, hi = sorted((self.start, self.stop))
        if self.parameter in UNIT_INTERVAL:
            if not (0.0 < lo and hi < 1.0):
                raise ValueError(f"{self.parameter} range must lie inside (0, 1)")
        elif lo <= 0.0:
            raise ValueError(f"{self.parameter} range must be > 0")
        if self.stop < self.start:
            raise ValueError("'to' must not be below 'from'")
        if len(self.points()) < 2:
            raise ValueError("a sweep needs at least 2 points")
        return self

    def points(self) -> list[float]:
        n = math.floor((self.stop - self.start) / self.step + 1e-9) + 1
        return [round(self.start + i * self.step, 12) for i in range(n)]

    @property
    def field_name(self) -> str:
        return ECON_FIELDS.get(self.parameter, self.parameter)
