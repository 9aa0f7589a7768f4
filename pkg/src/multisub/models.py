"""Pydantic models for scheme files and emitted reports."""

from fractions import Fraction
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, StrictInt, field_serializer, field_validator

from multisub.rational import format_rational, parse_rational


def _wrap_scalar(value: Any) -> Any:
    """Accept a bare integer where a 1-D vector is expected."""
    if isinstance(value, int) and not isinstance(value, bool):
        return [value]
    return value


# Scheme file models
class MaskEntry(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    point: list[StrictInt] = Field(min_length=1)
    value: Fraction

    @field_validator("point", mode="before")
    @classmethod
    def _point(cls, v: Any) -> Any:
        return _wrap_scalar(v)

    @field_validator("value", mode="before")
    @classmethod
    def _exact(cls, v: Any) -> Fraction:
        return parse_rational(v)

    @field_serializer("value")
    def _format(self, v: Fraction) -> str:
        return format_rational(v)


class OperatorEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: Optional[str] = None
    dilation: list[list[StrictInt]] = Field(min_length=1)
    digits: Optional[list[list[StrictInt]]] = None
    mask: list[MaskEntry] = Field(min_length=1)
    shift_mask: bool = True

    @field_validator("dilation", mode="before")
    @classmethod
    def _dilation(cls, v: Any) -> Any:
        if isinstance(v, int) and not isinstance(v, bool):
            return [[v]]
        return v

    @field_validator("digits", mode="before")
    @classmethod
    def _digits(cls, v: Any) -> Any:
        if isinstance(v, list):
            return [_wrap_scalar(d) for d in v]
        return v


class SchemeFile(BaseModel):
    """On-disk description of a scheme set."""

    model_config = ConfigDict(extra="forbid")

    dimension: StrictInt = Field(ge=1)
    operators: list[OperatorEntry] = Field(min_length=1)


# Output models
class TransitionEntry(BaseModel):
    op_label: str
    op_index: int
    digit: list[int]
    rows: list[list[str]]


class TransitionDump(BaseModel):
    omega: list[list[int]]
    provenance: str
    matrices: list[TransitionEntry]


class CertificateLetter(BaseModel):
    digit: list[int]
    op_label: str


class Certificate(BaseModel):
    lower: float
    upper: Optional[float] = None  # None when no finite upper bound was found
    status: str
    method: Optional[str] = None
    word: list[CertificateLetter] = Field(default_factory=list)
    depth: Optional[int] = None
    vertices: Optional[int] = None


class StageRecord(BaseModel):
    stage: str
    status: str
    detail: str
    data: dict[str, Any] = Field(default_factory=dict)


class OmegaSummary(BaseModel):
    provenance: str
    size: int
    seeded_from: Optional[list[list[int]]] = None
    dim_v: int
    dim_vtilde: int
    components: int


class ConvergenceReportModel(BaseModel):
    verdict: str
    power: int
    assumptions: dict[str, Any]
    omega: Optional[OmegaSummary] = None
    certificate: Optional[Certificate] = None
    trail: list[StageRecord]
