"""Request/response models for the backend wire contract and core endpoints."""

from typing import Optional

from pydantic import BaseModel, Field


class SegmentRequest(BaseModel):
    image: str = Field(description="base64 PPM/PGM")
    point_hint: Optional[list[int]] = Field(default=None, description="(row, col) inside the object")


class SegmentResponse(BaseModel):
    mask: str = Field(description="base64 PGM, 255 = foreground")


class PromptRequest(BaseModel):
    class_label: str


class PromptResponse(BaseModel):
    prompt: str
    negative_prompt: str


class InpaintRequest(BaseModel):
    image: str
    mask: str
    prompt: str
    negative_prompt: str = ""
    seed: int = Field(ge=0, lt=2**64)
    steps: int = 20
    cfg_scale: float = 7.5
    denoising_strength: float = 0.75
    sampler: str = "DPM++2M"


class InpaintResponse(BaseModel):
    image: str


class ErrorResponse(BaseModel):
    error: str


class SelectRequest(BaseModel):
    distances: list[float] = Field(min_length=1)
    tau: float = Field(default=0.13, ge=0)


class SelectResponse(BaseModel):
    index: int
    tau: float


class AurocRequest(BaseModel):
    scores: list[float]
    labels: list[int]


class AurocResponse(BaseModel):
    auroc: float


class MaskRequest(BaseModel):
    foreground: str = Field(description="base64 PGM foreground mask")
    alpha: float = Field(default=0.1, gt=0, le=1)
    aspect_range: tuple[float, float] = (0.5, 2.0)
    seed: int = Field(ge=0)


class MaskResponse(BaseModel):
    mask: str
    area: int
    rect: dict
    seed: int


class HealthResponse(BaseModel):
    status: str
    version: str
