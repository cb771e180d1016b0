"""Mask-constrained anomaly synthesis: geometry, candidate selection, backends."""

from .backends import BackendError, HttpBackends, StubBackends
from .masks import RectSpec, foreground_stub, sample_rect_mask
from .pipeline import (
    CandidateSet,
    PromptSet,
    SynthesisConfig,
    SynthesisResult,
    builtin_distance,
    inpaint_stub,
    prompt_stub,
    select_candidate,
    synthesize_pair,
)

__all__ = [
    "BackendError",
    "CandidateSet",
    "HttpBackends",
    "PromptSet",
    "RectSpec",
    "StubBackends",
    "SynthesisConfig",
    "SynthesisResult",
    "builtin_distance",
    "foreground_stub",
    "inpaint_stub",
    "prompt_stub",
    "sample_rect_mask",
    "select_candidate",
    "synthesize_pair",
]
