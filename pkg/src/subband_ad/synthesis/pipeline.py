"""Candidate generation and threshold-based selection for synthetic anomalies."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from ..wavelet import multi_level_dwt
from .masks import MaskError, RectSpec, sample_rect_mask

INPAINT_MIX = 0.6
FEATHER_PX = 2
NOISE_CELL = 8
DISTANCE_LEVELS = 3
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PromptSet:
    prompt: str
    negative_prompt: str


@dataclass
class SynthesisConfig:
    alpha: float = 0.1
    aspect_range: tuple[float, float] = (0.5, 2.0)
    variants_per_image: int = 5
    tau: float = 0.13
    sampler: str = "DPM++2M"
    steps: int = 20
    cfg_scale: float = 7.5
    denoising_strength: float = 0.75
    backends: dict = field(default_factory=lambda: {"segment": "stub", "prompt": "stub", "inpaint": "stub"})

    def __post_init__(self):
        self.aspect_range = tuple(float(v) for v in self.aspect_range)
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        lo, hi = self.aspect_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid aspect_range {self.aspect_range}")
        if self.variants_per_image < 1:
            raise ValueError("variants_per_image must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if not 5 <= self.cfg_scale <= 10:
            raise ValueError(f"cfg_scale must be in [5, 10], got {self.cfg_scale}")
        if not 0.5 <= self.denoising_strength <= 0.85:
            raise ValueError(f"denoising_strength must be in [0.5, 0.85], got {self.denoising_strength}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SynthesisConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def diffusion_params(self) -> dict:
        return {
            "sampler": self.sampler,
            "steps": self.steps,
            "cfg_scale": self.cfg_scale,
            "denoising_strength": self.denoising_strength,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aspect_range"] = list(self.aspect_range)
        return d


@dataclass
class Candidate:
    image: np.ndarray
    seed: int
    distance: float


@dataclass
class CandidateSet:
    candidates: list[Candidate]
    selected_index: int

    @property
    def selected(self) -> Candidate:
        return self.candidates[self.selected_index]

    def audit(self) -> list[dict]:
        return [
            {"index": i, "seed": c.seed, "distance": c.distance, "selected": i == self.selected_index}
            for i, c in enumerate(self.candidates)
        ]


@dataclass
class SynthesisResult:
    anomalous: np.ndarray
    mask: np.ndarray
    foreground: np.ndarray
    rect: RectSpec
    prompts: PromptSet
    candidates: CandidateSet


def prompt_stub(class_label: str) -> PromptSet:
    if not class_label:
        raise ValueError("empty class label")
    return PromptSet(
        prompt=f"a photo of a {class_label} with a visible defect, damaged, broken surface",
        negative_prompt=f"pristine, flawless, perfect {class_label}",
    )


def value_noise(shape: tuple[int, int], channels: int, rng: np.random.Generator) -> np.ndarray:
    """Bilinearly upsampled uniform lattice noise, channels x H x W in [0, 1]."""
    h, w = shape
    gh, gw = h // NOISE_CELL + 2, w // NOISE_CELL + 2
    grid = rng.uniform(0.0, 1.0, (channels, gh, gw))
    ys = np.arange(h) / NOISE_CELL
    xs = np.arange(w) / NOISE_CELL
    y0, x0 = np.floor(ys).astype(int), np.floor(xs).astype(int)
    fy, fx = (ys - y0)[:, None], (xs - x0)[None, :]
    g00 = grid[:, y0][:, :, x0]
    g01 = grid[:, y0][:, :, x0 + 1]
    g10 = grid[:, y0 + 1][:, :, x0]
    g11 = grid[:, y0 + 1][:, :, x0 + 1]
    return (g00 * (1 - fy) * (1 - fx) + g01 * (1 - fy) * fx + g10 * fy * (1 - fx) + g11 * fy * fx)


def inpaint_stub(image: np.ndarray, mask: np.ndarray, seed: int) -> np.ndarray:
    """Blend seeded value noise into the masked region with feathered edges.

    Mix ratio ramps linearly from 0 outside the mask to 0.6 two pixels in;
    pixels outside the mask are returned untouched.
    """
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise MaskError("inpainting mask is empty")
    if image.shape[-2:] != mask.shape:
        raise ValueError(f"mask {mask.shape} does not match image {image.shape}")
    rng = np.random.default_rng(seed)
    noise = value_noise(mask.shape, image.shape[0], rng)
    if mask.all():
        dist = np.full(mask.shape, np.inf)
    else:
        dist = distance_transform_edt(mask)
    weight = INPAINT_MIX * np.minimum(1.0, dist / FEATHER_PX)
    out = image.copy()
    blended = (1 - weight) * image + weight * noise
    out[:, mask] = blended[:, mask].astype(image.dtype)
    return out


def builtin_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Wavelet-domain perceptual-distance proxy.

    Mean absolute difference of every detail band at each of three levels plus
    the deepest LL band, averaged over those ten terms.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    levels = multi_level_dwt(a - b, DISTANCE_LEVELS)
    terms = [np.abs(band).mean() for s in levels for band in (s.lh, s.hl, s.hh)]
    terms.append(np.abs(levels[-1].ll).mean())
    return float(np.mean(terms))


def select_candidate(distances, tau: float) -> int:
    """Index minimizing |d - tau|; near-ties (within 1e-12) go to the smallest index."""
    distances = list(distances)
    if not distances:
        raise ValueError("no candidates to select from")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    gaps = [abs(d - tau) for d in distances]
    best = min(gaps)
    tol = TIE_TOLERANCE * max(1.0, abs(tau))
    return next(i for i, g in enumerate(gaps) if g <= best + tol)


def variant_seeds(seed: int, n: int) -> list[int]:
    return [seed + k for k in range(n)]


def load_distances(path: str | os.PathLike) -> dict[int, float]:
    with open(path) as f:
        raw = json.load(f)
    out = {}
    for k, v in raw.items():
        v = float(v)
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"distance for seed {k} must be finite and >= 0, got {v}")
        out[int(k)] = v
    return out


def synthesize_pair(
    normal_image: np.ndarray,
    class_label: str,
    cfg: SynthesisConfig,
    backends,
    seed: int,
    distances: dict[int, float] | None = None,
) -> SynthesisResult:
    """Run segmentation, mask sampling, prompting, inpainting and selection.

    Variant ``k`` is inpainted with seed ``seed + k``. ``distances`` maps
    those seeds to precomputed perceptual distances and, when given,
    replaces :func:`builtin_distance`.
    """
    normal_image = np.asarray(normal_image)
    rng = np.random.default_rng(seed)
    fg = backends.segment(normal_image)
    mask, rect = sample_rect_mask(fg, cfg.alpha, cfg.aspect_range, rng)
    prompts = backends.prompt(class_label)
    seeds = variant_seeds(seed, cfg.variants_per_image)

    def run(k_seed):
        k, s = k_seed
        return backends.inpaint(normal_image, mask, prompts, s, cfg.diffusion_params(), attempt=k)

    workers = min(len(seeds), getattr(backends, "max_concurrency", 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            images = list(pool.map(run, enumerate(seeds)))
    else:
        images = [run(ks) for ks in enumerate(seeds)]

    candidates = []
    for s, img in sorted(zip(seeds, images), key=lambda t: t[0]):
        if distances is not None:
            if s not in distances:
                raise KeyError(f"distances file has no entry for seed {s}")
            d = distances[s]
        else:
            d = builtin_distance(img, normal_image)
        candidates.append(Candidate(img, s, d))
    idx = select_candidate([c.distance for c in candidates], cfg.tau)
    cset = CandidateSet(candidates, idx)
    return SynthesisResult(cset.selected.image, mask, fg, rect, prompts, cset)
