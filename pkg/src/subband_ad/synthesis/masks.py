"""Foreground and rectangular inpainting masks.

Masks are boolean ``H x W`` numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..saliency import to_luminance

MAX_MASK_ATTEMPTS = 32


class MaskError(ValueError):
    pass


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class RectSpec:
    center: tuple[int, int]  # (row, col)
    height: int
    width: int
    aspect: float  # sampled height / width ratio
    target_area: float
    # clipped bounds, half-open
    top: int
    left: int
    bottom: int
    right: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        return d


def otsu_threshold(values: np.ndarray) -> int:
    """Otsu threshold on 8-bit quantized values; class 0 is ``q <= t``."""
    q = np.floor(np.clip(values, 0, 1) * 255 + 0.5).astype(np.int64).ravel()
    hist = np.bincount(q, minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise MaskError("constant image: no foreground separable")
    levels = np.arange(256)
    w0 = np.cumsum(hist)
    w1 = w0[-1] - w0
    s0 = np.cumsum(hist * levels)
    mu0 = s0 / np.where(w0 > 0, w0, 1)
    mu1 = (s0[-1] - s0) / np.where(w1 > 0, w1, 1)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return int(np.argmax(between[:-1]))


def foreground_stub(image: np.ndarray) -> np.ndarray:
    """Otsu split of the luminance; the side touching fewer border pixels is foreground."""
    lum = to_luminance(image)
    if lum.ndim == 3:
        lum = lum[0]
    t = otsu_threshold(lum)
    above = np.floor(np.clip(lum, 0, 1) * 255 + 0.5) > t
    border = np.ones_like(above)
    border[1:-1, 1:-1] = False
    n_above = int((above & border).sum())
    n_below = int((~above & border).sum())
    return above if n_above <= n_below else ~above


def rect_size(target_area: float, aspect: float) -> tuple[int, int]:
    """(height, width) for a rectangle of ``target_area`` and height/width ``aspect``.

    Width is ``round(sqrt(A / aspect))`` and height ``round(aspect * width)``,
    both at least 1. When that pair misses the target area by more than
    ``max(h, w)``, height is re-rounded from the area as ``round(A / w)``.
    """
    w = max(1, round_half_up(math.sqrt(target_area / aspect)))
    h = max(1, round_half_up(aspect * w))
    if abs(h * w - target_area) > max(h, w):
        h = max(1, round_half_up(target_area / w))
    return h, w


def sample_rect_mask(
    fg: np.ndarray,
    alpha: float = 0.1,
    aspect_range: tuple[float, float] = (0.5, 2.0),
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, RectSpec]:
    """Intersect the foreground with a random rectangle of area ``alpha * |fg|``."""
    fg = np.asarray(fg, dtype=bool)
    if not 0 < alpha <= 1:
        raise MaskError(f"alpha must be in (0, 1], got {alpha}")
    lo, hi = aspect_range
    if not 0 < lo <= hi:
        raise MaskError(f"invalid aspect range {aspect_range}")
    rows, cols = np.nonzero(fg)
    if rows.size == 0:
        raise MaskError("foreground mask is empty")
    rng = rng if rng is not None else np.random.default_rng()
    area = alpha * rows.size
    H, W = fg.shape
    for _ in range(MAX_MASK_ATTEMPTS):
        aspect = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        h, w = rect_size(area, aspect)
        k = int(rng.integers(rows.size))
        r, c = int(rows[k]), int(cols[k])
        top, left = r - h // 2, c - w // 2
        t, b = max(0, top), min(H, top + h)
        l, rt = max(0, left), min(W, left + w)
        rect = np.zeros_like(fg)
        rect[t:b, l:rt] = True
        m = fg & rect
        if m.any():
            return m, RectSpec((r, c), h, w, aspect, area, t, l, b, rt)
    raise MaskError(f"no non-empty intersection after {MAX_MASK_ATTEMPTS} attempts; foreground too thin")


def rect_mask(shape, spec: RectSpec) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[spec.top : spec.bottom, spec.left : spec.right] = True
    return m
