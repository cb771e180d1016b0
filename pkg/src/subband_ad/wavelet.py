"""Orthonormal Haar DWT/IDWT as fixed 2x2 stride-2 per-channel convolutions.

Operates on the trailing two (spatial) axes, so any leading channel/batch
axes are carried through untouched.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .tensor_io import read_tensor, write_tensor

BANDS = ("ll", "lh", "hl", "hh")

# Rows index the band (LL, LH, HL, HH); LH is high-pass along width.
HAAR_KERNELS = 0.5 * np.array(
    [
        [[1, 1], [1, 1]],
        [[1, -1], [1, -1]],
        [[1, 1], [-1, -1]],
        [[1, -1], [-1, 1]],
    ],
    dtype=np.float64,
)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SubBands:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    source_shape: tuple[int, ...]

    def __post_init__(self):
        shapes = {b.shape for b in self.bands()}
        if len(shapes) != 1:
            raise DimensionError(f"sub-band shapes differ: {sorted(shapes)}")
        (shape,) = shapes
        src = tuple(self.source_shape)
        if src[:-2] != shape[:-2] or src[-2] != 2 * shape[-2] or src[-1] != 2 * shape[-1]:
            raise DimensionError(f"source shape {src} inconsistent with sub-band shape {shape}")

    def bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.ll, self.lh, self.hl, self.hh)

    def stacked(self) -> np.ndarray:
        """Concatenate bands along the channel axis in LL, LH, HL, HH order."""
        return np.concatenate(self.bands(), axis=-3)

    @classmethod
    def from_stacked(cls, xw: np.ndarray, source_shape) -> "SubBands":
        return cls(*np.split(xw, 4, axis=-3), source_shape=tuple(source_shape))

    def scaled(self, weights) -> "SubBands":
        return SubBands(*(b * w for b, w in zip(self.bands(), weights)), source_shape=self.source_shape)


def _check_even(shape):
    if len(shape) < 2:
        raise DimensionError(f"need at least 2 spatial axes, got shape {shape}")
    h, w = shape[-2:]
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise DimensionError(
            f"spatial extents must be even and >= 2, got {h}x{w}; pad the input first"
        )


def haar_dwt(x: np.ndarray) -> SubBands:
    """Single-level Haar decomposition of ``x`` (..., H, W)."""
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float32)
    _check_even(x.shape)
    k = HAAR_KERNELS.astype(x.dtype)
    # stride-2 2x2 correlation: the four polyphase components are the taps
    taps = [[x[..., a::2, b::2] for b in range(2)] for a in range(2)]
    out = [
        k[n, 0, 0] * taps[0][0] + k[n, 0, 1] * taps[0][1] + k[n, 1, 0] * taps[1][0] + k[n, 1, 1] * taps[1][1]
        for n in range(4)
    ]
    return SubBands(*out, source_shape=x.shape)


def haar_idwt(s: SubBands) -> np.ndarray:
    """Transposed-convolution inverse of :func:`haar_dwt`."""
    dtype = np.result_type(*s.bands())
    k = HAAR_KERNELS.astype(dtype)
    out = np.empty(s.source_shape, dtype=dtype)
    ll, lh, hl, hh = s.bands()
    for a in range(2):
        for b in range(2):
            out[..., a::2, b::2] = k[0, a, b] * ll + k[1, a, b] * lh + k[2, a, b] * hl + k[3, a, b] * hh
    return out


def multi_level_dwt(x: np.ndarray, levels: int) -> list[SubBands]:
    """Decompose repeatedly; level k+1 decomposes level k's LL band."""
    if levels < 1:
        raise ValueError(f"levels must be positive, got {levels}")
    x = np.asarray(x)
    h, w = x.shape[-2:]
    f = 2**levels
    if h % f or w % f:
        raise DimensionError(f"spatial extents {h}x{w} not divisible by 2**{levels}={f}")
    out = []
    for _ in range(levels):
        s = haar_dwt(x)
        out.append(s)
        x = s.ll
    return out


def multi_level_idwt(levels: list[SubBands]) -> np.ndarray:
    """Reconstruct bottom-up from the deepest LL and every level's detail bands."""
    ll = levels[-1].ll
    for s in reversed(levels):
        ll = haar_idwt(SubBands(ll, s.lh, s.hl, s.hh, source_shape=s.source_shape))
    return ll


def save_subbands(s: SubBands, prefix: str | os.PathLike, extra: dict | None = None) -> None:
    """Write ``<prefix>.{ll,lh,hl,hh}.wten`` plus a ``<prefix>.json`` sidecar."""
    prefix = os.fspath(prefix)
    for name, band in zip(BANDS, s.bands()):
        write_tensor(band, f"{prefix}.{name}.wten")
    meta = {"source_shape": list(s.source_shape), **(extra or {})}
    with open(f"{prefix}.json", "w") as f:
        json.dump(meta, f, indent=2)


def load_subbands(prefix: str | os.PathLike) -> SubBands:
    prefix = os.fspath(prefix)
    with open(f"{prefix}.json") as f:
        meta = json.load(f)
    bands = [read_tensor(f"{prefix}.{name}.wten") for name in BANDS]
    return SubBands(*bands, source_shape=tuple(meta["source_shape"]))
