"""Anomaly-map rendering through fixed 256-entry colormaps.

``jet``: for t = i / 255, each channel is
``clip(1.5 - |4t - c|, 0, 1)`` with c = 3 (red), 2 (green), 1 (blue),
scaled to 0..255 and rounded half up. ``gray``: entry i is (i, i, i).
"""

from __future__ import annotations

import warnings

import numpy as np


def _jet() -> np.ndarray:
    t = np.arange(256) / 255.0
    chans = [np.clip(1.5 - np.abs(4 * t - c), 0, 1) for c in (3, 2, 1)]
    return np.floor(np.stack(chans, axis=1) * 255 + 0.5).astype(np.uint8)


COLORMAPS = {
    "jet": _jet(),
    "gray": np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1),
}


class ConstantMapWarning(UserWarning):
    pass


def colormap_indices(anomaly_map: np.ndarray) -> np.ndarray:
    """Min-max normalize to table indices 0..255; a constant map maps to 128."""
    m = np.asarray(anomaly_map, dtype=np.float64)
    if m.ndim == 3 and m.shape[0] == 1:
        m = m[0]
    if m.ndim != 2:
        raise ValueError(f"anomaly map must be H x W, got shape {m.shape}")
    lo, hi = m.min(), m.max()
    if hi == lo:
        warnings.warn("constant anomaly map; rendering uniform mid-colour", ConstantMapWarning, stacklevel=2)
        return np.full(m.shape, 128, dtype=np.int64)
    return np.floor((m - lo) / (hi - lo) * 255 + 0.5).astype(np.int64)


def render_heatmap(anomaly_map: np.ndarray, colormap: str = "jet", overlay: np.ndarray | None = None) -> np.ndarray:
    """Return an H x W x 3 uint8 image, optionally blended 50/50 with ``overlay``.

    ``overlay`` is a uint8 H x W x C image (C = 1 or 3).
    """
    if colormap not in COLORMAPS:
        raise ValueError(f"unknown colormap {colormap!r}; choose from {sorted(COLORMAPS)}")
    rgb = COLORMAPS[colormap][colormap_indices(anomaly_map)]
    if overlay is not None:
        ov = np.asarray(overlay)
        if ov.ndim == 2:
            ov = ov[:, :, None]
        if ov.shape[:2] != rgb.shape[:2]:
            raise ValueError(f"overlay {ov.shape[:2]} does not match map {rgb.shape[:2]}")
        ov = np.broadcast_to(ov, rgb.shape).astype(np.float64)
        rgb = np.floor(0.5 * rgb + 0.5 * ov + 0.5).astype(np.uint8)
    return rgb
