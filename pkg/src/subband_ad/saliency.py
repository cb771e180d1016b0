"""Per-sub-band anomaly prominence over normal/anomalous image pairs."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .wavelet import BANDS, haar_dwt

LUMA = np.array([0.299, 0.587, 0.114])


class DegenerateInputError(ValueError):
    pass


@dataclass
class SaliencyProfile:
    class_name: str
    values: tuple[float, float, float, float]  # LL, LH, HL, HH
    pair_count: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        d["bands"] = [b.upper() for b in BANDS]
        return d


def to_luminance(x: np.ndarray) -> np.ndarray:
    """Collapse a 3 x H x W RGB tensor to 1 x H x W luminance; other shapes pass through."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3 and x.shape[0] == 3:
        return np.tensordot(LUMA, x, axes=1)[None]
    return x


def subband_variation(normal: np.ndarray, anomalous: np.ndarray) -> np.ndarray:
    """Unnormalized per-band sum of |DWT(anomalous) - DWT(normal)|."""
    normal = to_luminance(normal)
    anomalous = to_luminance(anomalous)
    if normal.shape != anomalous.shape:
        raise ValueError(f"shape mismatch: {normal.shape} vs {anomalous.shape}")
    sn, sa = haar_dwt(normal), haar_dwt(anomalous)
    return np.array([np.abs(a - n).sum() for a, n in zip(sa.bands(), sn.bands())])


def class_saliency(pairs, class_name: str = "", normalize_per_pair: bool = False) -> SaliencyProfile:
    """Average per-band variation over pairs, then normalize across bands.

    With ``normalize_per_pair`` each pair is normalized before averaging, and
    pairs without any variation are skipped.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    rows = np.array([subband_variation(n, a) for n, a in pairs])
    if normalize_per_pair:
        totals = rows.sum(axis=1)
        keep = totals > 0
        if not keep.any():
            raise DegenerateInputError("every pair is identical; normalization undefined")
        acc = (rows[keep] / totals[keep, None]).mean(axis=0)
    else:
        acc = rows.mean(axis=0)
    total = acc.sum()
    if total <= 0:
        raise DegenerateInputError("every pair is identical; normalization undefined")
    return SaliencyProfile(class_name, tuple(float(v) for v in acc / total), len(pairs))
