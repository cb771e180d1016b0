"""Wavelet domain attention module: forward, residual block, analytic backward.

Inputs are ``C x H x W`` feature maps or ``N x C x H x W`` batches; attention
weights are computed per sample.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .tensor_io import read_tensor, write_tensor
from .wavelet import BANDS, SubBands, haar_dwt, haar_idwt


def sigmoid(z):
    z = np.asarray(z)
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def default_hidden(c: int) -> int:
    return max(4, (4 * c) // 4)


@dataclass
class WdamParams:
    c: int
    hidden: int
    w1: np.ndarray  # hidden x 4C
    b1: np.ndarray  # hidden
    w2: np.ndarray  # 4 x hidden
    b2: np.ndarray  # 4

    ARRAYS = ("w1", "b1", "w2", "b2")

    def __post_init__(self):
        if self.hidden < 4:
            raise ValueError(f"hidden width must be >= 4, got {self.hidden}")
        expected = {
            "w1": (self.hidden, 4 * self.c),
            "b1": (self.hidden,),
            "w2": (4, self.hidden),
            "b2": (4,),
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    @classmethod
    def zeros(cls, c: int, hidden: int | None = None, dtype=np.float32) -> "WdamParams":
        hidden = default_hidden(c) if hidden is None else hidden
        return cls(
            c,
            hidden,
            np.zeros((hidden, 4 * c), dtype),
            np.zeros(hidden, dtype),
            np.zeros((4, hidden), dtype),
            np.zeros(4, dtype),
        )

    @classmethod
    def init(cls, c: int, rng: np.random.Generator, hidden: int | None = None, dtype=np.float32):
        """Glorot-uniform weights, zero biases."""
        p = cls.zeros(c, hidden, dtype)
        for name in ("w1", "w2"):
            fan_out, fan_in = getattr(p, name).shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            setattr(p, name, rng.uniform(-bound, bound, (fan_out, fan_in)).astype(dtype))
        return p

    def astype(self, dtype) -> "WdamParams":
        return WdamParams(self.c, self.hidden, *(getattr(self, n).astype(dtype) for n in self.ARRAYS))

    def copy(self) -> "WdamParams":
        return WdamParams(self.c, self.hidden, *(getattr(self, n).copy() for n in self.ARRAYS))

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in self.ARRAYS}


@dataclass(frozen=True)
class AttentionWeights:
    """Sub-band weights ordered (LL, LH, HL, HH)."""

    a: tuple[float, float, float, float]

    def as_dict(self) -> dict[str, float]:
        return {b.upper(): float(v) for b, v in zip(BANDS, self.a)}


@dataclass
class WdamCache:
    x: np.ndarray  # N x C x H x W
    bands: SubBands
    avg: np.ndarray  # N x 4C
    mx: np.ndarray  # N x 4C
    argmax: np.ndarray  # N x 4C flat spatial index
    pre_avg: np.ndarray  # N x hidden
    pre_max: np.ndarray
    h_avg: np.ndarray
    h_max: np.ndarray
    a: np.ndarray  # N x 4
    params: WdamParams
    batched: bool


def pool_subbands(xw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spatial average and max pooling of a (N x) 4C x H' x W' stack.

    Returns ``(avg, max, argmax)``; argmax is the first maximal position in a
    row-major scan.
    """
    xw = np.asarray(xw)
    flat = xw.reshape(*xw.shape[:-2], -1)
    avg = flat.mean(axis=-1)
    idx = flat.argmax(axis=-1)
    mx = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return avg, mx, idx


def _mlp(v, p: WdamParams):
    pre = v @ p.w1.T + p.b1
    h = np.maximum(pre, 0)
    return pre, h, h @ p.w2.T + p.b2


def attention_weights(avg, mx, p: WdamParams):
    """sigmoid(MLP(avg) + MLP(max)) with one MLP shared by both branches.

    Accepts vectors of length 4C or batches N x 4C. Returns an
    :class:`AttentionWeights` for a single vector, else an N x 4 array.
    """
    avg, mx = np.asarray(avg), np.asarray(mx)
    if avg.shape != mx.shape or avg.shape[-1] != 4 * p.c:
        raise ValueError(f"pooled vectors must have length {4 * p.c}, got {avg.shape} / {mx.shape}")
    a = sigmoid(_mlp(avg, p)[2] + _mlp(mx, p)[2])
    if a.ndim == 1:
        return AttentionWeights(tuple(float(v) for v in a))
    return a


def apply_subband_weights(s: SubBands, a) -> SubBands:
    """Scale each band by its weight; ``a`` may be per-sample (N x 4)."""
    if isinstance(a, AttentionWeights):
        a = a.a
    a = np.asarray(a, dtype=s.ll.dtype)
    if a.ndim == 1:
        return s.scaled(a)
    return s.scaled([a[:, k, None, None, None] for k in range(4)])


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], False
    if x.ndim == 4:
        return x, True
    raise ValueError(f"expected C x H x W or N x C x H x W input, got shape {x.shape}")


def wdam_forward(x: np.ndarray, p: WdamParams) -> tuple[np.ndarray, WdamCache]:
    xb, batched = _batched(x)
    if xb.shape[1] != p.c:
        raise ValueError(f"input has {xb.shape[1]} channels, params built for {p.c}")
    if not np.issubdtype(xb.dtype, np.floating):
        xb = xb.astype(np.float32)
    s = haar_dwt(xb)
    avg, mx, idx = pool_subbands(s.stacked())
    pre_avg, h_avg, o_avg = _mlp(avg, p)
    pre_max, h_max, o_max = _mlp(mx, p)
    a = sigmoid(o_avg + o_max).astype(xb.dtype)
    y = haar_idwt(apply_subband_weights(s, a))
    cache = WdamCache(xb, s, avg, mx, idx, pre_avg, pre_max, h_avg, h_max, a, p, batched)
    return (y if batched else y[0]), cache


def wdam_block(x: np.ndarray, p: WdamParams) -> np.ndarray:
    """Residual block: relu(x + WDAM(x))."""
    y, _ = wdam_forward(x, p)
    return np.maximum(np.asarray(x) + y, 0)


def wdam_backward(cache: WdamCache, grad_y: np.ndarray) -> tuple[np.ndarray, WdamParams]:
    """Gradients of a scalar loss w.r.t. the input and parameters, given dL/dy."""
    gy, batched = _batched(grad_y)
    if batched != cache.batched or gy.shape != cache.x.shape:
        raise ValueError(f"grad_y shape {np.shape(grad_y)} does not match cached input {cache.x.shape}")
    p, s, a = cache.params, cache.bands, cache.a
    n, c = gy.shape[:2]

    # IDWT is orthonormal, so its adjoint is the DWT.
    g = haar_dwt(gy)
    g_bands = g.bands()
    grad_a = np.stack([(gb * sb).sum(axis=(1, 2, 3)) for gb, sb in zip(g_bands, s.bands())], axis=1)
    grad_z = grad_a * a * (1 - a)

    grad_w2 = grad_z.T @ (cache.h_avg + cache.h_max)
    grad_b2 = 2 * grad_z.sum(axis=0)
    g_pre_avg = (grad_z @ p.w2) * (cache.pre_avg > 0)
    g_pre_max = (grad_z @ p.w2) * (cache.pre_max > 0)
    grad_w1 = g_pre_avg.T @ cache.avg + g_pre_max.T @ cache.mx
    grad_b1 = g_pre_avg.sum(axis=0) + g_pre_max.sum(axis=0)
    grad_avg = g_pre_avg @ p.w1  # N x 4C
    grad_max = g_pre_max @ p.w1

    # direct path through the band scaling
    gxw = np.concatenate([gb * a[:, k, None, None, None] for k, gb in enumerate(g_bands)], axis=1)
    hp, wp = gxw.shape[-2:]
    gxw = gxw + grad_avg[:, :, None, None] / (hp * wp)
    flat = gxw.reshape(n, 4 * c, hp * wp)
    np.add.at(flat, (np.arange(n)[:, None], np.arange(4 * c)[None, :], cache.argmax), grad_max)
    gxw = flat.reshape(n, 4 * c, hp, wp)

    grad_x = haar_idwt(SubBands.from_stacked(gxw, cache.x.shape))
    grads = WdamParams(p.c, p.hidden, grad_w1, grad_b1, grad_w2, grad_b2)
    return (grad_x if batched else grad_x[0]), grads


# -- verification ---------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_relative_error: float
    checked: int
    flagged: list[tuple[str, tuple[int, ...]]]


def _kinks(cache: WdamCache):
    return cache.argmax, cache.pre_avg > 0, cache.pre_max > 0


def grad_check_report(p: WdamParams, x: np.ndarray, epsilon: float = 1e-5, seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients against 64-bit central differences.

    The scalar objective is ``sum(r * wdam_forward(x))`` for a fixed random
    projection ``r``. Perturbations that move a max-pool argmax or flip a
    hidden ReLU are non-differentiable points: they are flagged and left out
    of the maximum.
    """
    if not epsilon > 0:
        raise ValueError(f"invalid finite-difference step {epsilon}")
    p = p.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    r = np.random.default_rng(seed).standard_normal(x.shape)

    y, cache = wdam_forward(x, p)
    grad_x, grad_p = wdam_backward(cache, r)
    base_kinks = _kinks(cache)

    def probe(xv, pv):
        yv, cv = wdam_forward(xv, pv)
        return float((yv * r).sum()), _kinks(cv)

    def same(k1, k2):
        return all(np.array_equal(u, v) for u, v in zip(k1, k2))

    worst, checked, flagged = 0.0, 0, []
    targets = [("x", x, grad_x)] + [(n, getattr(p, n), getattr(grad_p, n)) for n in WdamParams.ARRAYS]
    for name, arr, analytic in targets:
        for i in np.ndindex(arr.shape):
            vals = []
            kinks_ok = True
            for sign in (1, -1):
                xp, pp = x, p
                if name == "x":
                    xp = x.copy()
                    xp[i] += sign * epsilon
                else:
                    pp = p.copy()
                    getattr(pp, name)[i] += sign * epsilon
                f, k = probe(xp, pp)
                vals.append(f)
                kinks_ok &= same(k, base_kinks)
            if not kinks_ok:
                flagged.append((name, i))
                continue
            numeric = (vals[0] - vals[1]) / (2 * epsilon)
            an = float(analytic[i])
            err = abs(an - numeric) / max(1.0, abs(an), abs(numeric))
            worst = max(worst, err)
            checked += 1
    return GradCheckReport(worst, checked, flagged)


def grad_check(p: WdamParams, x: np.ndarray, epsilon: float = 1e-5) -> float:
    """Max relative error of analytic vs. central-difference gradients."""
    return grad_check_report(p, x, epsilon).max_relative_error


# -- inspection and persistence ---------------------------------------------------


def attention_for(p: WdamParams, x: np.ndarray) -> np.ndarray:
    """Per-sample attention weights (N x 4) for a batch, without the IDWT."""
    xb, _ = _batched(x)
    avg, mx, _ = pool_subbands(haar_dwt(xb).stacked())
    return sigmoid(_mlp(avg, p)[2] + _mlp(mx, p)[2])


def inspect_weights(p: WdamParams, dataset) -> dict:
    """Per-sample and mean sub-band weights over a dataset of C x H x W tensors."""
    samples = [np.asarray(x) for x in dataset]
    if not samples:
        raise ValueError("empty dataset")
    per_sample = np.concatenate([attention_for(p, x) for x in samples], axis=0)
    mean = per_sample.mean(axis=0)
    names = [b.upper() for b in BANDS]
    return {
        "bands": names,
        "mean": dict(zip(names, map(float, mean))),
        "display": dict(zip(names, (f"{v:.1f}" for v in mean))),
        "per_sample": per_sample.tolist(),
        "count": len(per_sample),
    }


def save_params(p: WdamParams, prefix: str | os.PathLike) -> None:
    prefix = os.fspath(prefix)
    for name, arr in p.arrays().items():
        write_tensor(arr, f"{prefix}.{name}.wten")
    with open(f"{prefix}.json", "w") as f:
        json.dump({"c": p.c, "hidden": p.hidden, "activation": "sigmoid"}, f, indent=2)


def load_params(prefix: str | os.PathLike) -> WdamParams:
    prefix = os.fspath(prefix)
    with open(f"{prefix}.json") as f:
        meta = json.load(f)
    arrays = [read_tensor(f"{prefix}.{name}.wten") for name in WdamParams.ARRAYS]
    return WdamParams(meta["c"], meta["hidden"], *arrays)
