"""Tiny classifier (conv, WDAM block, linear head) on band-pure synthetic anomalies.

Used to show that the attention weights move toward the sub-band carrying
the anomaly.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor_io import read_tensor, write_tensor
from .wavelet import BANDS
from .wdam import WdamParams, inspect_weights, load_params, save_params, wdam_backward, wdam_forward

log = logging.getLogger(__name__)

IMAGE_SIZE = 32
PATCH_SIZE = 8
PATCH_AMPLITUDE = 0.5
NOISE_STD = 0.02
SURFACE_COEF = 0.1  # bound on every polynomial coefficient
FEATURES = 8
CLASSES = 2


class TrainingError(RuntimeError):
    pass


# -- dataset ----------------------------------------------------------------------


def band_pattern(band: str, size: int = PATCH_SIZE, amplitude: float = PATCH_AMPLITUDE) -> np.ndarray:
    """A size x size patch whose Haar transform lives entirely in ``band``."""
    band = band.lower()
    r = np.arange(size)[:, None] % 2
    c = np.arange(size)[None, :] % 2
    sign_w = 1 - 2 * c  # +1, -1 along width
    sign_h = 1 - 2 * r
    pattern = {
        "ll": np.ones((size, size)),
        "lh": np.broadcast_to(sign_w, (size, size)),
        "hl": np.broadcast_to(sign_h, (size, size)),
        "hh": sign_h * sign_w,
    }
    if band not in pattern:
        raise ValueError(f"band must be one of LL, LH, HL, HH; got {band!r}")
    return amplitude * pattern[band].astype(np.float64)


def smooth_surface(rng: np.random.Generator, size: int = IMAGE_SIZE) -> np.ndarray:
    """Random quadratic surface in two variables plus small Gaussian noise."""
    t = np.linspace(-1.0, 1.0, size)
    yy, xx = np.meshgrid(t, t, indexing="ij")
    c = rng.uniform(-SURFACE_COEF, SURFACE_COEF, 6)
    surf = c[0] + c[1] * xx + c[2] * yy + c[3] * xx**2 + c[4] * xx * yy + c[5] * yy**2
    return surf + rng.normal(0.0, NOISE_STD, surf.shape)


def inject_patch(base: np.ndarray, band: str, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Add a random-sign band-pure patch at a 2x2-aligned uniform location.

    Returns ``(anomalous, difference)``; ``base`` is not modified.
    """
    size = base.shape[-1]
    slots = (size - PATCH_SIZE) // 2 + 1
    r0, c0 = 2 * int(rng.integers(slots)), 2 * int(rng.integers(slots))
    sign = 1.0 if rng.integers(2) else -1.0
    diff = np.zeros_like(base)
    diff[r0 : r0 + PATCH_SIZE, c0 : c0 + PATCH_SIZE] = sign * band_pattern(band)
    return base + diff, diff


@dataclass
class SyntheticDataset:
    samples: list[tuple[np.ndarray, int]]
    seed: int
    band: str = "HH"

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.stack([s for s, _ in self.samples])
        y = np.array([label for _, label in self.samples], dtype=np.int64)
        return x, y

    def __len__(self):
        return len(self.samples)


def make_subband_dataset(n_per_class: int, band: str = "HH", seed: int = 0) -> SyntheticDataset:
    """Balanced dataset of 1 x 32 x 32 images; label 1 carries a ``band`` patch."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    band_pattern(band)  # validates the band name
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_per_class):
        samples.append((smooth_surface(rng)[None].astype(np.float32), 0))
    for _ in range(n_per_class):
        anomalous, _ = inject_patch(smooth_surface(rng), band, rng)
        samples.append((anomalous[None].astype(np.float32), 1))
    return SyntheticDataset(samples, seed, band.upper())


# -- network ------------------------------------------------------------------------


@dataclass
class DemoNet:
    conv_w: np.ndarray  # FEATURES x C_in x 3 x 3
    conv_b: np.ndarray  # FEATURES
    wdam: WdamParams
    head_w: np.ndarray  # CLASSES x FEATURES
    head_b: np.ndarray  # CLASSES

    ARRAYS = ("conv_w", "conv_b", "head_w", "head_b")

    @classmethod
    def init(cls, seed: int, in_channels: int = 1, dtype=np.float32) -> "DemoNet":
        rng = np.random.default_rng(seed)
        # He-uniform: the conv feeds a ReLU, and the smaller Glorot range left
        # the patch signal too weak to steer the attention reliably
        bound = math.sqrt(6.0 / (in_channels * 9))
        conv_w = rng.uniform(-bound, bound, (FEATURES, in_channels, 3, 3)).astype(dtype)
        wdam = WdamParams.init(FEATURES, rng, dtype=dtype)
        # zero output layer: every band starts at attention 0.5, so any
        # ordering after training is learned rather than inherited from init
        wdam.w2[:] = 0
        bound = math.sqrt(6.0 / (FEATURES + CLASSES))
        head_w = rng.uniform(-bound, bound, (CLASSES, FEATURES)).astype(dtype)
        return cls(conv_w, np.zeros(FEATURES, dtype), wdam, head_w, np.zeros(CLASSES, dtype))

    def copy(self) -> "DemoNet":
        return DemoNet(*(getattr(self, n).copy() for n in ("conv_w", "conv_b")), self.wdam.copy(),
                       self.head_w.copy(), self.head_b.copy())

    def astype(self, dtype) -> "DemoNet":
        return DemoNet(self.conv_w.astype(dtype), self.conv_b.astype(dtype), self.wdam.astype(dtype),
                       self.head_w.astype(dtype), self.head_b.astype(dtype))

    def parameters(self) -> dict[str, np.ndarray]:
        out = {n: getattr(self, n) for n in self.ARRAYS}
        out.update({f"wdam.{k}": v for k, v in self.wdam.arrays().items()})
        return out

    def features(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Zero-padded 3x3 convolution; returns (output, input patches)."""
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        patches = sliding_window_view(xp, (3, 3), axis=(2, 3))  # N C H W 3 3
        u = np.einsum("nchwij,ocij->nohw", patches, self.conv_w, optimize=True)
        return u + self.conv_b[None, :, None, None], patches

    def forward(self, x: np.ndarray):
        u, patches = self.features(x)
        y, wcache = wdam_forward(u, self.wdam)
        pre = u + y
        v = np.maximum(pre, 0)
        g = v.mean(axis=(2, 3))
        logits = g @ self.head_w.T + self.head_b
        return logits, (patches, wcache, pre, g)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0].argmax(axis=1)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(labels)
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1
    return loss, grad / n


def loss_and_grads(net: DemoNet, x: np.ndarray, labels: np.ndarray) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    logits, (patches, wcache, pre, g) = net.forward(x)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    grads = {"head_w": dlogits.T @ g, "head_b": dlogits.sum(axis=0)}
    dg = dlogits @ net.head_w
    hw = pre.shape[2] * pre.shape[3]
    dpre = (dg[:, :, None, None] / hw) * (pre > 0)
    du_wdam, gp = wdam_backward(wcache, dpre)
    du = dpre + du_wdam
    grads["conv_w"] = np.einsum("nohw,nchwij->ocij", du, patches, optimize=True)
    grads["conv_b"] = du.sum(axis=(0, 2, 3))
    grads.update({f"wdam.{k}": v for k, v in gp.arrays().items()})
    return loss, grads, logits


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 0.05
    batch: int = 16
    seed: int = 0


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"loss": self.loss, "accuracy": self.accuracy}


def train(net: DemoNet, data: SyntheticDataset, hyper: TrainConfig | None = None) -> tuple[DemoNet, History]:
    """Plain minibatch SGD on softmax cross-entropy; ``net`` is left unmodified."""
    hyper = hyper or TrainConfig()
    if hyper.batch < 1 or hyper.epochs < 0:
        raise ValueError("batch must be >= 1 and epochs >= 0")
    net = net.copy()
    history = History()
    x, y = data.arrays()
    rng = np.random.default_rng(hyper.seed)
    params = net.parameters()
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(y))
        total, correct = 0.0, 0
        for start in range(0, len(y), hyper.batch):
            idx = order[start : start + hyper.batch]
            loss, grads, logits = loss_and_grads(net, x[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch starting {start}")
            for name, g in grads.items():
                params[name] -= (hyper.lr * g).astype(params[name].dtype)
            total += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y[idx]).sum())
        history.loss.append(total / len(y))
        history.accuracy.append(correct / len(y))
        log.info("epoch %d loss %.4f acc %.3f", epoch + 1, history.loss[-1], history.accuracy[-1])
    return net, history


def evaluate(net: DemoNet, data: SyntheticDataset) -> dict:
    """Accuracy, per-class accuracy and mean attention weights over ``data``."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    x, y = data.arrays()
    pred = net.predict(x)
    per_class = {}
    for k in range(CLASSES):
        sel = y == k
        if sel.any():
            per_class[str(k)] = float((pred[sel] == k).mean())
    u, _ = net.features(x)
    weights = inspect_weights(net.wdam, [u])
    return {
        "accuracy": float((pred == y).mean()),
        "per_class_accuracy": per_class,
        "mean_weights": weights["mean"],
        "display_weights": weights["display"],
    }


def save_net(net: DemoNet, directory: str | os.PathLike) -> None:
    os.makedirs(directory, exist_ok=True)
    for name in DemoNet.ARRAYS:
        write_tensor(getattr(net, name), os.path.join(directory, f"{name}.wten"))
    save_params(net.wdam, os.path.join(directory, "wdam"))
    with open(os.path.join(directory, "net.json"), "w") as f:
        json.dump({"features": FEATURES, "classes": CLASSES, "in_channels": int(net.conv_w.shape[1]),
                   "bands": [b.upper() for b in BANDS]}, f, indent=2)


def load_net(directory: str | os.PathLike) -> DemoNet:
    arrays = {n: read_tensor(os.path.join(directory, f"{n}.wten")) for n in DemoNet.ARRAYS}
    wdam = load_params(os.path.join(directory, "wdam"))
    return DemoNet(arrays["conv_w"], arrays["conv_b"], wdam, arrays["head_w"], arrays["head_b"])
