"""Image AUROC, pixel AUROC and per-region overlap (PRO)."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

EXHAUSTIVE_THRESHOLD_LIMIT = 10_000
QUANTILE_THRESHOLDS = 256


class MetricInputError(ValueError):
    pass


@dataclass
class PixelEvalCase:
    anomaly_map: np.ndarray  # H x W
    gt_mask: np.ndarray  # H x W bool

    def __post_init__(self):
        self.anomaly_map = np.asarray(self.anomaly_map, dtype=np.float64)
        self.gt_mask = np.asarray(self.gt_mask, dtype=bool)
        if self.anomaly_map.ndim != 2 or self.anomaly_map.shape != self.gt_mask.shape:
            raise MetricInputError(
                f"map {self.anomaly_map.shape} and mask {self.gt_mask.shape} must be matching H x W"
            )


@dataclass
class EvalReport:
    image_auroc: float | None = None
    pixel_auroc: float | None = None
    pro: float | None = None
    per_category: dict[str, dict] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def triple(self) -> str:
        """Percent triple in (I-AUROC, P-AUROC, PRO) order; '-' where not computed."""
        parts = ["-" if v is None else f"{100 * v:.2f}" for v in (self.image_auroc, self.pixel_auroc, self.pro)]
        return "(" + ", ".join(parts) + ")"

    def to_dict(self) -> dict:
        return {
            "image_auroc": self.image_auroc,
            "pixel_auroc": self.pixel_auroc,
            "pro": self.pro,
            "triple": self.triple(),
            "per_category": self.per_category,
            "counts": self.counts,
        }


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: (wins + 0.5 * ties) / (P * N)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise MetricInputError(f"{scores.size} scores vs {labels.size} labels")
    pos = labels.astype(bool)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricInputError("AUROC needs at least one positive and one negative")
    ranks = rankdata(scores)  # average ranks: ties count half
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def pixel_auroc(cases: list[PixelEvalCase]) -> float:
    if not cases:
        raise MetricInputError("no cases")
    scores = np.concatenate([c.anomaly_map.ravel() for c in cases])
    labels = np.concatenate([c.gt_mask.ravel() for c in cases])
    return auroc(scores, labels)


_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc]


def connected_components(mask: np.ndarray) -> np.ndarray:
    """8-connected labelling; labels 1..K in first-seen row-major order, 0 = background."""
    mask = np.asarray(mask, dtype=bool)
    labels = np.zeros(mask.shape, dtype=np.int32)
    h, w = mask.shape
    current = 0
    for r, c in zip(*np.nonzero(mask)):
        if labels[r, c]:
            continue
        current += 1
        labels[r, c] = current
        queue = deque([(r, c)])
        while queue:
            y, x = queue.popleft()
            for dy, dx in _NEIGHBOURS:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not labels[ny, nx]:
                    labels[ny, nx] = current
                    queue.append((ny, nx))
    return labels


def _thresholds(scores: np.ndarray) -> np.ndarray:
    uniq = np.unique(scores)
    if uniq.size > EXHAUSTIVE_THRESHOLD_LIMIT:
        uniq = np.unique(np.quantile(scores, np.linspace(0, 1, QUANTILE_THRESHOLDS)))
    return uniq[::-1]


def pro_curve(cases: list[PixelEvalCase]) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, PRO) points for a descending threshold sweep, starting at (0, 0).

    A pixel is predicted anomalous when its score is >= the threshold.
    """
    if not cases:
        raise MetricInputError("no cases")
    scores, comp_ids, n_comp = [], [], 0
    for case in cases:
        lab = connected_components(case.gt_mask)
        ids = np.where(lab > 0, lab - 1 + n_comp, -1)
        n_comp += int(lab.max())
        scores.append(case.anomaly_map.ravel())
        comp_ids.append(ids.ravel())
    if n_comp == 0:
        raise MetricInputError("ground truth contains no anomalous pixels")
    scores = np.concatenate(scores)
    comp_ids = np.concatenate(comp_ids)
    normal = comp_ids < 0
    n_normal = int(normal.sum())
    if n_normal == 0:
        raise MetricInputError("ground truth contains no normal pixels; FPR undefined")
    comp_sizes = np.bincount(comp_ids[~normal], minlength=n_comp).astype(np.float64)

    thresholds = _thresholds(scores)
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    ids_sorted = comp_ids[order]
    # number of pixels with score >= t, for each t
    counts = np.searchsorted(-s_sorted, -thresholds, side="right")

    fp_cum = np.concatenate([[0], np.cumsum(ids_sorted < 0)])
    fpr = fp_cum[counts] / n_normal

    # per-component coverage at each cut: count component pixels ranked before it
    coverage = np.empty((len(thresholds), n_comp))
    ranks = np.arange(len(s_sorted))
    for j in range(n_comp):
        positions = ranks[ids_sorted == j]
        coverage[:, j] = np.searchsorted(positions, counts, side="left") / comp_sizes[j]
    pro_vals = coverage.mean(axis=1)
    return np.concatenate([[0.0], fpr]), np.concatenate([[0.0], pro_vals])


def integrate_limited(x: np.ndarray, y: np.ndarray, limit: float) -> float:
    """Trapezoidal area under a non-decreasing-x curve for x in [0, limit]."""
    area = 0.0
    for i in range(1, len(x)):
        x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
        if x0 >= limit:
            break
        if x1 > limit:
            y1 = y0 + (y1 - y0) * (limit - x0) / (x1 - x0)
            x1 = limit
        area += (x1 - x0) * (y0 + y1) / 2
    return area


def pro(cases: list[PixelEvalCase], fpr_limit: float = 0.3) -> float:
    """Normalized area under the PRO-vs-FPR curve up to ``fpr_limit``."""
    if not 0 < fpr_limit <= 1:
        raise MetricInputError(f"fpr_limit must be in (0, 1], got {fpr_limit}")
    fpr, pro_vals = pro_curve(cases)
    return float(integrate_limited(fpr, pro_vals, fpr_limit) / fpr_limit)


def evaluate_cases(
    scores=None, labels=None, cases: list[PixelEvalCase] | None = None, fpr_limit: float = 0.3
) -> EvalReport:
    report = EvalReport()
    if scores is not None:
        report.image_auroc = auroc(scores, labels)
        report.counts["images"] = len(scores)
        report.counts["anomalous_images"] = int(np.sum(labels))
    if cases:
        report.pixel_auroc = pixel_auroc(cases)
        report.pro = pro(cases, fpr_limit)
        report.counts["maps"] = len(cases)
        report.counts["anomalous_pixels"] = int(sum(c.gt_mask.sum() for c in cases))
    return report
