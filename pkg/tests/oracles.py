"""Independent brute-force reference implementations used by the tests.

None of these import the code paths they check.
"""

import math

import numpy as np
from scipy import ndimage


def pairwise_auroc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def exhaustive_pro(maps, masks, fpr_limit=0.3):
    """PRO by thresholding at every distinct score, components via scipy labelling."""
    structure = np.ones((3, 3), dtype=int)
    labelled = [ndimage.label(m, structure=structure)[0] for m in masks]
    n_normal = sum(int((~m).sum()) for m in masks)
    all_scores = sorted({float(v) for m in maps for v in m.ravel()}, reverse=True)
    points = [(0.0, 0.0)]
    for t in all_scores:
        fp = 0
        overlaps = []
        for amap, gt, lab in zip(maps, masks, labelled):
            pred = amap >= t
            fp += int((pred & ~gt).sum())
            for k in range(1, lab.max() + 1):
                comp = lab == k
                overlaps.append((pred & comp).sum() / comp.sum())
        points.append((fp / n_normal, float(np.mean(overlaps))))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x0 >= fpr_limit:
            break
        if x1 > fpr_limit:
            y1 = y0 + (y1 - y0) * (fpr_limit - x0) / (x1 - x0)
            x1 = fpr_limit
        area += 0.5 * (x1 - x0) * (y0 + y1)
    return area / fpr_limit


def haar_blocks(x):
    """Per-pixel-loop Haar analysis of a C x H x W float64 array."""
    c, h, w = x.shape
    out = np.zeros((4, c, h // 2, w // 2))
    for ch in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                a, b = x[ch, 2 * i, 2 * j], x[ch, 2 * i, 2 * j + 1]
                cc, d = x[ch, 2 * i + 1, 2 * j], x[ch, 2 * i + 1, 2 * j + 1]
                out[0, ch, i, j] = (a + b + cc + d) / 2
                out[1, ch, i, j] = (a - b + cc - d) / 2
                out[2, ch, i, j] = (a + b - cc - d) / 2
                out[3, ch, i, j] = (a - b - cc + d) / 2
    return out


def haar_synthesis(bands):
    _, c, hh, ww = bands.shape
    x = np.zeros((c, 2 * hh, 2 * ww))
    for ch in range(c):
        for i in range(hh):
            for j in range(ww):
                ll, lh, hl, hhv = bands[:, ch, i, j]
                x[ch, 2 * i, 2 * j] = (ll + lh + hl + hhv) / 2
                x[ch, 2 * i, 2 * j + 1] = (ll - lh + hl - hhv) / 2
                x[ch, 2 * i + 1, 2 * j] = (ll + lh - hl - hhv) / 2
                x[ch, 2 * i + 1, 2 * j + 1] = (ll - lh - hl + hhv) / 2
    return x


def wdam_reference(x, w1, b1, w2, b2):
    """Straight-line 64-bit WDAM forward for a single C x H x W input."""
    x = np.asarray(x, dtype=np.float64)
    bands = haar_blocks(x)
    c = x.shape[0]
    stacked = bands.reshape(4 * c, -1)
    avg = [float(sum(row)) / len(row) for row in stacked]
    mx = [float(max(row)) for row in stacked]

    def mlp(v):
        hidden = [max(0.0, sum(w1[k][m] * v[m] for m in range(len(v))) + b1[k]) for k in range(len(b1))]
        return [sum(w2[o][k] * hidden[k] for k in range(len(hidden))) + b2[o] for o in range(4)]

    za, zm = mlp(avg), mlp(mx)
    a = [1.0 / (1.0 + math.exp(-(za[o] + zm[o]))) for o in range(4)]
    return haar_synthesis(bands * np.array(a)[:, None, None, None]), a


def brute_select(distances, tau, tol=1e-12):
    """Smallest index whose gap is within ``tol`` of the best gap."""
    best_gap = None
    for d in distances:
        gap = abs(d - tau)
        if best_gap is None or gap < best_gap:
            best_gap = gap
    for i, d in enumerate(distances):
        if abs(d - tau) - best_gap <= tol * max(1.0, abs(tau)):
            return i
