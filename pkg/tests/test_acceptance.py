"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import itertools
import time

import numpy as np

import conftest
from conftest import white_square
from oracles import brute_select, exhaustive_pro, pairwise_auroc
from subband_ad.demo import DemoNet, TrainConfig, evaluate, make_subband_dataset, train
from subband_ad.metrics import PixelEvalCase, auroc, pro
from subband_ad.saliency import class_saliency
from subband_ad.synthesis import StubBackends, SynthesisConfig, select_candidate, synthesize_pair
from subband_ad.synthesis.masks import rect_mask, sample_rect_mask
from subband_ad.tensor_io import ImageBuffer, decode_netpbm, decode_tensor, encode_netpbm, encode_tensor
from subband_ad.wavelet import haar_dwt, haar_idwt
from subband_ad.wdam import WdamParams, grad_check_report, wdam_block, wdam_forward


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    conftest.ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


def reconstruction_corpus(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        c = int(rng.integers(1, 5))
        side = 2 * int(rng.integers(1, 33))
        yield rng.uniform(-1, 1, (c, side, side)).astype(np.float32)


def test_c01_perfect_reconstruction():
    t0 = time.perf_counter()
    worst = max(float(np.abs(haar_idwt(haar_dwt(x)) - x).max()) for x in reconstruction_corpus())
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-6 and elapsed < 10, f"1000 tensors, max error {worst:.2e} (<= 1e-6), {elapsed:.2f} s (< 10 s)")


def test_c02_parseval():
    worst = 0.0
    for x in reconstruction_corpus():
        s = haar_dwt(x)
        e_in = float(np.sum(x.astype(np.float64) ** 2))
        e_out = sum(float(np.sum(b.astype(np.float64) ** 2)) for b in s.bands())
        worst = max(worst, abs(e_out - e_in) / e_in)
    record(2, worst <= 1e-4, f"1000 tensors, max relative energy gap {worst:.2e} (<= 1e-4)")


def test_c03_gradient_correctness():
    t0 = time.perf_counter()
    worst, checked, flagged = 0.0, 0, 0
    for k in range(100):
        c = (1, 2, 4)[k % 3]
        rng = np.random.default_rng(1000 + k)
        p = WdamParams.init(c, rng, dtype=np.float64)
        p.b1[:] = rng.normal(0, 0.1, p.b1.shape)
        p.b2[:] = rng.normal(0, 0.1, p.b2.shape)
        x = rng.standard_normal((c, 8, 8))
        report = grad_check_report(p, x, epsilon=1e-5, seed=k)
        worst = max(worst, report.max_relative_error)
        checked += report.checked
        flagged += len(report.flagged)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and elapsed < 60
    record(3, ok, f"100 instances, {checked} entries, max relative error {worst:.2e} (<= 1e-5), "
                  f"{flagged} tie/kink probes excluded, {elapsed:.1f} s (< 60 s)")


def test_c04_wdam_identity():
    worst_fwd = worst_block = 0.0
    rng = np.random.default_rng(4)
    for c in (1, 2, 4, 8):
        x = rng.standard_normal((c, 16, 16)).astype(np.float32)
        p = WdamParams.zeros(c)
        p.b2[:] = 1e3  # sigmoid saturates: attention is exactly (1, 1, 1, 1)
        y, cache = wdam_forward(x, p)
        assert np.array_equal(cache.a, np.ones_like(cache.a))
        worst_fwd = max(worst_fwd, float(np.abs(y - x).max()))
        worst_block = max(worst_block, float(np.abs(wdam_block(x, p) - np.maximum(2 * x, 0)).max()))
    ok = worst_fwd <= 1e-5 and worst_block <= 1e-5
    record(4, ok, f"forward vs input {worst_fwd:.2e}, block vs relu(2x) {worst_block:.2e} (<= 1e-5)")


def varied_foreground(rng):
    h, w = (int(v) for v in rng.integers(8, 80, 2))
    kind = rng.integers(4)
    if kind == 0:
        return np.ones((h, w), bool)
    if kind == 1:
        return rng.uniform(size=(h, w)) < rng.uniform(0.05, 0.9)
    yy, xx = np.mgrid[:h, :w]
    if kind == 2:
        cy, cx, r = rng.uniform(0, h), rng.uniform(0, w), rng.uniform(1, max(h, w) / 2)
        fg = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    else:
        fg = ((yy // 5) + (xx // 7)) % 2 == 0
    if not fg.any():
        fg[rng.integers(h), rng.integers(w)] = True
    return fg


def test_c05_mask_geometry():
    rng = np.random.default_rng(5)
    violations = area_misses = 0
    for _ in range(10_000):
        fg = varied_foreground(rng)
        m, rect = sample_rect_mask(fg, 0.1, (0.5, 2.0), rng)
        if (m & ~fg).any() or (m & ~rect_mask(fg.shape, rect)).any():
            violations += 1
        if abs(rect.height * rect.width - 0.1 * fg.sum()) > max(rect.height, rect.width):
            area_misses += 1
    ok = violations == 0 and area_misses == 0
    record(5, ok, f"10000 draws, {violations} containment violations, {area_misses} area-bound misses")


def test_c06_selector_oracle():
    rng = np.random.default_rng(6)
    mismatches = ties = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        tau = float(rng.choice([0.13, rng.uniform(0, 1)]))
        if rng.uniform() < 0.4:
            # mirrored and duplicated distances produce exact and near-exact ties
            gaps = rng.choice([0.01, 0.03, 0.05], n)
            d = tau + gaps * rng.choice([-1, 1], n)
            ties += 1
        else:
            d = rng.uniform(0, 1, n)
        d = [float(v) for v in d]
        if select_candidate(d, tau) != brute_select(d, tau):
            mismatches += 1
    record(6, mismatches == 0, f"10000 lists ({ties} built with ties), {mismatches} mismatches")


def test_c07_metric_oracles():
    t0 = time.perf_counter()
    cases = mismatched = 0
    for n in range(4, 9):
        label_sets = [lab for lab in itertools.product((0, 1), repeat=n) if 0 < sum(lab) < n]
        levels = 3 if n <= 6 else 2
        score_sets = list(itertools.product(range(levels), repeat=n))
        score_sets.append(tuple(range(n)))  # distinct scores
        for labels in label_sets:
            for scores in score_sets:
                cases += 1
                if auroc(scores, labels) != pairwise_auroc(scores, labels):
                    mismatched += 1
    auroc_time = time.perf_counter() - t0
    rng = np.random.default_rng(7)
    worst, pro_cases = 0.0, 0
    for _ in range(1000):
        k = int(rng.integers(1, 4))
        maps = [rng.permutation(25).reshape(5, 5) / 25 + rng.uniform(0, 1e-3) * i for i in range(k)]
        masks = [rng.uniform(size=(5, 5)) < rng.uniform(0.1, 0.6) for _ in range(k)]
        for m in masks:
            m[rng.integers(5), rng.integers(5)] = True
            if m.all():
                m[0, 0] = False
        flat = np.concatenate([m.ravel() for m in maps])
        if len(np.unique(flat)) != flat.size:
            continue
        got = pro([PixelEvalCase(a, b) for a, b in zip(maps, masks)], 0.3)
        worst = max(worst, abs(got - exhaustive_pro(maps, masks, 0.3)))
        pro_cases += 1
    ok = mismatched == 0 and auroc_time < 30 and worst <= 1e-9 and pro_cases >= 1000
    record(7, ok, f"auroc exact on {cases} enumerated instances ({auroc_time:.1f} s); "
                  f"pro max gap {worst:.1e} on {pro_cases} 5x5 cases")


def test_c08_saliency_purity():
    rng = np.random.default_rng(8)
    block = np.ones((2, 2))
    board = np.array([[1.0, -1.0], [-1.0, 1.0]])

    def pairs(pattern_fn, n=6):
        out = []
        for _ in range(n):
            base = rng.uniform(0, 1, (1, 16, 16))
            anom = base.copy()
            r, c = 2 * rng.integers(0, 8, 2)
            anom[0, r : r + 2, c : c + 2] += pattern_fn()
            out.append((base, anom))
        return out

    amp = lambda: rng.uniform(0.1, 0.5) * rng.choice([-1, 1])  # noqa: E731
    got_ll = class_saliency(pairs(lambda: amp() * block)).values
    got_hh = class_saliency(pairs(lambda: amp() * board)).values
    mixed = []
    for _ in range(6):
        base = rng.uniform(0, 1, (1, 16, 16))
        anom = base.copy()
        a = rng.uniform(0.1, 0.5)
        anom[0, 0:2, 0:2] += a * block
        anom[0, 4:6, 4:6] += a * board
        mixed.append((base, anom))
    got_mix = class_saliency(mixed).values
    err = max(
        np.abs(np.subtract(got_ll, (1, 0, 0, 0))).max(),
        np.abs(np.subtract(got_hh, (0, 0, 0, 1))).max(),
        np.abs(np.subtract(got_mix, (0.5, 0, 0, 0.5))).max(),
    )
    record(8, err <= 1e-6, f"constant block, checkerboard and equal-mix pairs, max deviation {err:.1e} (<= 1e-6)")


def test_c09_desk_scale_training():
    results = []
    for seed in (0, 1, 2):
        t0 = time.perf_counter()
        data = make_subband_dataset(200, "HH", seed=seed)
        net, _ = train(DemoNet.init(seed), data, TrainConfig(seed=seed))
        ev = evaluate(net, data)
        w = ev["mean_weights"]
        ordered = w["HH"] > max(w["LL"], w["LH"], w["HL"])
        results.append((seed, ev["accuracy"], ordered, time.perf_counter() - t0, w))
    acc0, time_ok = results[0][1], all(r[3] < 120 for r in results)
    n_ordered = sum(r[2] for r in results)
    ok = acc0 >= 0.9 and n_ordered >= 2 and time_ok
    detail = "; ".join(
        f"seed {s}: acc {a:.3f}, HH {w['HH']:.2f} vs max other {max(w['LL'], w['LH'], w['HL']):.2f}, {t:.1f} s"
        for s, a, _, t, w in results
    )
    record(9, ok, f"fixed-seed accuracy {acc0:.3f} (>= 0.9), ordering {n_ordered}/3 (>= 2); {detail}")


def test_c10_stub_pipeline():
    image = white_square()
    cfg = SynthesisConfig()
    r1 = synthesize_pair(image, "bottle", cfg, StubBackends(), seed=42)
    r2 = synthesize_pair(image, "bottle", cfg, StubBackends(), seed=42)
    deterministic = r1.anomalous.tobytes() == r2.anomalous.tobytes() and np.array_equal(r1.mask, r2.mask)
    outside = ~r1.mask
    untouched = r1.anomalous[:, outside].tobytes() == image[:, outside].tobytes()
    sidecar = {42 + k: d for k, d in enumerate([0.05, 0.12, 0.31, 0.50, 0.90])}
    r3 = synthesize_pair(image, "bottle", cfg, StubBackends(), 42, sidecar)
    ok = deterministic and untouched and r3.candidates.selected_index == 1
    record(10, ok, f"bit-deterministic {deterministic}, outside mask unchanged {untouched}, "
                   f"sidecar selection index {r3.candidates.selected_index} (expected 1 at tau 0.13)")


def test_c11_io_fuzz(tmp_path):
    rng = np.random.default_rng(11)
    failures = 0
    for i in range(1200):
        kind = i % 3
        if kind < 2:
            h, w = (int(v) for v in rng.integers(1, 40, 2))
            shape = (h, w) if kind == 0 else (h, w, 3)
            buf = ImageBuffer.from_array(rng.integers(0, 256, shape, dtype=np.uint8))
            path = tmp_path / f"{i}.{'pgm' if kind == 0 else 'ppm'}"
            path.write_bytes(encode_netpbm(buf))
            raw = path.read_bytes()
            back = decode_netpbm(raw)
            failures += not (back == buf and encode_netpbm(back) == raw)
        else:
            rank = int(rng.integers(1, 5))
            shape = tuple(int(v) for v in rng.integers(1, 7, rank))
            bits = rng.integers(0, 2**32, shape, dtype=np.uint64).astype(np.uint32)
            t = bits.view(np.float32)  # every bit pattern, NaNs and infinities included
            path = tmp_path / f"{i}.wten"
            path.write_bytes(encode_tensor(t))
            back = decode_tensor(path.read_bytes())
            failures += not (back.shape == t.shape and back.tobytes() == t.tobytes())
    record(11, failures == 0, f"1200 files (400 each PGM/PPM/WTEN), {failures} roundtrip failures")

