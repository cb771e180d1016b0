"""Command-line entry point: ``subband-ad <command> ...``.

Every command prints a JSON report on stdout (``--pretty`` for a readable
table). Exit codes: 0 success, 1 internal error, 2 invalid input,
3 backend/transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import SCHEMA_VERSION, __version__
from .demo import (
    DemoNet,
    TrainConfig,
    evaluate,
    load_net,
    make_subband_dataset,
    save_net,
    train,
)
from .heatmap import ConstantMapWarning, render_heatmap
from .metrics import EvalReport, MetricInputError, PixelEvalCase, auroc, pixel_auroc, pro
from .saliency import DegenerateInputError, class_saliency
from .synthesis import (
    BackendError,
    HttpBackends,
    StubBackends,
    SynthesisConfig,
    foreground_stub,
    sample_rect_mask,
    select_candidate,
    synthesize_pair,
)
from .synthesis.backends import BACKEND_URL_ENV
from .synthesis.masks import MaskError
from .synthesis.pipeline import load_distances
from .tensor_io import (
    ImageBuffer,
    TensorFormatError,
    image_to_mask,
    load_any,
    mask_to_image,
    read_image,
    read_tensor,
    tensor_to_image,
    write_image,
    write_tensor,
)
from .wavelet import BANDS, DimensionError, SubBands, load_subbands, multi_level_dwt, multi_level_idwt, save_subbands
from .wdam import inspect_weights, load_params

log = logging.getLogger("subband_ad")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_BACKEND = 0, 1, 2, 3
IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


class InputError(Exception):
    """Invalid user input; maps to exit code 2."""


def emit(report: dict, args) -> None:
    report = {"schema_version": SCHEMA_VERSION, **report}
    if getattr(args, "pretty", False):
        for key, value in report.items():
            if isinstance(value, float):
                value = f"{value:.4f}"
            elif isinstance(value, (dict, list)):
                value = json.dumps(value)
            print(f"{key:<22} {value}")
    else:
        print(json.dumps(report, indent=2))


def write_json(path, report: dict) -> None:
    with open(path, "w") as f:
        json.dump({"schema_version": SCHEMA_VERSION, **report}, f, indent=2)


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _as_chw(t: np.ndarray) -> np.ndarray:
    if t.ndim == 2:
        return t[None]
    if t.ndim == 3:
        return t
    raise InputError(f"expected an H x W or C x H x W tensor, got shape {t.shape}")


def _load_mask(path) -> np.ndarray:
    path = os.fspath(path)
    if path.endswith(".wten"):
        t = read_tensor(path)
        return (t[0] if t.ndim == 3 else t) > 0
    return image_to_mask(read_image(path))


def _write_tensor_or_image(t: np.ndarray, path) -> None:
    if os.fspath(path).endswith(IMAGE_SUFFIXES):
        write_image(tensor_to_image(t), path)
    else:
        write_tensor(t, path)


def _paired_files(dir_a, dir_b, suffixes=None):
    a, b = Path(dir_a), Path(dir_b)
    for d in (a, b):
        if not d.is_dir():
            raise InputError(f"not a directory: {d}")

    def index(d):
        return {p.stem: p for p in sorted(d.iterdir()) if p.is_file() and (suffixes is None or p.suffix in suffixes)}

    ia, ib = index(a), index(b)
    missing = sorted(set(ia) ^ set(ib))
    if missing:
        raise InputError(f"unmatched filenames between {a} and {b}: {missing[:5]}")
    if not ia:
        raise InputError(f"no files found in {a}")
    return [(ia[k], ib[k]) for k in sorted(ia)]


# -- wavelet ----------------------------------------------------------------------


def cmd_dwt(args) -> int:
    x = _as_chw(load_any(args.input))
    src_shape = list(x.shape)
    f = 2**args.levels
    h, w = x.shape[-2:]
    pad = (0, 0)
    if h % f or w % f:
        if args.pad != "reflect":
            raise DimensionError(
                f"spatial extents {h}x{w} are not divisible by 2**{args.levels}; rerun with --pad reflect"
            )
        pad = (-h % f, -w % f)
        x = np.pad(x, ((0, 0), (0, pad[0]), (0, pad[1])), mode="symmetric")
    levels = multi_level_dwt(x, args.levels)
    prefixes = []
    for k, s in enumerate(levels, start=1):
        prefix = args.out if args.levels == 1 else f"{args.out}.l{k}"
        save_subbands(s, prefix, {"level": k})
        prefixes.append(prefix)
    if args.levels > 1:
        with open(f"{args.out}.json", "w") as fh:
            json.dump({"levels": args.levels, "sets": prefixes, "source_shape": list(x.shape)}, fh, indent=2)
    # record the unpadded shape so idwt can crop back
    with open(f"{args.out}.json") as fh:
        meta = json.load(fh)
    meta.update({"original_shape": src_shape, "pad": list(pad), "levels": args.levels})
    with open(f"{args.out}.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    emit({"command": "dwt", "levels": args.levels, "sets": prefixes, "source_shape": src_shape,
          "padded_shape": list(x.shape), "band_shapes": [list(s.ll.shape) for s in levels]}, args)
    return EXIT_OK


def cmd_idwt(args) -> int:
    meta_path = f"{args.prefix}.json"
    if not os.path.exists(meta_path):
        raise InputError(f"missing sidecar {meta_path}")
    meta = _read_json(meta_path)
    levels = int(meta.get("levels", 1))
    if levels == 1:
        x = multi_level_idwt([load_subbands(args.prefix)])
    else:
        x = multi_level_idwt([load_subbands(p) for p in meta["sets"]])
    orig = meta.get("original_shape", list(x.shape))
    x = x[..., : orig[-2], : orig[-1]]
    _write_tensor_or_image(x, args.out)
    report = {"command": "idwt", "levels": levels, "shape": list(x.shape), "out": args.out}
    if args.compare:
        ref = _as_chw(load_any(args.compare))
        if ref.shape != x.shape:
            raise InputError(f"reference shape {ref.shape} differs from reconstruction {x.shape}")
        err = float(np.abs(ref.astype(np.float64) - x).max())
        report.update({"max_abs_error": err, "within_tolerance": err <= 1e-6})
    emit(report, args)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    m = read_tensor(args.map) if args.map.endswith(".wten") else load_any(args.map)
    overlay = read_image(args.overlay).to_array() if args.overlay else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConstantMapWarning)
        rgb = render_heatmap(m, args.colormap, overlay)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_image(ImageBuffer.from_array(rgb), args.out)
    emit({"command": "heatmap", "out": args.out, "colormap": args.colormap, "constant_map": bool(caught),
          "shape": list(rgb.shape[:2])}, args)
    return EXIT_OK


# -- analysis ---------------------------------------------------------------------


def cmd_saliency(args) -> int:
    pairs = [(load_any(n), load_any(a)) for n, a in _paired_files(args.normal_dir, args.anomalous_dir)]
    name = args.class_name or Path(args.anomalous_dir).name
    profile = class_saliency(pairs, name, normalize_per_pair=args.per_pair)
    report = {"command": "saliency", **profile.to_dict(),
              "order": "per_pair_normalize" if args.per_pair else "mean_then_normalize"}
    if args.out:
        write_json(args.out, report)
    emit(report, args)
    return EXIT_OK


def _foreground_from_args(args) -> np.ndarray:
    if args.full:
        try:
            h, w = (int(v) for v in args.full.lower().split("x"))
        except ValueError as exc:
            raise InputError(f"--full expects HxW, got {args.full!r}") from exc
        return np.ones((h, w), dtype=bool)
    if args.foreground:
        return _load_mask(args.foreground)
    if args.image:
        return foreground_stub(load_any(args.image))
    raise InputError("one of --image, --foreground or --full is required")


def cmd_genmask(args) -> int:
    fg = _foreground_from_args(args)
    m, rect = sample_rect_mask(fg, args.alpha, (args.aspect_min, args.aspect_max), np.random.default_rng(args.seed))
    if args.out:
        write_image(mask_to_image(m), args.out)
    emit({"command": "genmask", "seed": args.seed, "alpha": args.alpha, "foreground_area": int(fg.sum()),
          "mask_area": int(m.sum()), "rect": rect.to_dict(), "out": args.out}, args)
    return EXIT_OK


def _load_config(path) -> SynthesisConfig:
    if not path:
        return SynthesisConfig()
    try:
        return SynthesisConfig.from_dict(_read_json(path))
    except TypeError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_synthesize(args) -> int:
    cfg = _load_config(args.config)
    if args.tau is not None:
        cfg.tau = args.tau
    image = _as_chw(load_any(args.image))
    if args.backend == "http":
        url = args.backend_url or os.environ.get(BACKEND_URL_ENV)
        if not url:
            raise InputError(f"--backend http needs --backend-url or ${BACKEND_URL_ENV}")
        backends = HttpBackends(url)
    else:
        backends = StubBackends()
    distances = load_distances(args.distances) if args.distances else None
    result = synthesize_pair(image, args.label, cfg, backends, args.seed, distances)
    write_image(tensor_to_image(result.anomalous), args.out)
    if args.mask_out:
        write_image(mask_to_image(result.mask), args.mask_out)
    report = {
        "command": "synthesize",
        "seed": args.seed,
        "backend": args.backend,
        "label": args.label,
        "prompt": result.prompts.prompt,
        "negative_prompt": result.prompts.negative_prompt,
        "mask_area": int(result.mask.sum()),
        "rect": result.rect.to_dict(),
        "distance_source": "sidecar" if distances is not None else "builtin",
        "tau": cfg.tau,
        "selected_index": result.candidates.selected_index,
        "selected_seed": result.candidates.selected.seed,
        "candidates": result.candidates.audit(),
        "config": cfg.to_dict(),
        "out": args.out,
    }
    if args.report:
        write_json(args.report, report)
    emit(report, args)
    return EXIT_OK


def cmd_select(args) -> int:
    raw = _read_json(args.distances)
    if isinstance(raw, dict):
        items = sorted((int(k), float(v)) for k, v in raw.items())
        seeds = [k for k, _ in items]
        distances = [v for _, v in items]
    elif isinstance(raw, list):
        seeds, distances = None, [float(v) for v in raw]
    else:
        raise InputError("distances file must be a JSON object (seed -> distance) or list")
    idx = select_candidate(distances, args.tau)
    report = {"command": "select", "index": idx, "tau": args.tau, "distance": distances[idx]}
    if seeds is not None:
        report["seed"] = seeds[idx]
    emit(report, args)
    return EXIT_OK


# -- training / weights -------------------------------------------------------------


def cmd_train_demo(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise InputError("a seed is required (--seed or \"seed\" in the config)")
    unknown = set(cfg) - {"band", "n_per_class", "seed", "epochs", "lr", "batch"}
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    band = cfg.get("band", "HH")
    hyper = TrainConfig(epochs=int(cfg.get("epochs", 30)), lr=float(cfg.get("lr", 0.05)),
                        batch=int(cfg.get("batch", 16)), seed=int(seed))
    data = make_subband_dataset(int(cfg.get("n_per_class", 200)), band, int(seed))
    net, history = train(DemoNet.init(int(seed)), data, hyper)
    metrics = evaluate(net, data)
    os.makedirs(args.out, exist_ok=True)
    save_net(net, os.path.join(args.out, "net"))
    report = {
        "command": "train-demo",
        "seed": int(seed),
        "config": {"band": band.upper(), "n_per_class": len(data) // 2, "seed": int(seed),
                   "epochs": hyper.epochs, "lr": hyper.lr, "batch": hyper.batch},
        "history": history.to_dict(),
        "evaluation": metrics,
        "net": os.path.join(args.out, "net"),
    }
    write_json(os.path.join(args.out, "history.json"), report)
    emit(report, args)
    return EXIT_OK


def _load_dataset_dir(path) -> list[np.ndarray]:
    d = Path(path)
    if not d.is_dir():
        raise InputError(f"not a directory: {d}")
    files = [p for p in sorted(d.iterdir()) if p.suffix in (".wten",) + IMAGE_SUFFIXES]
    return [_as_chw(load_any(p)) for p in files]


def cmd_inspect_weights(args) -> int:
    if bool(args.net) == bool(args.params):
        raise InputError("exactly one of --net or --params is required")
    if args.data:
        samples = _load_dataset_dir(args.data)
        seed = args.seed
    else:
        if args.seed is None:
            raise InputError("--seed is required when regenerating the synthetic dataset")
        samples = [s for s, _ in make_subband_dataset(args.n_per_class, args.band, args.seed).samples]
        seed = args.seed
    if not samples:
        raise InputError("empty dataset")
    if args.net:
        net = load_net(args.net)
        params = net.wdam
        feats = [net.features(s[None])[0][0] for s in samples]
    else:
        params = load_params(args.params)
        feats = samples
    table = inspect_weights(params, feats)
    if not args.per_sample:
        table.pop("per_sample")
    emit({"command": "inspect-weights", "seed": seed, **table}, args)
    return EXIT_OK


def _eval_scores(path) -> tuple[float, dict, dict]:
    raw = _read_json(path)
    if "categories" in raw:
        per = {}
        for name, entry in raw["categories"].items():
            per[name] = {"image_auroc": auroc(entry["scores"], entry["labels"]), "count": len(entry["scores"])}
        mean = float(np.mean([v["image_auroc"] for v in per.values()]))
        return mean, per, {"images": sum(v["count"] for v in per.values())}
    if "scores" not in raw or "labels" not in raw:
        raise InputError(f"{path}: expected 'scores' and 'labels' (or 'categories')")
    return auroc(raw["scores"], raw["labels"]), {}, {"images": len(raw["scores"])}


def _load_cases(maps_dir, masks_dir) -> list[PixelEvalCase]:
    cases = []
    for map_path, mask_path in _paired_files(maps_dir, masks_dir, (".wten",) + IMAGE_SUFFIXES):
        m = load_any(map_path)
        if m.ndim == 3:
            if m.shape[0] != 1:
                raise InputError(f"{map_path}: anomaly map must be single-channel")
            m = m[0]
        cases.append(PixelEvalCase(m, _load_mask(mask_path)))
    return cases


def cmd_eval(args) -> int:
    if not args.scores and not (args.maps and args.masks):
        raise InputError("give --scores and/or both --maps and --masks")
    report = EvalReport()
    if args.scores:
        report.image_auroc, per, counts = _eval_scores(args.scores)
        report.counts.update(counts)
        for name, v in per.items():
            report.per_category.setdefault(name, {}).update(v)
    if args.maps:
        maps_root = Path(args.maps)
        subdirs = sorted(p for p in maps_root.iterdir() if p.is_dir())
        if subdirs:
            p_vals, pro_vals, total = [], [], 0
            for sd in subdirs:
                cases = _load_cases(sd, Path(args.masks) / sd.name)
                pa, pr = pixel_auroc(cases), pro(cases, args.fpr_limit)
                report.per_category.setdefault(sd.name, {}).update({"pixel_auroc": pa, "pro": pr})
                p_vals.append(pa)
                pro_vals.append(pr)
                total += len(cases)
            report.pixel_auroc, report.pro = float(np.mean(p_vals)), float(np.mean(pro_vals))
        else:
            cases = _load_cases(args.maps, args.masks)
            report.pixel_auroc, report.pro = pixel_auroc(cases), pro(cases, args.fpr_limit)
            total = len(cases)
        report.counts["maps"] = total
    out = {"command": "eval", "fpr_limit": args.fpr_limit, **report.to_dict()}
    if args.out:
        write_json(args.out, out)
    emit(out, args)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("subband_ad.service.app:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subband-ad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--pretty", action="store_true", help="human-readable output")
        p.set_defaults(func=func)
        return p

    p = add("dwt", cmd_dwt, "Haar-decompose an image or tensor into sub-band files")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--pad", choices=["none", "reflect"], default="none")

    p = add("idwt", cmd_idwt, "reconstruct from sub-band files")
    p.add_argument("prefix")
    p.add_argument("--out", required=True, help=".wten, or .pgm/.ppm to quantize")
    p.add_argument("--compare", help="reference to report reconstruction error against")

    p = add("heatmap", cmd_heatmap, "render an anomaly map as a colour PPM")
    p.add_argument("map")
    p.add_argument("--out", required=True)
    p.add_argument("--colormap", default="jet")
    p.add_argument("--overlay", help="PGM/PPM image blended at alpha 0.5")

    p = add("saliency", cmd_saliency, "per-sub-band variation over normal/anomalous pairs")
    p.add_argument("--normal-dir", required=True)
    p.add_argument("--anomalous-dir", required=True)
    p.add_argument("--class-name")
    p.add_argument("--out")
    p.add_argument("--per-pair", action="store_true", help="normalize each pair before averaging")

    p = add("genmask", cmd_genmask, "sample a foreground-constrained rectangular mask")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", help="derive the foreground with the Otsu stub")
    src.add_argument("--foreground", help="foreground mask (PGM or .wten)")
    src.add_argument("--full", help="full foreground of the given HxW")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--aspect-min", type=float, default=0.5)
    p.add_argument("--aspect-max", type=float, default=2.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")

    p = add("synthesize", cmd_synthesize, "synthesize an anomalous image from a normal one")
    p.add_argument("--image", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--backend", choices=["stub", "http"], default="stub")
    p.add_argument("--backend-url")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--distances", help="JSON map seed -> precomputed perceptual distance")
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out")
    p.add_argument("--report")

    p = add("select", cmd_select, "pick the candidate whose distance is closest to tau")
    p.add_argument("--distances", required=True)
    p.add_argument("--tau", type=float, default=0.13)

    p = add("train-demo", cmd_train_demo, "train the demo classifier on band-pure anomalies")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "image AUROC, pixel AUROC and PRO")
    p.add_argument("--scores")
    p.add_argument("--maps")
    p.add_argument("--masks")
    p.add_argument("--fpr-limit", type=float, default=0.3)
    p.add_argument("--out")

    p = add("inspect-weights", cmd_inspect_weights, "mean sub-band attention weights")
    p.add_argument("--net")
    p.add_argument("--params")
    p.add_argument("--data", help="directory of .wten/.pgm/.ppm samples")
    p.add_argument("--band", default="HH")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.add_argument("--per-sample", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP service (stub backends + core endpoints)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


INPUT_ERRORS = (
    InputError,
    TensorFormatError,
    DimensionError,
    MaskError,
    MetricInputError,
    DegenerateInputError,
    FileNotFoundError,
    NotADirectoryError,
    KeyError,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"error: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except INPUT_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"error: internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
