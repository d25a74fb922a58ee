"""Command-line surface: transforms, attacks, likelihood maps, evaluation, synth.

Configuration comes from an optional JSON file plus command-line flags
(flags win). Every report embeds the fully resolved configuration, and
every command is deterministic given config + seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import datasets
from .attacks import (
    DEFAULT_ROTATION_SWEEP,
    DEFAULT_ZOOM_ATTACK_SWEEP,
    PipelineSpec,
    accuracy_sweep,
    prepare_input,
    rotation_attack,
    translation_attack,
    zoom_attack,
)
from .imgops import BoundingBox, circular_mask, fixation_sample, focus_crop, roll_translate, rotate_about_fixation, zoom_about_fixation
from .localize import (
    classify_at_fixation,
    diff_map,
    iou_curve,
    likelihood_map,
    log_odds_map,
    mean_in_out,
    pointing_game,
    recenter_mean,
    saccade_and_classify,
    save_heatmap,
)
from .oracle import CARTESIAN_QUADRANT, RETINOTOPIC_RADIAL, BridgeClient, toy_fit
from .retina import build_grid, from_logpolar, to_logpolar

BRIDGE_ENV = "FOVEATE_BRIDGE_CMD"

TRANSFORM_MODES = ("logpolar", "inverse", "mask", "rotate", "zoom", "roll", "focus")


@dataclass
class RunConfig:
    frame: str = "retinotopic"
    n_rho: int = 224
    n_theta: int = 224
    log_rmin: float = -5.0
    log_rmax: float = 0.0
    oracle: str = "toy-retinotopic"
    bridge_cmd: str | None = None
    oracle_resolution: int = 224
    temperature: float = 0.05
    grid_n: int = 11
    min_ratio: float = 0.1
    fill: float = 0.5
    mask_radius: float = 1.0
    rotation_sweep: tuple = DEFAULT_ROTATION_SWEEP
    zoom_sweep: tuple = DEFAULT_ZOOM_ATTACK_SWEEP
    fit: str | None = None
    fit_manifest: str | None = None
    out: str = "out"
    seed: int = 0
    jobs: int | None = None

    def resolved_frame(self) -> str:
        if self.oracle == "toy-cartesian":
            return "cartesian"
        if self.oracle == "toy-retinotopic":
            return "retinotopic"
        return self.frame

    def validate(self):
        if self.oracle not in ("toy-cartesian", "toy-retinotopic", "bridge"):
            raise ValueError(f"unknown oracle kind {self.oracle!r}")
        if self.frame not in ("cartesian", "retinotopic"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.oracle.startswith("toy-") and self.frame != self.resolved_frame():
            raise ValueError(f"oracle {self.oracle} pairs with the {self.resolved_frame()} frame")
        if self.fit not in (None, "regular", "focus"):
            raise ValueError(f"unknown fit mode {self.fit!r}")
        if self.grid_n < 3 or self.grid_n % 2 == 0:
            raise ValueError("grid_n must be odd and >= 3")


def load_config(path, overrides) -> RunConfig:
    values = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig(**values)
    config.validate()
    return config


def _config_dict(config) -> dict:
    doc = dataclasses.asdict(config)
    doc["rotation_sweep"] = list(doc["rotation_sweep"])
    doc["zoom_sweep"] = list(doc["zoom_sweep"])
    return doc


class _Probe:
    """Stands in for the oracle while fit views are being prepared."""

    def __init__(self, resolution):
        self.input_resolution = resolution


def _build_grid(config):
    return build_grid(config.n_rho, config.n_theta, config.log_rmin, config.log_rmax, (0.0, 0.0))


def _pipeline(config, oracle) -> PipelineSpec:
    frame = config.resolved_frame()
    grid = _build_grid(config) if frame == "retinotopic" else None
    return PipelineSpec(frame, oracle, grid, config.mask_radius, config.fill)


def _fit_views(config, records, base_dir, fit_mode):
    """Prepared training views for the toy oracle, one per manifest record."""
    frame = config.resolved_frame()
    probe_spec = _pipeline(config, _Probe(config.oracle_resolution))
    views, labels = [], []
    for rec in records:
        img = datasets.load_image(os.path.join(base_dir, rec.image_path))
        if fit_mode == "focus":
            if rec.boxes:
                center = rec.boxes[0].center
            else:
                xs = [p[0] for p in rec.keypoints]
                ys = [p[1] for p in rec.keypoints]
                center = ((min(xs) + max(xs)) / 2.0, (min(ys) + max(ys)) / 2.0)
            img = fixation_sample(img, center, config.min_ratio, frame == "cartesian", config.fill)
        views.append(prepare_input(img, probe_spec))
        labels.append(rec.label)
    return views, labels


def build_oracle(config, command=None, manifest_path=None):
    """Instantiate the configured oracle; toy oracles are fit from a manifest."""
    if config.oracle == "bridge":
        cmd = config.bridge_cmd or os.environ.get(BRIDGE_ENV)
        if not cmd:
            raise ValueError(f"bridge oracle needs --bridge-cmd or ${BRIDGE_ENV}")
        return BridgeClient(shlex.split(cmd))
    if config.oracle == "toy-retinotopic" and not (config.n_rho == config.n_theta == config.oracle_resolution):
        raise ValueError("toy-retinotopic needs n_rho == n_theta == oracle_resolution")
    fit_path = config.fit_manifest or manifest_path
    if not fit_path:
        raise ValueError("toy oracles need a labeled manifest to fit on (--fit-manifest)")
    fit_mode = config.fit or ("regular" if command == "attack" else "focus")
    records = datasets.load_manifest(fit_path)
    if not records:
        raise ValueError(f"empty manifest {fit_path}")
    views, labels = _fit_views(config, records, os.path.dirname(os.path.abspath(fit_path)), fit_mode)
    mode = CARTESIAN_QUADRANT if config.resolved_frame() == "cartesian" else RETINOTOPIC_RADIAL
    return toy_fit(views, labels, mode, config.temperature)


def _write_image(path, image) -> None:
    from PIL import Image

    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    raw = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(raw).save(path)


def _parse_box(text) -> BoundingBox:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValueError("--box wants x_min,y_min,x_max,y_max")
    return BoundingBox(*parts)


def cmd_transform(config, args) -> int:
    img = datasets.load_image(args.input)
    mode = args.mode
    if mode == "logpolar":
        out = to_logpolar(img, _build_grid(config), config.fill)
    elif mode == "inverse":
        h = args.height or img.shape[0]
        w = args.width or img.shape[1]
        out = from_logpolar(img, _build_grid(config), h, w, config.fill)
    elif mode == "mask":
        out = circular_mask(img, (0.0, 0.0), config.mask_radius, config.fill)
    elif mode == "rotate":
        out = rotate_about_fixation(img, (0.0, 0.0), math.radians(args.angle), config.fill)
    elif mode == "zoom":
        out = zoom_about_fixation(img, (0.0, 0.0), args.factor, config.fill)
    elif mode == "roll":
        out = roll_translate(img, args.dx, args.dy)
    elif mode == "focus":
        out = focus_crop(img, _parse_box(args.box), config.fill)
    else:
        raise ValueError(f"unknown transform mode {mode!r}")
    os.makedirs(config.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.input))[0]
    path = os.path.join(config.out, f"{stem}_{mode}.png")
    _write_image(path, out)
    print(path)
    return 0


def cmd_synth(config, args) -> int:
    scenes = datasets.make_suite(config.seed, args.count, size=args.size)
    manifest = datasets.save_suite(scenes, config.out)
    print(manifest)
    return 0


def _load_dataset(config, manifest_path, oracle):
    records = datasets.load_manifest(manifest_path)
    if not records:
        raise ValueError(f"empty manifest {manifest_path}")
    base = os.path.dirname(os.path.abspath(manifest_path))
    images = [datasets.load_image(os.path.join(base, r.image_path)) for r in records]
    labels = [oracle.labels.index(r.label) for r in records]
    return records, images, labels


def _pool_map(config, fn, items):
    jobs = config.jobs or os.cpu_count() or 1
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_curve_csv(path, curve, column) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", column])
        for param, value in curve:
            key = param if np.isscalar(param) else json.dumps(list(param))
            writer.writerow([key, value])


def cmd_attack(config, args) -> int:
    oracle = build_oracle(config, "attack", args.manifest)
    spec = _pipeline(config, oracle)
    records, images, labels = _load_dataset(config, args.manifest, oracle)

    kind = args.kind
    if kind == "rotation":
        params = list(config.rotation_sweep)
        run = lambda im, y: rotation_attack(im, y, spec, params)
    elif kind == "zoom":
        params = list(config.zoom_sweep)
        run = lambda im, y: zoom_attack(im, y, spec, params)
    elif kind == "translation":
        from .localize import fixation_grid

        params = [tuple(pt) for pt in fixation_grid(config.grid_n).reshape(-1, 2)]
        run = lambda im, y: translation_attack(im, y, spec, config.grid_n)
    else:
        raise ValueError(f"unknown attack kind {kind!r}")

    outcomes = _pool_map(config, lambda pair: run(*pair), list(zip(images, labels)))
    curve = accuracy_sweep(list(zip(images, labels)), spec, kind, params)

    per_image = [
        {
            "image_path": rec.image_path,
            "label": rec.label,
            "worst_param": out.worst_param if np.isscalar(out.worst_param) else list(out.worst_param),
            "predicted": oracle.labels.labels[out.predicted],
            "correct": out.correct,
        }
        for rec, out in zip(records, outcomes)
    ]
    report = {
        "config": _config_dict(config),
        "kind": kind,
        "per_image": per_image,
        "attack_accuracy": float(np.mean([o.correct for o in outcomes])),
        "sweep": [[p if np.isscalar(p) else list(p), acc] for p, acc in curve],
    }
    os.makedirs(config.out, exist_ok=True)
    report_path = os.path.join(config.out, f"attack_{kind}.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    _write_curve_csv(os.path.join(config.out, f"attack_{kind}_sweep.csv"), curve, "accuracy")
    print(report_path)
    return 0


def cmd_localize(config, args) -> int:
    oracle = build_oracle(config, "localize", None)
    spec = _pipeline(config, oracle)
    img = datasets.load_image(args.input)
    names = [s for s in args.labels.split(",") if s]
    subset = [oracle.labels.index(s) for s in names]
    m = likelihood_map(img, subset, spec, args.n or config.grid_n, config.min_ratio)
    os.makedirs(config.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.input))[0]
    path = os.path.join(config.out, f"{stem}_heatmap.json")
    save_heatmap(path, m.values, m.label_subset)
    print(path)
    if args.render:
        cell = max(1, 352 // m.n)
        raster = np.kron(m.values, np.ones((cell, cell)))
        render_path = os.path.join(config.out, f"{stem}_heatmap.png")
        _write_image(render_path, np.clip(raster, 0.0, 1.0))
        print(render_path)
    return 0


def _ground_truth_mask(record, n):
    if record.boxes:
        return datasets.bbox_mask(record.boxes, n)
    return datasets.keypoint_mask(record.keypoints, n)


def cmd_evaluate(config, args) -> int:
    oracle = build_oracle(config, "evaluate", args.manifest)
    spec = _pipeline(config, oracle)
    records, images, labels = _load_dataset(config, args.manifest, oracle)
    n = config.grid_n

    def one(item):
        rec, img, y = item
        mask = _ground_truth_mask(rec, n)
        m = likelihood_map(img, [y], spec, n, config.min_ratio)
        mean_in, mean_out, ratio = mean_in_out(m, mask)
        curve, peak_iou, peak_t = iou_curve(m, mask)
        pre, post, post_correct = saccade_and_classify(img, [y], spec, n, config.min_ratio)
        pre_correct = int(np.argmax(classify_at_fixation(img, spec, (0.0, 0.0), config.min_ratio))) == y
        return m, {
            "image_path": rec.image_path,
            "label": rec.label,
            "pointing": pointing_game(m, mask),
            "mean_in": mean_in,
            "mean_out": mean_out,
            "ratio": ratio,
            "peak_iou": peak_iou,
            "peak_threshold": peak_t,
            "iou_curve": [[t, v] for t, v in curve],
            "pre_likelihood": pre,
            "post_likelihood": post,
            "pre_correct": bool(pre_correct),
            "post_correct": bool(post_correct),
        }

    results = _pool_map(config, one, list(zip(records, images, labels)))
    maps = [m for m, _ in results]
    rows = [r for _, r in results]
    mean_map = recenter_mean(maps)

    thresholds = [t for t, _ in rows[0]["iou_curve"]]
    mean_iou = [
        [t, float(np.mean([r["iou_curve"][k][1] for r in rows]))] for k, t in enumerate(thresholds)
    ]
    aggregate = {
        "pointing_rate": float(np.mean([r["pointing"] for r in rows])),
        "mean_ratio": float(np.mean([r["ratio"] for r in rows])),
        "ratio_above_one_rate": float(np.mean([r["ratio"] > 1 for r in rows])),
        "mean_peak_iou": float(np.mean([r["peak_iou"] for r in rows])),
        "pre_saccade_accuracy": float(np.mean([r["pre_correct"] for r in rows])),
        "post_saccade_accuracy": float(np.mean([r["post_correct"] for r in rows])),
    }
    report = {
        "config": _config_dict(config),
        "per_image": rows,
        "aggregate": aggregate,
        "mean_iou_curve": mean_iou,
        "recentered_mean": {
            "n": n,
            "values": [float(v) for v in mean_map.mean_values.reshape(-1)],
            "counts": [int(c) for c in mean_map.counts.reshape(-1)],
        },
    }
    if args.compare:
        with open(args.compare, "r", encoding="utf-8") as fh:
            other = json.load(fh)["recentered_mean"]
        other_values = np.asarray(other["values"]).reshape(n, n)
        other_valid = np.asarray(other["counts"]).reshape(n, n) > 0
        from .localize import MaskedGrid

        ours = mean_map.grid
        theirs = MaskedGrid(other_values, other_valid)
        diff = diff_map(ours, theirs)
        lo = log_odds_map(ours, theirs)
        report["difference_map"] = {
            "values": [float(v) for v in diff.values.reshape(-1)],
            "valid": [bool(v) for v in diff.valid.reshape(-1)],
        }
        report["log_odds_map"] = {
            "values": [float(v) for v in lo.values.reshape(-1)],
            "valid": [bool(v) for v in lo.valid.reshape(-1)],
        }
    os.makedirs(config.out, exist_ok=True)
    report_path = os.path.join(config.out, "evaluation.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    _write_curve_csv(os.path.join(config.out, "evaluation_iou.csv"), mean_iou, "iou")
    print(report_path)
    return 0


def _common_flags(parser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--oracle", choices=["toy-cartesian", "toy-retinotopic", "bridge"], default=None)
    parser.add_argument("--bridge-cmd", dest="bridge_cmd", default=None)
    parser.add_argument("--frame", choices=["cartesian", "retinotopic"], default=None)
    parser.add_argument("--oracle-resolution", dest="oracle_resolution", type=int, default=None)
    parser.add_argument("--n-rho", dest="n_rho", type=int, default=None)
    parser.add_argument("--n-theta", dest="n_theta", type=int, default=None)
    parser.add_argument("--log-rmin", dest="log_rmin", type=float, default=None)
    parser.add_argument("--log-rmax", dest="log_rmax", type=float, default=None)
    parser.add_argument("--grid-n", dest="grid_n", type=int, default=None)
    parser.add_argument("--min-ratio", dest="min_ratio", type=float, default=None)
    parser.add_argument("--fill", type=float, default=None)
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--fit", choices=["regular", "focus"], default=None)
    parser.add_argument("--fit-manifest", dest="fit_manifest", default=None)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _common_flags(common)

    parser = argparse.ArgumentParser(prog="foveate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", parents=[common], help="apply one image transform")
    p.add_argument("input")
    p.add_argument("--mode", choices=TRANSFORM_MODES, required=True)
    p.add_argument("--angle", type=float, default=0.0, help="rotation angle in degrees")
    p.add_argument("--factor", type=float, default=1.0, help="zoom factor")
    p.add_argument("--dx", type=int, default=0)
    p.add_argument("--dy", type=int, default=0)
    p.add_argument("--box", default=None, help="x_min,y_min,x_max,y_max (normalized)")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic scene suite")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=int, default=64)

    p = sub.add_parser("attack", parents=[common], help="run a geometric attack over a manifest")
    p.add_argument("manifest")
    p.add_argument("--kind", choices=["rotation", "zoom", "translation"], required=True)

    p = sub.add_parser("localize", parents=[common], help="likelihood map for one image")
    p.add_argument("input")
    p.add_argument("--labels", required=True, help="comma-separated label names")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--render", action="store_true")

    p = sub.add_parser("evaluate", parents=[common], help="localization metrics over a manifest")
    p.add_argument("manifest")
    p.add_argument("--compare", default=None, help="previous evaluation report for map comparison")

    return parser


COMMANDS = {
    "transform": cmd_transform,
    "synth": cmd_synth,
    "attack": cmd_attack,
    "localize": cmd_localize,
    "evaluate": cmd_evaluate,
}

CONFIG_KEYS = (
    "seed",
    "jobs",
    "out",
    "oracle",
    "bridge_cmd",
    "frame",
    "oracle_resolution",
    "n_rho",
    "n_theta",
    "log_rmin",
    "log_rmax",
    "grid_n",
    "min_ratio",
    "fill",
    "temperature",
    "fit",
    "fit_manifest",
)


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        overrides = {k: getattr(args, k) for k in CONFIG_KEYS}
        config = load_config(args.config, overrides)
        return COMMANDS[args.command](config, args)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
