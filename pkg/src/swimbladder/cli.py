"""Command-line front end.

Subcommands cover the whole pipeline: phantom-gen, build-atlas, segment,
features, train, predict, crossval.  Exit codes: 0 on success, 1 when some
per-image items failed, 2 on usage or fatal errors.

Option precedence is CLI flag > config file (key=value lines) > built-in
default.  All randomness flows from --seed.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import atlas as atlas_mod
from . import contour, descriptors, forest, phantom, preprocessing
from .errors import EmptyRegion, PipelineError
from .imaging import read_gray, read_mask, write_gray, write_mask
from .labels import LABEL_WITH, LABEL_WITHOUT, ORIENTATIONS
from .registration import RegistrationConfig

log = logging.getLogger("swimbladder")

DEFAULTS = {
    "seed": 0,
    "jobs": None,  # None = cpu count
    "roi_diameter": 40.0,
    "r_min": 10,
    "levels": 4,
    "iterations_per_level": 200,
    "bins": 32,
    "initial_step": 2.0,
    "min_step": 0.01,
    "n_estimators": 50,
    "max_depth": 30,
    "min_samples_split": 5,
    "min_samples_leaf": 2,
    "features_per_split": 0,
    "k": 5,
}


def _parse_config_file(path):
    """key=value lines; values parsed as int, float, bool or string."""
    options = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        value = value.strip("\"'")
        if value.lower() in ("true", "false"):
            options[key] = value.lower() == "true"
            continue
        for caster in (int, float):
            try:
                options[key] = caster(value)
                break
            except ValueError:
                continue
        else:
            options[key] = value
    return options


class Options:
    """Effective option values: CLI flag > config file > defaults."""

    def __init__(self, args):
        self._args = args
        self._config = _parse_config_file(args.config) if getattr(args, "config", None) else {}

    def get(self, key):
        value = getattr(self._args, key, None)
        if value is None:
            value = self._config.get(key)
        if value is None:
            value = DEFAULTS.get(key)
        return value

    def reg_config(self):
        return RegistrationConfig(
            levels=int(self.get("levels")),
            iterations_per_level=int(self.get("iterations_per_level")),
            bins=int(self.get("bins")),
            initial_step=float(self.get("initial_step")),
            min_step=float(self.get("min_step")),
            seed=int(self.get("seed")),
        )

    def forest_params(self):
        return forest.ForestParams(
            n_estimators=int(self.get("n_estimators")),
            max_depth=int(self.get("max_depth")),
            min_samples_split=int(self.get("min_samples_split")),
            min_samples_leaf=int(self.get("min_samples_leaf")),
            features_per_split=int(self.get("features_per_split")),
            seed=int(self.get("seed")),
        )


# ---------------------------------------------------------------------------
# manifest


def load_manifest(path):
    """JSON-lines manifest; relative paths resolve against the manifest dir."""
    root = Path(path).resolve().parent
    entries = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            entry = json.loads(raw)
            if "image_path" not in entry or "orientation" not in entry:
                raise ValueError(f"{path}:{lineno}: entry needs image_path and orientation")
            if entry["orientation"] not in ORIENTATIONS:
                raise ValueError(f"{path}:{lineno}: bad orientation {entry['orientation']!r}")
            for key in ("image_path", "body_mask_path", "bladder_mask_path"):
                if entry.get(key):
                    entry[key] = str((root / entry[key]).resolve())
            entry["image_id"] = Path(entry["image_path"]).stem
            entries.append(entry)
    return entries


# ---------------------------------------------------------------------------
# phantom-gen


def cmd_phantom_gen(args):
    opts = Options(args)
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    base = phantom.PhantomSpec(orientation=args.orientation)
    truths = phantom.generate_cohort(
        n=args.n,
        fraction_with=args.fraction_with,
        base_spec=base,
        seed=int(opts.get("seed")),
        fraction_dorsal=args.fraction_dorsal,
    )
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w") as fh:
        for i, truth in enumerate(truths):
            image_id = f"phantom_{i:04d}"
            image_rel = f"images/{image_id}.png"
            body_rel = f"masks/{image_id}_body.png"
            write_gray(out / image_rel, truth.image)
            write_mask(out / body_rel, truth.body)
            bladder_rel = None
            if truth.label == LABEL_WITH:
                bladder_rel = f"masks/{image_id}_bladder.png"
                write_mask(out / bladder_rel, truth.bladder)
            fh.write(
                json.dumps(
                    {
                        "image_path": image_rel,
                        "body_mask_path": body_rel,
                        "bladder_mask_path": bladder_rel,
                        "label": truth.label,
                        "orientation": truth.orientation,
                        "seed": truth.seed,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"wrote {len(truths)} phantoms under {out} (manifest: {manifest_path})")
    return 0


# ---------------------------------------------------------------------------
# build-atlas


def cmd_build_atlas(args):
    opts = Options(args)
    entries = load_manifest(args.manifest)
    chosen = []
    for entry in entries:
        if entry["orientation"] != args.orientation:
            continue
        if entry.get("label") == LABEL_WITHOUT:
            continue
        mask_path = None
        if args.masks_dir:
            candidate = Path(args.masks_dir) / f"{entry['image_id']}.png"
            if candidate.exists():
                mask_path = candidate
        if mask_path is None and entry.get("bladder_mask_path"):
            candidate = Path(entry["bladder_mask_path"])
            if candidate.exists():
                mask_path = candidate
        if mask_path is None:
            continue
        chosen.append((entry, mask_path))
    if len(chosen) < 2:
        print(
            f"error: need >= 2 healthy {args.orientation} entries with organ masks, "
            f"found {len(chosen)}",
            file=sys.stderr,
        )
        return 2
    images = [read_gray(entry["image_path"]) for entry, _ in chosen]
    masks = [read_mask(mask_path) for _, mask_path in chosen]

    def report(i, mi):
        print(f"registered {chosen[i][0]['image_id']}: MI = {mi:.4f} bits")

    try:
        built = atlas_mod.build_atlas(
            images,
            masks,
            fixed_index=args.fixed_index,
            cfg=opts.reg_config(),
            orientation=args.orientation,
            on_registered=report,
        )
    except PipelineError as exc:
        print(f"error: atlas build failed: {exc}", file=sys.stderr)
        return 2
    atlas_mod.save_atlas(built, args.out)
    print(f"atlas built from n={built.n} images -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# segment


def _load_atlases(args):
    atlases = {}
    for orientation, path in (("dorsal", args.atlas_dorsal), ("lateral", args.atlas_lateral)):
        if path:
            atlases[orientation] = str(path)
    return atlases


_WORKER_ATLASES = {}


def _get_atlas(atlas_dir):
    if atlas_dir not in _WORKER_ATLASES:
        _WORKER_ATLASES[atlas_dir] = atlas_mod.load_atlas(atlas_dir)
    return _WORKER_ATLASES[atlas_dir]


def _segment_one(task):
    (entry, atlas_dir, out_dir, roi_diameter, r_min, overlays, reg_text) = task
    image_id = entry["image_id"]
    try:
        image = read_gray(entry["image_path"])
        ctx = preprocessing.make_context(image, orientation=entry["orientation"])
        atl = _get_atlas(atlas_dir)
        cfg = RegistrationConfig.from_text(reg_text)
        roi = atlas_mod.locate_roi(atl, image, ctx, cfg=cfg, radius=roi_diameter / 2.0)
        shape, path, polar = contour.extract_shape(image, roi, r_min=r_min)
        out = Path(out_dir)
        write_mask(out / f"{image_id}_full.png", shape.full)
        write_mask(out / f"{image_id}_inner.png", shape.interior)
        write_mask(out / f"{image_id}_band.png", shape.contour)
        if overlays:
            _write_overlay(out / f"{image_id}_overlay.png", image, roi, path)
            norm = np.clip(polar, 0, 255).astype(np.uint8)
            write_gray(out / f"{image_id}_polar.png", norm)
        return image_id, None
    except (PipelineError, OSError, ValueError) as exc:
        return image_id, f"{type(exc).__name__}: {exc}"


def _write_overlay(path, image, roi, circ_path):
    rgb = Image.fromarray(np.asarray(image, dtype=np.uint8)).convert("RGB")
    draw = ImageDraw.Draw(rgb)
    cx, cy, r = roi.center.x, roi.center.y, roi.radius
    draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=(255, 255, 0))
    theta = np.radians(roi.start_angle + np.arange(len(circ_path.radii)))
    xs = cx + circ_path.radii * np.cos(theta)
    ys = cy + circ_path.radii * np.sin(theta)
    draw.line(list(zip(xs.tolist(), ys.tolist())), fill=(255, 0, 0))
    rgb.save(path)


def cmd_segment(args):
    opts = Options(args)
    entries = load_manifest(args.manifest)
    atlases = _load_atlases(args)
    needed = {entry["orientation"] for entry in entries}
    for orientation in sorted(needed):
        if orientation not in atlases:
            print(f"error: no atlas given for {orientation} images", file=sys.stderr)
            return 2
        meta = Path(atlases[orientation]) / "meta.json"
        if not meta.exists():
            print(f"error: atlas file missing: {meta}", file=sys.stderr)
            return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reg_text = opts.reg_config().to_text()
    tasks = [
        (
            entry,
            atlases[entry["orientation"]],
            str(out),
            float(opts.get("roi_diameter")),
            int(opts.get("r_min")),
            bool(args.overlays),
            reg_text,
        )
        for entry in entries
    ]
    jobs = opts.get("jobs")
    jobs = os.cpu_count() if jobs is None else int(jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_segment_one, tasks))
    else:
        results = [_segment_one(task) for task in tasks]
    failures = 0
    for image_id, error in results:
        if error is None:
            print(f"segmented {image_id}")
        else:
            failures += 1
            print(f"failed {image_id}: {error}", file=sys.stderr)
    if failures:
        print(f"{failures}/{len(results)} images failed", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# features


def cmd_features(args):
    entries = load_manifest(args.manifest)
    shapes = Path(args.shapes_dir)
    rows = []
    for entry in entries:
        image_id = entry["image_id"]
        inner_path = shapes / f"{image_id}_inner.png"
        band_path = shapes / f"{image_id}_band.png"
        if not inner_path.exists() or not band_path.exists():
            log.warning("no shape masks for %s; skipping", image_id)
            continue
        image = read_gray(entry["image_path"])
        inner = read_mask(inner_path)
        band = read_mask(band_path)
        shape = contour.SegmentedShape(contour=band, interior=inner, full=band | inner)
        try:
            fv = descriptors.feature_vector(image, shape)
        except EmptyRegion as exc:
            log.warning("degenerate regions for %s: %s; row not written", image_id, exc)
            continue
        rows.append((image_id, entry.get("label") or "", fv))
    descriptors.write_features_csv(args.out, rows)
    print(f"wrote {len(rows)} feature rows -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train / predict / crossval


def _dataset_from_csv(path):
    rows = descriptors.read_features_csv(path)
    labeled = [row for row in rows if row[1] in (LABEL_WITH, LABEL_WITHOUT)]
    if len(labeled) < len(rows):
        log.warning("%d rows without labels ignored", len(rows) - len(labeled))
    return forest.Dataset.from_rows(labeled)


def cmd_train(args):
    opts = Options(args)
    data = _dataset_from_csv(args.features)
    try:
        model = forest.train_forest(data, opts.forest_params())
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    model.save(args.out)
    print(f"trained {model.params.n_estimators} trees on {len(data.labels)} samples -> {args.out}")
    return 0


def cmd_predict(args):
    model = forest.ForestModel.load(args.model)
    rows = descriptors.read_features_csv(args.features)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("image_id,predicted_label,votes_fraction\n")
        for image_id, _, fv in rows:
            label, fraction = model.predict(fv)
            fh.write(f"{image_id},{label},{fraction:.6g}\n")
    print(f"wrote {len(rows)} predictions -> {args.out}")
    return 0


def cmd_crossval(args):
    opts = Options(args)
    data = _dataset_from_csv(args.features)
    try:
        report = forest.cross_validate(
            data, k=int(opts.get("k")), params=opts.forest_params(), seed=int(opts.get("seed"))
        )
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = {
        "k": report.k,
        "folds": [cm.as_table() for cm in report.fold_matrices],
        "pooled": report.pooled.as_table(),
        "accuracy": report.accuracy,
        "sensitivity": report.sensitivity,
        "specificity": report.specificity,
        "params": opts.forest_params().to_dict(),
        "seed": int(opts.get("seed")),
    }
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(
        f"pooled accuracy {report.accuracy:.4f}, sensitivity {report.sensitivity:.4f}, "
        f"specificity {report.specificity:.4f}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="master random seed")
    parser.add_argument("--config", default=None, help="key=value options file")


def _add_reg_flags(parser):
    parser.add_argument("--levels", type=int, default=None)
    parser.add_argument("--iterations-per-level", type=int, default=None, dest="iterations_per_level")
    parser.add_argument("--bins", type=int, default=None)
    parser.add_argument("--initial-step", type=float, default=None, dest="initial_step")
    parser.add_argument("--min-step", type=float, default=None, dest="min_step")


def _add_forest_flags(parser):
    parser.add_argument("--n-estimators", type=int, default=None, dest="n_estimators")
    parser.add_argument("--max-depth", type=int, default=None, dest="max_depth")
    parser.add_argument("--min-samples-split", type=int, default=None, dest="min_samples_split")
    parser.add_argument("--min-samples-leaf", type=int, default=None, dest="min_samples_leaf")
    parser.add_argument("--features-per-split", type=int, default=None, dest="features_per_split")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="swimbladder",
        description="Atlas-guided organ detection pipeline for embryo screening images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom-gen", help="generate a synthetic cohort with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=261)
    p.add_argument("--fraction-with", type=float, default=202 / 261, dest="fraction_with")
    p.add_argument("--fraction-dorsal", type=float, default=None, dest="fraction_dorsal")
    p.add_argument("--orientation", choices=ORIENTATIONS, default="dorsal")
    _add_common(p)
    p.set_defaults(func=cmd_phantom_gen)

    p = sub.add_parser("build-atlas", help="build an atlas from healthy entries")
    p.add_argument("--manifest", required=True)
    p.add_argument("--orientation", choices=ORIENTATIONS, required=True)
    p.add_argument("--masks-dir", default=None, dest="masks_dir")
    p.add_argument("--fixed-index", type=int, default=0, dest="fixed_index")
    p.add_argument("--out", required=True)
    _add_common(p)
    _add_reg_flags(p)
    p.set_defaults(func=cmd_build_atlas)

    p = sub.add_parser("segment", help="locate the ROI and extract the contour per image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--atlas-dorsal", default=None, dest="atlas_dorsal")
    p.add_argument("--atlas-lateral", default=None, dest="atlas_lateral")
    p.add_argument("--out", required=True)
    p.add_argument("--overlays", action="store_true")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--roi-diameter", type=float, default=None, dest="roi_diameter")
    p.add_argument("--r-min", type=int, default=None, dest="r_min")
    _add_common(p)
    _add_reg_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("features", help="compute the 24 descriptors per segmented image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--shapes-dir", required=True, dest="shapes_dir")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the screening forest on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    _add_forest_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a trained model to a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("crossval", help="stratified k-fold evaluation of a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    _add_forest_flags(p)
    p.set_defaults(func=cmd_crossval)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
