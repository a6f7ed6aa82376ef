"""Command-line surface: detect, render, build, eval-sym, eval-normals, baseline.

Exit codes: 0 success, 1 internal error, 2 input/parse error, 3 geometry or
degenerate-data error.  Reports are written both human-readable (.txt) and
tab-separated (.tsv); plot data is emitted as CSV.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import evaluation, util
from .config import RunConfig
from .dataset import (
    build_manifest,
    default_registry,
    manifest_codebook,
    read_manifest,
    record_image_id,
)
from .errors import GeometryError, InputError, SymnormError
from .mesh_io import parse_obj_file
from .orientation import ViewPose, fibonacci_codebook
from .render import (
    discretize_normal_map,
    labels_to_normals,
    load_label_map,
    load_normal_map,
    rasterize,
    save_label_map,
    save_normal_map,
)
from .symmetry import detect_symmetries, write_planes

logger = logging.getLogger(__name__)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("seed", "width", "height", "fov_y_deg", "codebook_k", "theta_deg",
                 "view_setting", "per_model_views", "max_models_per_category"):
        if hasattr(args, name):
            overrides[name] = getattr(args, name)
    return cfg.merged(**overrides)


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    mesh = parse_obj_file(args.obj)
    planes = detect_symmetries(mesh, cfg.detector())
    write_planes(args.out, planes, comments=[
        f"accept_residual {cfg.accept_residual}",
        f"seed {cfg.seed}",
        "columns: nx ny nz offset residual",
    ])
    print(f"{len(planes)} symmetry plane(s) -> {args.out}")
    return 0


def cmd_render(args) -> int:
    cfg = _load_config(args)
    mesh = parse_obj_file(args.obj)
    pose = ViewPose(args.az, args.el, args.cyclo)
    nm = rasterize(mesh, pose, cfg.camera())
    lm = discretize_normal_map(nm, cfg.normal_codebook() if args.codebook_k is None
                               else fibonacci_codebook(args.codebook_k, "hemisphere"))
    normal_path, depth_path = save_normal_map(args.out, nm)
    label_path = f"{args.out}_labels.pgm"
    save_label_map(label_path, lm)
    print(f"wrote {normal_path}, {depth_path}, {label_path}")
    return 0


def cmd_build(args) -> int:
    cfg = _load_config(args)
    records, manifest_path = build_manifest(
        args.corpus_root, args.out_dir,
        registry=default_registry(),
        per_model_views=cfg.per_model_views,
        view_setting=cfg.view_setting,
        codebook=cfg.symmetry_codebook(),
        detector_config=cfg.detector(),
        seed=cfg.seed,
        normal_codebook=cfg.normal_codebook(),
        camera=cfg.camera(),
        max_models_per_category=cfg.max_models_per_category,
    )
    print(f"{len(records)} records -> {manifest_path}")
    return 0


def read_predictions(path):
    """Tab-separated `image_id nx ny nz confidence`, one prediction per line."""
    preds = defaultdict(list)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise InputError(f"{path}: line {lineno}: expected 5 tab-separated fields")
            image_id = parts[0]
            try:
                nx, ny, nz, conf = (float(v) for v in parts[1:])
            except ValueError:
                raise InputError(f"{path}: line {lineno}: bad numeric field") from None
            try:
                preds[image_id].append(evaluation.SymmetryPrediction(np.array([nx, ny, nz]), conf))
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None
    return preds


def write_predictions(path, image_ids, per_image_predictions) -> None:
    lines = []
    for image_id, preds in zip(image_ids, per_image_predictions):
        for p in preds:
            nx, ny, nz = p.orientation
            lines.append(f"{image_id}\t{float(nx)!r}\t{float(ny)!r}\t{float(nz)!r}\t{p.confidence!r}")
    util.atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_eval_sym(args) -> int:
    cfg = _load_config(args)
    meta, records = read_manifest(args.gt_manifest)
    codebook = manifest_codebook(meta)
    predictions = read_predictions(args.predictions)
    known = {record_image_id(r) for r in records}
    stray = sorted(set(predictions) - known)
    if stray:
        raise InputError(f"predictions reference unknown image ids: {', '.join(stray[:5])}")
    by_category = defaultdict(lambda: ([], []))
    for r in records:
        gts, preds = by_category[r.category]
        gts.append(codebook.directions[np.flatnonzero(r.symmetry_label)])
        preds.append(predictions.get(record_image_id(r), []))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for category in sorted(by_category):
        gts, preds = by_category[category]
        n_gt = sum(len(g) for g in gts)
        n_pred = sum(len(p) for p in preds)
        if n_gt == 0:
            logger.warning("category %s has no ground-truth planes; skipped", category)
            continue
        curve = evaluation.ap_symmetry(gts, preds, cfg.theta_deg)
        rows.append((category, curve.ap, n_gt, n_pred))
        csv = "recall,precision\n" + "".join(f"{float(r)!r},{float(p)!r}\n" for r, p in curve.points)
        util.atomic_write_text(out_dir / f"{category}_pr.csv", csv)
    if not rows:
        raise InputError("no category had ground-truth planes")
    macro = float(np.mean([ap for _, ap, _, _ in rows]))
    tsv = ["category\tap\tn_gt\tn_pred"]
    txt = [f"symmetry AP at theta={cfg.theta_deg} deg"]
    for category, ap, n_gt, n_pred in rows:
        tsv.append(f"{category}\t{ap!r}\t{n_gt}\t{n_pred}")
        txt.append(f"  {category:24s} AP {ap:.4f}  ({n_gt} gt, {n_pred} pred)")
    tsv.append(f"macro\t{macro!r}\t\t")
    txt.append(f"  {'macro':24s} AP {macro:.4f}")
    util.atomic_write_text(out_dir / "report.tsv", "\n".join(tsv) + "\n")
    util.atomic_write_text(out_dir / "report.txt", "\n".join(txt) + "\n")
    print("\n".join(txt))
    return 0


def _load_prediction_map(pred_dir: Path, image_id: str, codebook):
    pgm = pred_dir / f"{image_id}_labels.pgm"
    if pgm.is_file():
        return labels_to_normals(load_label_map(pgm, codebook.K), codebook)
    pfm = pred_dir / f"{image_id}_normal.pfm"
    if pfm.is_file():
        return load_normal_map(pfm)
    raise InputError(f"no prediction found for {image_id} under {pred_dir}")


def cmd_eval_normals(args) -> int:
    meta, records = read_manifest(args.gt_manifest)
    codebook = manifest_codebook(meta, "normal_codebook")
    manifest_dir = Path(args.gt_manifest).parent
    pred_dir = Path(args.pred_dir)
    instances = []
    skipped = []
    for r in records:
        image_id = record_image_id(r)
        try:
            gt = load_normal_map(manifest_dir / r.normal_map_path)
            pred = _load_prediction_map(pred_dir, image_id, codebook)
            errors = evaluation.pixel_errors_deg(gt, pred)
        except (SymnormError, ValueError) as exc:
            skipped.append((image_id, str(exc)))
            continue
        instances.append(evaluation.InstanceErrors(r.category, errors))
    if not instances:
        raise InputError("no evaluable images")
    per_category, macro = evaluation.aggregate_by_category(instances)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = "category\tmean_err_deg\tmedian_err_deg\tgp_11_25\tgp_22_5\tgp_30\tauc_30"
    tsv = [header]
    txt = ["surface-normal metrics (degrees / fractions)"]
    for category, m in list(per_category.items()) + [("macro", macro)]:
        tsv.append(f"{category}\t{m.mean_err_deg!r}\t{m.median_err_deg!r}"
                   f"\t{m.gp_11_25!r}\t{m.gp_22_5!r}\t{m.gp_30!r}\t{m.auc_30!r}")
        txt.append(f"  {category:24s} mean {m.mean_err_deg:7.2f}  median {m.median_err_deg:7.2f}"
                   f"  GP {m.gp_11_25 * 100:5.1f}/{m.gp_22_5 * 100:5.1f}/{m.gp_30 * 100:5.1f}"
                   f"  AUC {m.auc_30:.4f}")
        if category != "macro":
            csv = "threshold_deg,fraction\n" + "".join(
                f"{float(t)!r},{float(f)!r}\n" for t, f in per_category[category].curve)
            util.atomic_write_text(out_dir / f"{category}_gp_curve.csv", csv)
    for image_id, reason in skipped:
        txt.append(f"  skipped {image_id}: {reason}")
    util.atomic_write_text(out_dir / "report.tsv", "\n".join(tsv) + "\n")
    util.atomic_write_text(out_dir / "report.txt", "\n".join(txt) + "\n")
    print("\n".join(txt))
    return 2 if skipped else 0


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    meta, records = read_manifest(args.gt_manifest)
    codebook = (manifest_codebook(meta) if args.codebook_k is None
                else fibonacci_codebook(args.codebook_k,
                                        meta["codebook"].split("support=")[1].split("\t")[0]))
    image_ids = [record_image_id(r) for r in records]
    predictions = evaluation.random_baseline(codebook, len(image_ids), cfg.seed)
    write_predictions(args.out, image_ids, predictions)
    print(f"{len(image_ids) * codebook.K} baseline predictions -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symnorm",
        description="Reflection-symmetry extraction, normal-map ground truth "
                    "and detection-style evaluation for triangle meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--seed", type=int, default=None, help="root seed (default 0)")

    p = sub.add_parser("detect", help="extract symmetry planes from an OBJ mesh")
    p.add_argument("obj")
    p.add_argument("--out", required=True, help="output planes file")
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("render", help="render normal/depth/label maps for one pose")
    p.add_argument("obj")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--az", type=float, default=0.0)
    p.add_argument("--el", type=float, default=0.0)
    p.add_argument("--cyclo", type=float, default=0.0)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--fov", type=float, default=None, dest="fov_y_deg")
    p.add_argument("--codebook-k", type=int, default=None, dest="codebook_k",
                   help="hemisphere codebook size for the label map (default 60)")
    common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("build", help="build ground-truth manifest for a corpus")
    p.add_argument("corpus_root")
    p.add_argument("out_dir")
    p.add_argument("--views", type=int, default=None, dest="per_model_views")
    p.add_argument("--view-setting", choices=("V_N", "V_D"), default=None, dest="view_setting")
    p.add_argument("--max-models", type=int, default=None, dest="max_models_per_category")
    common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval-sym", help="score symmetry predictions against a manifest")
    p.add_argument("gt_manifest")
    p.add_argument("predictions")
    p.add_argument("--theta-deg", type=float, default=None, dest="theta_deg")
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_sym)

    p = sub.add_parser("eval-normals", help="score predicted normal/label maps")
    p.add_argument("gt_manifest")
    p.add_argument("pred_dir")
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_normals)

    p = sub.add_parser("baseline", help="emit the uninformed random baseline")
    p.add_argument("gt_manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--codebook-k", type=int, default=None, dest="codebook_k")
    common(p)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SymnormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
