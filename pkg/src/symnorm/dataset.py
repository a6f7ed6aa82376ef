"""Corpus manifests: the 57-category registry with its induction splits and
shape groups, per-sample records, and the ground-truth generation pipeline
that ties meshes, poses, rendered maps and symmetry labels together.

Corpus layout: ``<corpus_root>/<category>/<model_id>.obj``.  Manifest rows
are tab-separated in SampleRecord field order; the pose field packs
``azimuth,elevation,cyclo`` in degrees.  An image id is the shared path
prefix of a row's map files, ``<category>/<model_id>/v###``.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import util
from .errors import InputError, SymnormError
from .mesh_io import parse_obj_file
from .orientation import (
    HEMISPHERE,
    HORIZONTAL_CIRCLE,
    OrientationCodebook,
    ViewPose,
    fibonacci_codebook,
    make_symmetry_label,
    rotate_orientations,
    sample_view,
    view_distribution,
)
from .render import CameraIntrinsics, discretize_normal_map, rasterize, save_label_map, save_normal_map
from .symmetry import DetectorConfig, detect_symmetries, write_planes

logger = logging.getLogger(__name__)

SPLIT_A = (
    "airplane", "bathtub", "bed", "bicycle", "bookshelf", "bottle", "bowl",
    "bus", "can", "clock", "computer_keyboard", "dishwasher", "file",
    "loudspeaker", "mailbox", "microphone", "microwave", "mug", "piano",
    "pillow", "pistol", "pot", "printer", "skateboard", "stove", "table",
    "telephone", "train",
)

SPLIT_B = (
    "ashcan", "bag", "basket", "bench", "birdhouse", "boat", "cabinet",
    "camera", "cap", "car", "cellular_telephone", "chair", "display",
    "earphone", "faucet", "guitar", "helmet", "jar", "knife", "lamp",
    "laptop", "motorcycle", "remote_control", "rifle", "rocket", "sofa",
    "tower", "vessel", "washer",
)

SHAPE_GROUPS = {
    "circular": ("ashcan", "basket", "bottle", "bowl", "can", "cap", "clock",
                 "helmet", "jar", "lamp", "microphone", "mug", "pot", "rocket",
                 "tower", "washer"),
    "elongated": ("computer_keyboard", "knife", "piano", "rifle", "skateboard",
                  "train"),
    "planar": ("airplane", "bag", "bench", "bicycle", "bookshelf",
               "cellular_telephone", "display", "file", "laptop", "motorcycle",
               "pistol", "remote_control"),
    "cuboidal": ("bathtub", "bed", "bus", "cabinet", "camera", "car", "chair",
                 "dishwasher", "loudspeaker", "mailbox", "microwave", "pillow",
                 "printer", "sofa", "stove", "table"),
    "misc": ("birdhouse", "boat", "earphone", "faucet", "guitar", "telephone",
             "vessel"),
}


@dataclass(frozen=True)
class CategoryRegistry:
    """The corpus categories with their induction splits and shape groups."""

    categories: tuple
    split_a: frozenset
    split_b: frozenset
    groups: dict

    def __post_init__(self):
        if len(self.categories) != len(set(self.categories)):
            raise ValueError("duplicate category names")
        if self.split_a & self.split_b:
            raise ValueError("induction splits must be disjoint")
        if self.split_a | self.split_b != set(self.categories):
            raise ValueError("induction splits must cover every category")
        if set(self.groups) != set(self.categories):
            raise ValueError("every category needs a shape group")


def default_registry() -> CategoryRegistry:
    groups = {}
    for group, members in SHAPE_GROUPS.items():
        for name in members:
            groups[name] = group
    return CategoryRegistry(
        categories=tuple(sorted(SPLIT_A + SPLIT_B)),
        split_a=frozenset(SPLIT_A),
        split_b=frozenset(SPLIT_B),
        groups=groups,
    )


def induction_view(registry: CategoryRegistry, category: str) -> str:
    """Which trained split evaluates this category: the one NOT containing it."""
    if category in registry.split_a:
        return "train_on_B"
    if category in registry.split_b:
        return "train_on_A"
    raise ValueError(f"unknown category {category!r}")


@dataclass(frozen=True)
class SampleRecord:
    model_id: str
    category: str
    obj_path: str
    pose: ViewPose
    normal_map_path: str
    label_map_path: str
    symmetry_label: np.ndarray  # (K,) bool
    view_setting: str
    split: str


def record_image_id(record: SampleRecord) -> str:
    suffix = "_labels.pgm"
    if not record.label_map_path.endswith(suffix):
        raise ValueError(f"unexpected label map path {record.label_map_path!r}")
    return record.label_map_path[: -len(suffix)]


MANIFEST_FIELDS = ("model_id", "category", "obj_path", "pose", "normal_map_path",
                   "label_map_path", "symmetry_label", "view_setting", "split")


def write_manifest(path, records, codebook: OrientationCodebook,
                   normal_codebook: OrientationCodebook, view_setting: str) -> None:
    lines = [
        f"#codebook:\tsupport={codebook.support}\tk={codebook.K}",
        f"#normal_codebook:\tsupport={normal_codebook.support}\tk={normal_codebook.K}",
        f"#view_setting:\t{view_setting}",
        "#fields:\t" + "\t".join(MANIFEST_FIELDS),
    ]
    for r in records:
        pose = ",".join(repr(float(v)) for v in
                        (r.pose.azimuth_deg, r.pose.elevation_deg, r.pose.cyclo_deg))
        bits = "".join("1" if b else "0" for b in r.symmetry_label)
        lines.append("\t".join([r.model_id, r.category, r.obj_path, pose,
                                r.normal_map_path, r.label_map_path, bits,
                                r.view_setting, r.split]))
    util.atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path):
    """Return (metadata dict, records).  Paths stay relative to the manifest."""
    meta = {}
    records = []
    saw_fields = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, rest = line[1:].partition(":\t")
                if key == "fields":
                    if tuple(rest.split("\t")) != MANIFEST_FIELDS:
                        raise InputError(f"{path}: unexpected manifest fields")
                    saw_fields = True
                else:
                    meta[key] = rest
                continue
            parts = line.split("\t")
            if len(parts) != len(MANIFEST_FIELDS):
                raise InputError(f"{path}: line {lineno}: expected "
                                 f"{len(MANIFEST_FIELDS)} fields, found {len(parts)}")
            model_id, category, obj_path, pose_s, nm_path, lm_path, bits, view_setting, split = parts
            try:
                az, el, cy = (float(v) for v in pose_s.split(","))
            except ValueError:
                raise InputError(f"{path}: line {lineno}: bad pose {pose_s!r}") from None
            label = np.array([c == "1" for c in bits], dtype=bool)
            records.append(SampleRecord(model_id, category, obj_path, ViewPose(az, el, cy),
                                        nm_path, lm_path, label, view_setting, split))
    if not saw_fields:
        raise InputError(f"{path}: missing #fields: header line")
    return meta, records


def manifest_codebook(meta, key="codebook") -> OrientationCodebook:
    spec = dict(item.split("=", 1) for item in meta[key].split("\t"))
    return fibonacci_codebook(int(spec["k"]), spec["support"])


def _split_models(model_ids, seed, category, cap):
    """Deterministic cap and 75/25 model-level split: sort, shuffle, slice."""
    ids = sorted(model_ids)
    rng = util.derive_rng(seed, "model-split", category)
    order = rng.permutation(len(ids))
    kept = [ids[i] for i in order[:cap]]
    n_train = math.floor(0.75 * len(kept))
    return {mid: ("train" if rank < n_train else "test") for rank, mid in enumerate(kept)}


def build_manifest(corpus_root, out_dir, registry: CategoryRegistry | None = None,
                   per_model_views: int = 200, view_setting: str = "V_N",
                   codebook: OrientationCodebook | None = None,
                   detector_config: DetectorConfig | None = None, seed: int = 0,
                   normal_codebook: OrientationCodebook | None = None,
                   camera: CameraIntrinsics | None = None,
                   max_models_per_category: int = 200):
    """Generate ground truth for a corpus and write manifest plus sidecars.

    Per model: detect symmetry planes once, then per view sample a pose,
    render the normal/depth/label maps, rotate the symmetry orientations
    into the view and discretize them into the multilabel target.
    Returns (records, manifest_path).
    """
    corpus_root = Path(corpus_root)
    out_dir = Path(out_dir)
    registry = registry if registry is not None else default_registry()
    codebook = codebook if codebook is not None else fibonacci_codebook(10, HORIZONTAL_CIRCLE)
    normal_codebook = (normal_codebook if normal_codebook is not None
                       else fibonacci_codebook(60, HEMISPHERE))
    camera = camera if camera is not None else CameraIntrinsics()
    detector_config = detector_config if detector_config is not None else DetectorConfig(seed=seed)
    dist = view_distribution(view_setting)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for category in registry.categories:
        cat_dir = corpus_root / category
        if not cat_dir.is_dir():
            logger.warning("category %s has no directory under %s", category, corpus_root)
            continue
        model_ids = [p.stem for p in cat_dir.glob("*.obj")]
        if not model_ids:
            logger.warning("category %s holds no usable models", category)
            continue
        split_of = _split_models(model_ids, seed, category, max_models_per_category)
        usable = 0
        for model_id in sorted(split_of):
            obj_path = cat_dir / f"{model_id}.obj"
            try:
                mesh = parse_obj_file(obj_path)
            except SymnormError as exc:
                logger.warning("skipping %s: %s", obj_path, exc)
                continue
            usable += 1
            planes = detect_symmetries(mesh, detector_config)
            plane_normals = np.array([p.normal for p in planes]).reshape(-1, 3)
            model_dir = out_dir / category / model_id
            model_dir.mkdir(parents=True, exist_ok=True)
            write_planes(model_dir / "planes.txt", planes,
                         comments=[f"accept_residual {detector_config.accept_residual}",
                                   "columns: nx ny nz offset residual"])
            for view in range(per_model_views):
                view_seed = util.derive_seed(seed, "view", category, model_id, view)
                pose = sample_view(dist, view_seed)
                nm = rasterize(mesh, pose, camera)
                lm = discretize_normal_map(nm, normal_codebook)
                rotated = rotate_orientations(plane_normals, pose.rotation)
                label = make_symmetry_label(rotated, codebook)
                rel = f"{category}/{model_id}/v{view:03d}"
                save_normal_map(out_dir / rel, nm)
                save_label_map(out_dir / f"{rel}_labels.pgm", lm)
                records.append(SampleRecord(
                    model_id=model_id,
                    category=category,
                    obj_path=os.path.relpath(obj_path, out_dir),
                    pose=pose,
                    normal_map_path=f"{rel}_normal.pfm",
                    label_map_path=f"{rel}_labels.pgm",
                    symmetry_label=label,
                    view_setting=view_setting,
                    split=split_of[model_id],
                ))
        if usable == 0:
            logger.warning("category %s holds no usable models", category)
    records.sort(key=lambda r: (r.category, r.model_id, r.label_map_path))
    manifest_path = out_dir / "manifest.tsv"
    write_manifest(manifest_path, records, codebook, normal_codebook, view_setting)
    return records, manifest_path
