import logging

import numpy as np
import pytest

import shapes
from symnorm.dataset import (
    CategoryRegistry,
    build_manifest,
    default_registry,
    induction_view,
    manifest_codebook,
    read_manifest,
    record_image_id,
    write_manifest,
)
from symnorm.mesh_io import serialize_obj
from symnorm.orientation import HEMISPHERE, HORIZONTAL_CIRCLE, fibonacci_codebook
from symnorm.render import CameraIntrinsics, load_label_map, load_normal_map
from symnorm.symmetry import DetectorConfig

# golden copies of the induction splits and shape groups, kept verbatim in
# the test so any drift in the module constants is caught
GOLDEN_A = {
    "airplane", "bathtub", "bed", "bicycle", "bookshelf", "bottle", "bowl",
    "bus", "can", "clock", "computer_keyboard", "dishwasher", "file",
    "loudspeaker", "mailbox", "microphone", "microwave", "mug", "piano",
    "pillow", "pistol", "pot", "printer", "skateboard", "stove", "table",
    "telephone", "train",
}
GOLDEN_B = {
    "ashcan", "bag", "basket", "bench", "birdhouse", "boat", "cabinet",
    "camera", "cap", "car", "cellular_telephone", "chair", "display",
    "earphone", "faucet", "guitar", "helmet", "jar", "knife", "lamp",
    "laptop", "motorcycle", "remote_control", "rifle", "rocket", "sofa",
    "tower", "vessel", "washer",
}
GOLDEN_GROUPS = {
    "circular": {"ashcan", "basket", "bottle", "bowl", "can", "cap", "clock",
                 "helmet", "jar", "lamp", "microphone", "mug", "pot",
                 "rocket", "tower", "washer"},
    "elongated": {"computer_keyboard", "knife", "piano", "rifle",
                  "skateboard", "train"},
    "planar": {"airplane", "bag", "bench", "bicycle", "bookshelf",
               "cellular_telephone", "display", "file", "laptop",
               "motorcycle", "pistol", "remote_control"},
    "cuboidal": {"bathtub", "bed", "bus", "cabinet", "camera", "car",
                 "chair", "dishwasher", "loudspeaker", "mailbox",
                 "microwave", "pillow", "printer", "sofa", "stove", "table"},
    "misc": {"birdhouse", "boat", "earphone", "faucet", "guitar",
             "telephone", "vessel"},
}

TOY_DETECTOR = DetectorConfig(sample_count=2500, pair_count=8000, max_hypotheses=16,
                              cluster_offset_frac=0.015)


def toy_camera():
    return CameraIntrinsics(width=64, height=64)


def make_corpus(root, categories=("airplane",), models=4):
    for category in categories:
        (root / category).mkdir(parents=True)
        for i in range(models):
            mesh = shapes.cuboid(1.0 + 0.2 * i, 1.5, 2.0 + 0.1 * i)
            (root / category / f"model{i}.obj").write_text(serialize_obj(mesh))


def test_registry_counts_and_golden_lists():
    reg = default_registry()
    assert len(reg.categories) == 57
    assert len(reg.split_a) == 28
    assert len(reg.split_b) == 29
    assert reg.split_a == GOLDEN_A
    assert reg.split_b == GOLDEN_B
    assert not (reg.split_a & reg.split_b)
    assert reg.split_a | reg.split_b == set(reg.categories)
    for group, members in GOLDEN_GROUPS.items():
        assert {c for c, g in reg.groups.items() if g == group} == members


def test_registry_validation():
    with pytest.raises(ValueError):
        CategoryRegistry(("a", "b"), frozenset({"a"}), frozenset({"a", "b"}),
                         {"a": "misc", "b": "misc"})  # overlapping splits
    with pytest.raises(ValueError):
        CategoryRegistry(("a", "b"), frozenset({"a"}), frozenset(),
                         {"a": "misc", "b": "misc"})  # not exhaustive


def test_induction_view():
    reg = default_registry()
    assert induction_view(reg, "airplane") == "train_on_B"
    assert induction_view(reg, "car") == "train_on_A"
    with pytest.raises(ValueError):
        induction_view(reg, "zeppelin")


def test_build_manifest_split_and_integrity(tmp_path, caplog):
    corpus = tmp_path / "corpus"
    make_corpus(corpus)
    with caplog.at_level(logging.WARNING):
        records, manifest_path = build_manifest(
            corpus, tmp_path / "out", per_model_views=2,
            detector_config=TOY_DETECTOR, camera=toy_camera(), seed=0)
    assert len(records) == 8  # 4 models x 2 views
    splits = {r.model_id: r.split for r in records}
    assert sorted(splits.values()).count("train") == 3
    assert sorted(splits.values()).count("test") == 1
    # missing registry categories warn but do not fail
    assert any("has no directory" in m for m in caplog.messages)
    # referential integrity: every path resolves and parses
    meta, again = read_manifest(manifest_path)
    assert len(again) == 8
    codebook = manifest_codebook(meta)
    assert codebook.K == 10 and codebook.support == HORIZONTAL_CIRCLE
    normal_codebook = manifest_codebook(meta, "normal_codebook")
    assert normal_codebook.K == 60 and normal_codebook.support == HEMISPHERE
    for r in again:
        nm = load_normal_map(manifest_path.parent / r.normal_map_path)
        lm = load_label_map(manifest_path.parent / r.label_map_path, normal_codebook.K)
        assert nm.mask.shape == (64, 64)
        assert np.array_equal(lm.labels == normal_codebook.K, ~nm.mask)
        assert len(r.symmetry_label) == codebook.K
        assert (manifest_path.parent / r.obj_path).resolve().exists()
        assert record_image_id(r).endswith(r.label_map_path[:-len("_labels.pgm")].split("/")[-1])


def test_build_manifest_deterministic(tmp_path):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, models=2)
    out_a, out_b = tmp_path / "out_a", tmp_path / "out_b"
    _, man_a = build_manifest(corpus, out_a, per_model_views=2,
                              detector_config=TOY_DETECTOR, camera=toy_camera(), seed=0)
    _, man_b = build_manifest(corpus, out_b, per_model_views=2,
                              detector_config=TOY_DETECTOR, camera=toy_camera(), seed=0)
    assert man_a.read_bytes() == man_b.read_bytes()
    meta, records = read_manifest(man_a)
    for rel in (records[0].normal_map_path, records[0].label_map_path):
        assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes()


def test_split_stable_under_view_count_change(tmp_path):
    corpus = tmp_path / "corpus"
    make_corpus(corpus)
    rec1, _ = build_manifest(corpus, tmp_path / "o1", per_model_views=1,
                             detector_config=TOY_DETECTOR, camera=toy_camera(), seed=7)
    rec3, _ = build_manifest(corpus, tmp_path / "o3", per_model_views=3,
                             detector_config=TOY_DETECTOR, camera=toy_camera(), seed=7)
    split1 = {r.model_id: r.split for r in rec1}
    split3 = {r.model_id: r.split for r in rec3}
    assert split1 == split3
    assert len(rec1) == 4 and len(rec3) == 12


def test_unreadable_obj_skipped_with_reason(tmp_path, caplog):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, models=2)
    (corpus / "airplane" / "broken.obj").write_text("v 0 0 zero\nf 1 2 3\n")
    with caplog.at_level(logging.WARNING):
        records, _ = build_manifest(corpus, tmp_path / "out", per_model_views=1,
                                    detector_config=TOY_DETECTOR, camera=toy_camera(), seed=0)
    assert {r.model_id for r in records} == {"model0", "model1"}
    assert any("broken.obj" in m for m in caplog.messages)


def test_model_cap(tmp_path):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, models=5)
    records, _ = build_manifest(corpus, tmp_path / "out", per_model_views=1,
                                detector_config=TOY_DETECTOR, camera=toy_camera(),
                                seed=0, max_models_per_category=3)
    assert len({r.model_id for r in records}) == 3
    splits = {r.model_id: r.split for r in records}
    assert sorted(splits.values()).count("train") == 2  # floor(0.75 * 3)


def test_manifest_roundtrip_preserves_pose_and_labels(tmp_path):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, models=1)
    records, manifest_path = build_manifest(
        corpus, tmp_path / "out", per_model_views=3,
        detector_config=TOY_DETECTOR, camera=toy_camera(), seed=0)
    _, again = read_manifest(manifest_path)
    for a, b in zip(records, again):
        assert a.pose.azimuth_deg == b.pose.azimuth_deg
        assert a.pose.elevation_deg == b.pose.elevation_deg
        assert a.pose.cyclo_deg == b.pose.cyclo_deg
        assert np.array_equal(a.symmetry_label, b.symmetry_label)
        assert a.split == b.split and a.view_setting == b.view_setting


def test_manifest_rejects_malformed(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("model\tcat\n")
    from symnorm.errors import InputError
    with pytest.raises(InputError):
        read_manifest(path)


def test_write_manifest_header_shape(tmp_path):
    path = tmp_path / "manifest.tsv"
    write_manifest(path, [], fibonacci_codebook(10, HORIZONTAL_CIRCLE),
                   fibonacci_codebook(60, HEMISPHERE), "V_N")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#codebook:\t")
    assert lines[3].startswith("#fields:\tmodel_id\tcategory\tobj_path\tpose\t")
