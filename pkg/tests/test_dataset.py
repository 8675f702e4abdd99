import json
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osodeval.data import (
    BoundingBox,
    ClassTaxonomy,
    DatasetView,
    Detection,
    GroundTruthInstance,
    ImageInfo,
    RawPrediction,
    SplitSpec,
    apply_split,
    boxes_to_array,
    iou,
    iou_matrix,
    parse_detections,
    parse_ground_truth,
    parse_split,
    serialize_detections,
    serialize_ground_truth,
    serialize_raw_predictions,
    serialize_split,
    validate,
)
from osodeval.data.types import HeadKind, SplitProtocol, ValueKind
from osodeval.errors import ConfigurationError, ParseError, SchemaError

import synth

B = BoundingBox


def native_doc(**extra):
    doc = {
        "taxonomy": {"super_class": "Animal", "classes": ["Cat", "Dog"]},
        "images": [{"id": "a", "width": 100, "height": 100}, {"id": "b", "width": 50, "height": 50}],
        "annotations": [
            {"image_id": "a", "class": "Cat", "box": [0, 0, 10, 10]},
            {"image_id": "a", "class": "Dog", "box": [20, 20, 40, 40]},
            {"image_id": "b", "class": "Dog", "box": [1, 1, 5, 5]},
        ],
    }
    doc.update(extra)
    return doc


def encode(doc) -> bytes:
    return json.dumps(doc).encode("utf-8")


# -- boxes and IoU ------------------------------------------------------------


class TestBoundingBox:
    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            B(2, 0, 2, 1)
        with pytest.raises(ValueError):
            B(0, 3, 1, 1)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            B(0, 0, float("inf"), 1)
        with pytest.raises(ValueError):
            B(float("nan"), 0, 1, 1)

    def test_xywh(self):
        assert B.from_xywh(10, 20, 5, 4) == B(10, 20, 15, 24)
        assert B(0, 0, 3, 2).area == 6


class TestIoU:
    def test_identity(self):
        assert iou(B(0, 0, 2, 2), B(0, 0, 2, 2)) == 1.0

    def test_disjoint(self):
        assert iou(B(0, 0, 2, 2), B(3, 3, 4, 4)) == 0.0

    def test_touching_edges_are_disjoint(self):
        assert iou(B(0, 0, 2, 2), B(2, 0, 4, 2)) == 0.0

    def test_half_overlap(self):
        assert iou(B(0, 0, 2, 2), B(1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-15)

    def test_matrix_agrees_with_scalar(self):
        a = [B(0, 0, 2, 2), B(1, 1, 5, 4)]
        b = [B(1, 0, 3, 2), B(0, 0, 2, 2), B(10, 10, 11, 11)]
        m = iou_matrix(boxes_to_array(a), boxes_to_array(b))
        assert m.shape == (2, 3)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                assert m[i, j] == pytest.approx(iou(x, y), abs=1e-15)


coord = st.floats(-1e4, 1e4, allow_nan=False)
extent = st.floats(1e-3, 1e4, allow_nan=False)
boxes = st.builds(lambda x, y, w, h: B(x, y, x + w, y + h), coord, coord, extent, extent).filter(
    lambda b: b.x_max > b.x_min and b.y_max > b.y_min
)


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes)
def test_iou_self_is_one(a):
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


# -- parsing ------------------------------------------------------------------


class TestParseGroundTruth:
    def test_basic(self):
        view = parse_ground_truth(encode(native_doc()))
        assert len(view.instances) == 3
        assert view.taxonomy.classes == ("Cat", "Dog")
        assert [i.class_id for i in view.instances] == [0, 1, 1]
        assert [i.image_id for i in view.instances] == ["a", "a", "b"]

    def test_empty_annotations(self):
        view = parse_ground_truth(encode(native_doc(annotations=[])))
        assert view.instances == ()
        assert validate(view) == []

    def test_bad_box_names_record(self):
        doc = native_doc()
        doc["annotations"][1]["box"] = [5, 0, 5, 10]
        with pytest.raises(SchemaError, match=r"annotations\[1\]"):
            parse_ground_truth(encode(doc))

    def test_unknown_class(self):
        doc = native_doc()
        doc["annotations"][0]["class"] = "Horse"
        with pytest.raises(SchemaError, match="Horse"):
            parse_ground_truth(encode(doc))

    def test_duplicate_image(self):
        doc = native_doc()
        doc["images"].append({"id": "a"})
        with pytest.raises(SchemaError, match="duplicate"):
            parse_ground_truth(encode(doc))

    def test_malformed_reports_position(self):
        with pytest.raises(ParseError) as info:
            parse_ground_truth(b'{\n  "taxonomy": {,\n}')
        assert info.value.line == 2
        assert info.value.column is not None

    def test_group_annotations_dropped(self, caplog):
        doc = native_doc()
        doc["annotations"][2]["group_of"] = True
        with caplog.at_level(logging.WARNING):
            view = parse_ground_truth(encode(doc))
        assert len(view.instances) == 2
        assert "group-of" in caplog.text

    def test_round_trip(self):
        view = parse_ground_truth(encode(native_doc()))
        assert parse_ground_truth(serialize_ground_truth(view)) == view

    def test_round_trip_with_split(self):
        base = synth.dataset(40, 5, seed=3)
        split = SplitSpec(frozenset({0, 1}), frozenset({2}), test_images=("img00001", "img00002"), name="s")
        view = DatasetView(base.taxonomy, base.images, base.instances, split)
        again = parse_ground_truth(serialize_ground_truth(view))
        assert again == view


class TestCocoImport:
    def test_conversion(self):
        doc = {
            "images": [{"id": 7, "width": 100, "height": 80}],
            "categories": [
                {"id": 3, "name": "Car", "supercategory": "Vehicle"},
                {"id": 1, "name": "Bus", "supercategory": "Vehicle"},
            ],
            "annotations": [
                {"id": 1, "image_id": 7, "category_id": 1, "bbox": [10, 20, 30, 40]},
                {"id": 2, "image_id": 7, "category_id": 3, "bbox": [0, 0, 5, 5], "iscrowd": 1},
                {"id": 3, "image_id": 7, "category_id": 3, "bbox": [1, 2, 3, 4], "iscrowd": 0},
            ],
        }
        view = parse_ground_truth(encode(doc), "coco")
        assert view.taxonomy.super_class == "Vehicle"
        assert view.taxonomy.classes == ("Car", "Bus")
        assert view.images[0].image_id == "7"
        assert [(i.class_id, i.box) for i in view.instances] == [(1, B(10, 20, 40, 60)), (0, B(1, 2, 4, 6))]


class TestParseDetections:
    tax = ClassTaxonomy("Animal", ("Cat", "Dog", "Fox"))

    def test_labeled_unknown_case_insensitive(self):
        doc = {"detections": [{"image_id": "a", "box": [0, 0, 1, 1], "label": "UnKnown", "score": 0.42}]}
        (d,) = parse_detections(encode(doc), "labeled", self.tax)
        assert d.is_unknown and d.score == 0.42

    def test_labeled_negative_score(self):
        doc = {"detections": [{"image_id": "a", "box": [0, 0, 1, 1], "label": "Cat", "score": -0.1}]}
        with pytest.raises(SchemaError):
            parse_detections(encode(doc), "labeled", self.tax)

    def test_labeled_round_trip(self):
        dets = [Detection("a", B(0, 0, 1, 1), 2, 0.5), Detection("b", B(1, 1, 3, 3), None, 1.7)]
        assert parse_detections(serialize_detections(dets, self.tax), "labeled", self.tax) == dets

    def test_raw_length_checked(self):
        tax = synth.taxonomy(24)
        good = {"detections": [{"image_id": "a", "box": [0, 0, 1, 1], "scores": [0.01] * 24}]}
        bad = {"detections": [{"image_id": "a", "box": [0, 0, 1, 1], "scores": [0.01] * 23}]}
        (p,) = parse_detections(encode(good), "raw", tax)
        assert len(p.scores) == 24
        with pytest.raises(SchemaError, match="length 23"):
            parse_detections(encode(bad), "raw", tax)

    def test_raw_respects_known_subset(self):
        doc = {"value_kind": "logits", "head_kind": "softmax",
               "detections": [{"image_id": "a", "box": [0, 0, 1, 1], "scores": [3.0, -1.0]}]}
        (p,) = parse_detections(encode(doc), "raw", self.tax, known_classes=[2, 0])
        assert p.value_kind is ValueKind.LOGITS and p.head_kind is HeadKind.SOFTMAX

    def test_raw_round_trip(self):
        preds = [RawPrediction("a", B(0, 0, 1, 1), (0.2, 0.7), ValueKind.PROBABILITIES, HeadKind.SOFTMAX)]
        data = serialize_raw_predictions(preds, self.tax, [0, 2])
        assert parse_detections(data, "raw", self.tax, [0, 2]) == preds

    def test_probability_range(self):
        with pytest.raises(ValueError):
            RawPrediction("a", B(0, 0, 1, 1), (1.2, 0.1), ValueKind.PROBABILITIES)
        with pytest.raises(ValueError):
            RawPrediction("a", B(0, 0, 1, 1), (0.7, 0.6), ValueKind.PROBABILITIES, HeadKind.SOFTMAX)
        # Sigmoid probabilities need not sum to one.
        RawPrediction("a", B(0, 0, 1, 1), (0.7, 0.6), ValueKind.PROBABILITIES, HeadKind.SIGMOID)


def test_split_document_round_trip():
    tax = synth.taxonomy(6)
    split = SplitSpec(
        frozenset({0, 3}), frozenset({1, 5}), ("x",), ("y",), ("z", "w"), name="U1",
        provenance={"method": "random", "seed": 4},
    )
    again = parse_split(serialize_split(split, tax), tax)
    assert again == split
    assert again.provenance == {"method": "random", "seed": 4}


def test_split_rejects_overlap():
    with pytest.raises(ValueError):
        SplitSpec(frozenset({0, 1}), frozenset({1}))
    with pytest.raises(ValueError):
        SplitSpec(frozenset({0}), frozenset({1}), train_images=("a",), test_images=("a",))


# -- validate -----------------------------------------------------------------


class TestValidate:
    def view(self, images, instances):
        return DatasetView(ClassTaxonomy("S", ("p", "q")), images, instances)

    def test_valid(self):
        v = self.view([ImageInfo("a", 10, 10)], [GroundTruthInstance("a", B(0, 0, 5, 5), 1)])
        assert validate(v) == []

    def test_duplicate_image(self):
        v = self.view([ImageInfo("a"), ImageInfo("a")], [])
        (d,) = validate(v)
        assert d.severity == "error"

    def test_out_of_bounds_is_warning(self):
        v = self.view([ImageInfo("a", 10, 10)], [GroundTruthInstance("a", B(0, 0, 11, 5), 0)])
        (d,) = validate(v)
        assert d.severity == "warning"

    def test_missing_image_and_bad_class(self):
        v = self.view([ImageInfo("a")], [GroundTruthInstance("z", B(0, 0, 1, 1), 0),
                                         GroundTruthInstance("a", B(0, 0, 1, 1), 5)])
        assert [d.severity for d in validate(v)] == ["error", "error"]

    @pytest.mark.parametrize("protocol,n_errors", [(SplitProtocol.KEEP, 0), (SplitProtocol.DROP, 1)])
    def test_unknown_in_train_image(self, protocol, n_errors):
        insts = [GroundTruthInstance("a", B(0, 0, 5, 5), 0), GroundTruthInstance("a", B(5, 5, 9, 9), 1)]
        split = SplitSpec(frozenset({0}), frozenset({1}), train_images=("a",), provenance={"protocol": protocol.value})
        v = DatasetView(ClassTaxonomy("S", ("p", "q")), [ImageInfo("a", 10, 10)], insts, split)
        assert len(validate(v)) == n_errors

    def test_train_image_without_known(self):
        split = SplitSpec(frozenset({0}), frozenset({1}), train_images=("a",))
        v = DatasetView(ClassTaxonomy("S", ("p", "q")), [ImageInfo("a", 10, 10)],
                        [GroundTruthInstance("a", B(0, 0, 5, 5), 1)], split)
        (d,) = validate(v)
        assert "no known-class instance" in d.message


# -- apply_split ----------------------------------------------------------------


def mixed_view():
    tax = ClassTaxonomy("Animal", ("known", "unknown", "other"))
    images = [ImageInfo(i) for i in ("mixed", "only_unk", "only_known", "val1", "test1", "test_other")]
    inst = [
        GroundTruthInstance("mixed", B(0, 0, 1, 1), 0),
        GroundTruthInstance("mixed", B(2, 2, 3, 3), 1),
        GroundTruthInstance("only_unk", B(0, 0, 1, 1), 1),
        GroundTruthInstance("only_known", B(0, 0, 1, 1), 0),
        GroundTruthInstance("only_known", B(1, 1, 2, 2), 2),
        GroundTruthInstance("val1", B(0, 0, 1, 1), 0),
        GroundTruthInstance("val1", B(0, 0, 2, 2), 2),
        GroundTruthInstance("test1", B(0, 0, 1, 1), 1),
        GroundTruthInstance("test_other", B(0, 0, 1, 1), 2),
    ]
    split = SplitSpec(
        frozenset({0}), frozenset({1}),
        train_images=("mixed", "only_unk", "only_known"), val_images=("val1",), test_images=("test1", "test_other"),
    )
    return DatasetView(tax, images, inst), split


class TestApplySplit:
    def test_keep_protocol(self):
        view, split = mixed_view()
        out = apply_split(view, split, SplitProtocol.KEEP)
        assert out.split.train_images == ("mixed", "only_known")
        assert [i.class_id for i in out.instances_by_image["mixed"]] == [0]
        assert [i.class_id for i in out.instances_by_image["only_known"]] == [0]
        assert out.split.provenance["removed_unknown_train_annotations"] == 1

    def test_drop_protocol(self):
        view, split = mixed_view()
        out = apply_split(view, split, "drop")
        assert out.split.train_images == ("only_known",)
        assert out.split.provenance["protocol"] == SplitProtocol.DROP.value

    def test_unknown_only_image_goes_nowhere_in_train(self):
        view, split = mixed_view()
        for protocol in SplitProtocol:
            assert "only_unk" not in apply_split(view, split, protocol).split.train_images

    def test_val_and_test_keep_known_and_unknown(self):
        view, split = mixed_view()
        out = apply_split(view, split)
        assert [i.class_id for i in out.instances_by_image["val1"]] == [0]
        assert out.split.test_images == ("test1",)
        assert [i.class_id for i in out.instances_by_image["test1"]] == [1]

    def test_empty_train_is_error(self):
        view, split = mixed_view()
        only_unknown = SplitSpec(split.known_classes, split.unknown_classes, train_images=("only_unk",))
        with pytest.raises(ConfigurationError):
            apply_split(view, only_unknown)

    def test_stray_class_is_error(self):
        view, _ = mixed_view()
        with pytest.raises(ConfigurationError):
            apply_split(view, SplitSpec(frozenset({0}), frozenset({9}), train_images=("only_known",)))


@st.composite
def split_cases(draw):
    seed = draw(st.integers(0, 10_000))
    n_classes = draw(st.integers(3, 8))
    base = synth.dataset(draw(st.integers(5, 40)), n_classes, seed)
    perm = draw(st.permutations(range(n_classes)))
    n_known = draw(st.integers(1, n_classes - 1))
    n_unknown = draw(st.integers(1, n_classes - n_known))
    known, unknown = frozenset(perm[:n_known]), frozenset(perm[n_known:n_known + n_unknown])
    ids = [img.image_id for img in base.images]
    subset = [draw(st.sampled_from("tvx")) for _ in ids]
    split = SplitSpec(
        known, unknown,
        tuple(i for i, s in zip(ids, subset) if s == "t"),
        tuple(i for i, s in zip(ids, subset) if s == "v"),
        tuple(i for i, s in zip(ids, subset) if s == "x"),
    )
    return base, split, draw(st.sampled_from(list(SplitProtocol)))


@settings(max_examples=150, deadline=None)
@given(split_cases())
def test_apply_split_idempotent_and_pure(case):
    base, split, protocol = case
    try:
        once = apply_split(base, split, protocol)
    except ConfigurationError:
        return
    twice = apply_split(once, once.split, protocol)
    assert twice == once
    train = set(once.split.train_images)
    for inst in once.instances:
        if inst.image_id in train:
            assert inst.class_id in split.known_classes
        else:
            assert inst.class_id in split.evaluated_classes
    assert [d for d in validate(once) if d.severity == "error"] == []
