import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import Det, brute_force_match, corridor_label_cases, random_frame, stop_rule
from stopeval import evaluator as ev
from stopeval.evaluator import Label, StopVerdict
from stopeval.geometry import CameraRig, project_level

RIG = CameraRig.reference_rig(320, 256)


# -- depth condition ---------------------------------------------------------


def test_depth_condition_boundary_is_strict():
    assert not ev.depth_condition(10, 12.5)
    assert ev.depth_condition(10, 12.4999)
    assert ev.depth_condition(10, 7.5001) and not ev.depth_condition(10, 7.5)


def test_depth_condition_rejects_nonpositive():
    with pytest.raises(ValueError):
        ev.depth_condition(0, 1)
    with pytest.raises(ValueError):
        ev.depth_condition(1, -1)


@given(st.floats(0.1, 100), st.floats(0.1, 100), st.sampled_from([0.5, 2.0, 4.0, 0.25]))
def test_depth_condition_scale_invariant(zr, ze, k):
    # powers of two keep the products exact
    assert ev.depth_condition(zr, ze) == ev.depth_condition(k * zr, k * ze)


# -- planar predicates --------------------------------------------------------


def test_rect_touching_counts_as_intersecting():
    assert ev.rects_intersect((0, 0, 1, 1), (1, 0, 2, 1))
    assert ev.rects_intersect((0, 0, 1, 1), (1, 1, 2, 2))
    assert not ev.rects_intersect((0, 0, 1, 1), (1.0001, 0, 2, 1))


def test_rect_polygon_cases():
    tri = ((0, 0), (10, 0), (0, 10))
    assert ev.rect_intersects_polygon((1, 1, 2, 2), tri)  # inside
    assert ev.rect_intersects_polygon((-5, -5, 20, 20), tri)  # contains polygon
    assert ev.rect_intersects_polygon((5, 5, 8, 8), tri)  # touches the hypotenuse at (5, 5)
    assert not ev.rect_intersects_polygon((6, 6, 8, 8), tri)


def test_polygon_must_be_simple():
    with pytest.raises(ValueError):
        ev.IndifferenceZone(((0, 0), (1, 1), (1, 0), (0, 1)))  # bow tie
    with pytest.raises(ValueError):
        ev.IndifferenceZone(((0, 0), (1, 1)))


def test_marked_validation():
    with pytest.raises(ValueError):
        ev.MarkedObstacle((0, 0, 0, 5), 3.0)
    with pytest.raises(ValueError):
        ev.MarkedObstacle((0, 0, 1, 1), 0.0)


# -- matching -----------------------------------------------------------------


def test_match_many_to_many():
    ann = ev.FrameAnnotation("f", (ev.MarkedObstacle((0, 0, 10, 10), 5.0), ev.MarkedObstacle((5, 0, 15, 10), 5.0)))
    dets = [Det((8, 2, 9, 3), 5.1)]
    lab = ev.match_frame(ann, dets)
    assert lab.marked == [Label.TP, Label.TP]
    assert lab.detected == [Label.TP]
    assert lab.detected_partners == [[0, 1]]


def test_absorption_only_for_unmatched():
    zone = ev.IndifferenceZone(((0, 0), (20, 0), (20, 20), (0, 20)))
    ann = ev.FrameAnnotation("f", (ev.MarkedObstacle((0, 0, 4, 4), 5.0),), (zone,))
    dets = [Det((1, 1, 2, 2), 5.0), Det((10, 10, 12, 12), 5.0), Det((30, 30, 32, 32), 5.0)]
    assert ev.match_frame(ann, dets).detected == [Label.TP, Label.ABSORBED, Label.FP]


def test_match_agrees_with_brute_force_sample():
    rng = np.random.default_rng(123)
    for _ in range(200):
        ann, dets = random_frame(rng)
        lab = ev.match_frame(ann, dets)
        assert (lab.marked, lab.detected) == brute_force_match(ann.marked, dets, ann.indifference, 0.25)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.randoms())
def test_match_order_independent(seed, rnd):
    ann, dets = random_frame(np.random.default_rng(seed))
    lab = ev.match_frame(ann, dets)
    mi = list(range(len(ann.marked)))
    di = list(range(len(dets)))
    rnd.shuffle(mi)
    rnd.shuffle(di)
    ann2 = ev.FrameAnnotation("f", tuple(ann.marked[i] for i in mi), ann.indifference)
    lab2 = ev.match_frame(ann2, [dets[j] for j in di])
    assert [lab2.marked[mi.index(i)] for i in range(len(mi))] == lab.marked
    assert [lab2.detected[di.index(j)] for j in range(len(di))] == lab.detected


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_every_object_gets_exactly_one_label(seed):
    ann, dets = random_frame(np.random.default_rng(seed))
    lab = ev.match_frame(ann, dets)
    assert all(x in (Label.TP, Label.FN) for x in lab.marked)
    assert all(x in (Label.TP, Label.FP, Label.ABSORBED) for x in lab.detected)
    assert len(lab.marked) == len(ann.marked) and len(lab.detected) == len(dets)


# -- stop classification --------------------------------------------------------


def test_truth_table():
    cases = list(corridor_label_cases())
    assert len(cases) == 64
    for labels in cases:
        assert ev.classify_stop(labels) is stop_rule(labels), labels


@pytest.mark.parametrize(
    "labels,verdict",
    [
        ([Label.TP, Label.FP], StopVerdict.TRUE_POSITIVE),
        ([Label.FP], StopVerdict.FALSE_POSITIVE),
        ([Label.FN], StopVerdict.FALSE_NEGATIVE),
        ([Label.FN, Label.FP], StopVerdict.FALSE_NEGATIVE),
        ([], StopVerdict.TRUE_NEGATIVE),
    ],
)
def test_classify_examples(labels, verdict):
    assert ev.classify_stop(labels) is verdict


def _marked_at(x0, x1, z, h=1.0):
    u0, vt = project_level(RIG, x0, h, z)
    u1, vb = project_level(RIG, x1, 0.0, z)
    return ev.MarkedObstacle((float(u0), float(vt), float(u1), float(vb)), z)


def test_corridor_filters_marked_by_footprint():
    inside = _marked_at(-0.5, 0.5, 4.0)
    beside = _marked_at(2.0, 3.0, 4.0)
    beyond = _marked_at(-0.5, 0.5, 8.0)
    ann = ev.FrameAnnotation("f", (inside, beside, beyond))
    r = ev.evaluate_frame(ann, [], RIG)
    assert r.corridor_labels == [Label.FN]
    assert r.verdict is StopVerdict.FALSE_NEGATIVE
    assert ev.marked_footprint(inside, RIG)[:2] == pytest.approx((-0.5, 0.5))


def test_corridor_edge_is_closed():
    c = ev.DrivingCorridor(2.5, 7.0)
    assert ev.in_corridor(1.25, 2.0, 7.0, c)
    assert not ev.in_corridor(1.26, 2.0, 3.0, c)
    assert not ev.in_corridor(0.0, 0.1, 7.01, c)


def test_fp_outside_corridor_ignored():
    ann = ev.FrameAnnotation("f", ())
    far = Det((0, 0, 5, 5), 9.0, -0.2, 0.2)
    side = Det((0, 0, 5, 5), 3.0, 2.0, 2.5)
    assert ev.evaluate_frame(ann, [far, side], RIG).verdict is StopVerdict.TRUE_NEGATIVE
    near = Det((0, 0, 5, 5), 3.0, -0.2, 0.2)
    assert ev.evaluate_frame(ann, [near], RIG).verdict is StopVerdict.FALSE_POSITIVE


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 2.5), st.floats(0.5, 7.0))
def test_shrinking_corridor_never_creates_fp_stop(seed, w, length):
    rng = np.random.default_rng(seed)
    ann, dets = random_frame(rng)
    for d in dets:
        d.x_left = float(rng.uniform(-3, 2))
        d.x_right = d.x_left + float(rng.uniform(0.1, 1.5))
    big = ev.DrivingCorridor(2.5, 7.0)
    small = ev.DrivingCorridor(min(w, 2.5), min(length, 7.0))
    a_big = ev.FrameAnnotation("f", ann.marked, ann.indifference, big)
    a_small = ev.FrameAnnotation("f", ann.marked, ann.indifference, small)
    if ev.evaluate_frame(a_big, dets, RIG).verdict is StopVerdict.TRUE_NEGATIVE:
        assert ev.evaluate_frame(a_small, dets, RIG).verdict is not StopVerdict.FALSE_POSITIVE


# -- aggregation and files -----------------------------------------------------------


def test_aggregate_examples():
    v = [StopVerdict.TRUE_POSITIVE] * 8 + [StopVerdict.FALSE_NEGATIVE] * 2 + [StopVerdict.TRUE_NEGATIVE] * 10
    s = ev.aggregate(v)
    assert (s.tpr, s.fpr) == (0.8, 0.0)
    s = ev.aggregate([StopVerdict.TRUE_NEGATIVE] * 3)
    assert s.tpr is None and s.fpr == 0.0
    with pytest.raises(ValueError):
        ev.aggregate([])


@given(st.lists(st.sampled_from(list(StopVerdict)), min_size=1, max_size=40), st.randoms())
def test_aggregate_permutation_invariant(verdicts, rnd):
    s = ev.aggregate(verdicts)
    shuffled = list(verdicts)
    rnd.shuffle(shuffled)
    assert ev.aggregate(shuffled) == s


def _result(fid, verdict):
    return ev.FrameResult(fid, ev.FrameLabels([], [], [], []), [], verdict)


def test_report_roundtrip_three_decimal_rates():
    # 0.822 = 37/45 is not exact in binary; the repr survives the CSV
    res = [_result(f"f{i}", StopVerdict.TRUE_POSITIVE) for i in range(37)]
    res += [_result(f"g{i}", StopVerdict.FALSE_NEGATIVE) for i in range(8)]
    res += [_result(f"h{i}", StopVerdict.TRUE_NEGATIVE) for i in range(89)]
    res += [_result("k", StopVerdict.FALSE_POSITIVE)]
    text = ev.report_csv(res)
    rows, summary = ev.read_report_csv(text)
    assert len(rows) == len(res)
    assert summary == ev.aggregate(res)
    assert round(summary.tpr, 3) == 0.822 and round(summary.fpr, 3) == 0.011


def test_undefined_rate_roundtrip():
    text = ev.report_csv([_result("a", StopVerdict.TRUE_NEGATIVE)])
    assert "undefined" in text
    _, s = ev.read_report_csv(text)
    assert s.tpr is None


def test_annotation_roundtrip(tmp_path):
    zone = ev.IndifferenceZone(((0, 0), (4, 0), (2, 3)))
    ann = ev.AnnotationSet(
        (ev.FrameAnnotation("a", (ev.MarkedObstacle((1, 2, 3, 4), 5.5),), (zone,)), ev.FrameAnnotation("b")),
        ev.DrivingCorridor(),
        ev.MatchConfig(0.3),
    )
    ev.save_annotations(tmp_path / "a.json", ann)
    back = ev.load_annotations(tmp_path / "a.json")
    assert back == ann


@pytest.mark.parametrize(
    "doc,where",
    [
        ({"frames": [{"frame_id": "a", "marked": [{"rect_px": [0, 0, 1, 1]}]}]}, "frames[0].marked[0]: missing field 'z_ref_m'"),
        ({"frames": [{"frame_id": "a", "marked": [{"rect_px": [0, 0, 0, 1], "z_ref_m": 2}]}]}, "frames[0].marked[0]"),
        ({"frames": [{"marked": []}]}, "frames[0]: missing field 'frame_id'"),
        ({"frames": [{"frame_id": "a", "indifference": [{"polygon_px": [[0, 0], [1, 1]]}]}]}, "frames[0].indifference[0]"),
        ({"frames": [{"frame_id": "a"}, {"frame_id": "a"}]}, "duplicate"),
        ({"frames": [], "match": {"T": 2}}, "match"),
    ],
)
def test_annotation_errors_name_the_field(tmp_path, doc, where):
    p = tmp_path / "a.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ev.AnnotationError, match=where.replace("[", r"\[").replace("]", r"\]")):
        ev.load_annotations(p)


def test_annotation_json_error_has_position(tmp_path):
    p = tmp_path / "a.json"
    p.write_text('{"frames": [}')
    with pytest.raises(ev.AnnotationError, match="line 1 column"):
        ev.load_annotations(p)
