import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_pareto
from stopeval import dataset, sweep
from stopeval.evaluator import StopVerdict, aggregate
from stopeval.stereo import StereoParams


@pytest.fixture(scope="module")
def ds(tiny_dataset):
    return dataset.Dataset.open(tiny_dataset)


def _pt(tpr, fpr, **a):
    return sweep.SweepPoint(a or {"k": 0}, tpr, fpr, {})


def test_name_resolution():
    assert sweep.resolve_name("block_size") == ("stereo", "block_size")
    assert sweep.resolve_name("detector.min_area_cells") == ("detector", "min_area_cells")
    assert sweep.resolve_name("source") == ("pipeline", "source")
    for bad in ("nope", "stereo.tilt_allowance_deg", "x.block_size"):
        with pytest.raises(sweep.ConfigError):
            sweep.resolve_name(bad)


def test_overrides():
    p = sweep.apply_overrides(sweep.PipelineParams(), ["block_size=5", "tilt_allowance_deg=2.5", "source=depth"])
    assert p.stereo.block_size == 5 and p.detector.tilt_allowance_deg == 2.5 and p.source == "depth"
    for bad in (["block_size"], ["block_size=4"], ["source=lidar"]):
        with pytest.raises(sweep.ConfigError):
            sweep.apply_overrides(sweep.PipelineParams(), bad)


def test_params_dict_roundtrip():
    p = sweep.PipelineParams(StereoParams(block_size=7), source="depth")
    assert sweep.PipelineParams.from_dict(p.to_dict()) == p
    with pytest.raises(sweep.ConfigError):
        sweep.PipelineParams.from_dict({"sterio": {}})


def test_grid_is_cartesian():
    g = sweep.ParameterGrid({"block_size": [5, 7], "min_area_cells": [3, 4, 5]})
    assert len(g) == 6 and g.names == ["block_size", "min_area_cells"]
    assigns = g.assignments()
    assert len({tuple(a.items()) for a in assigns}) == 6
    assert assigns[0] == {"block_size": 5, "min_area_cells": 3} and assigns[1] == {"block_size": 5, "min_area_cells": 4}


def test_grid_validation():
    with pytest.raises(sweep.ConfigError):
        sweep.ParameterGrid({"block_size": []})
    with pytest.raises(sweep.ConfigError):
        sweep.ParameterGrid({"not_a_parameter": [1]})


def test_single_point_equals_direct_evaluation(ds):
    base = sweep.PipelineParams(source="depth")
    pts = sweep.run_sweep(ds, sweep.ParameterGrid({"min_area_cells": [3]}), base)
    s = aggregate(sweep.evaluate_dataset(ds, base))
    assert (pts[0].tpr, pts[0].fpr) == (s.tpr, s.fpr)
    assert pts[0].counts == s.counts


def test_cache_does_not_change_results(ds):
    grid = sweep.ParameterGrid({"max_disparity": [32, 48], "tilt_allowance_deg": [2.0, 10.0]})
    a = sweep.run_sweep(ds, grid, cache=True)
    b = sweep.run_sweep(ds, grid, cache=False)
    assert [(p.assignment, p.tpr, p.fpr, p.counts) for p in a] == [(p.assignment, p.tpr, p.fpr, p.counts) for p in b]


def test_axis_order_does_not_matter(ds):
    base = sweep.PipelineParams(source="depth")
    g1 = sweep.ParameterGrid({"min_area_cells": [1, 6], "cutoff_height_m": [0.3, 0.6]})
    g2 = sweep.ParameterGrid({"cutoff_height_m": [0.3, 0.6], "min_area_cells": [1, 6]})
    key = lambda pts: {tuple(sorted(p.assignment.items())): (p.tpr, p.fpr) for p in pts}  # noqa: E731
    assert key(sweep.run_sweep(ds, g1, base)) == key(sweep.run_sweep(ds, g2, base))


def test_frontier_examples():
    a, b, c = _pt(0.5, 0.0, k=1), _pt(0.9, 0.1, k=2), _pt(0.4, 0.2, k=3)
    assert sweep.pareto_frontier([a]) == [a]
    assert sweep.pareto_frontier([c, b, a]) == [a, b]
    assert sweep.pareto_frontier([_pt(None, None)]) == []


def test_selection_and_infeasible():
    a, b = _pt(0.677, 0.0, k=1), _pt(0.8, 0.05, k=2)
    assert sweep.select_operating_point([a, b], 0.0) is a
    assert sweep.select_operating_point([a, b], 0.1) is b
    assert isinstance(sweep.select_operating_point([b], 0.01), sweep.Infeasible)
    with pytest.raises(ValueError):
        sweep.select_operating_point([], 0.1)


def test_tie_break_is_lexicographic():
    a, b = _pt(0.9, 0.0, k=2), _pt(0.9, 0.0, k=1)
    assert sweep.select_operating_point([a, b], 0.02) is b


@st.composite
def point_sets(draw):
    n = draw(st.integers(1, 40))
    grid = st.sampled_from([i / 10 for i in range(11)])
    return [
        _pt(draw(st.one_of(grid, st.none())), draw(grid), k=i) for i in range(n)
    ]


@settings(max_examples=100, deadline=None)
@given(point_sets())
def test_frontier_matches_naive(points):
    points = [p if p.tpr is not None else sweep.SweepPoint(p.assignment, None, None, {}) for p in points]
    fast = sweep.pareto_frontier(points)
    assert {id(p) for p in fast} == {id(p) for p in naive_pareto(points)}
    assert [p.fpr for p in fast] == sorted(p.fpr for p in fast)
    assert all(x.tpr <= y.tpr for x, y in itertools.pairwise(fast))
    assert sweep.pareto_frontier(fast) == fast
    for max_fpr in (0.0, 0.3, 1.0):
        sel = sweep.select_operating_point(points, max_fpr)
        if not isinstance(sel, sweep.Infeasible):
            assert any(sel is p for p in fast)


def test_sweep_csv_roundtrip():
    pts = [
        sweep.SweepPoint({"block_size": 9, "source": "depth"}, 0.8, 0.0, {StopVerdict.TRUE_POSITIVE: 4, StopVerdict.FALSE_NEGATIVE: 1}),
        sweep.SweepPoint({"block_size": 11, "source": "depth"}, None, None, {}),
    ]
    back = sweep.read_sweep_csv(sweep.sweep_csv(pts))
    assert [(p.assignment, p.tpr, p.fpr) for p in back] == [(p.assignment, p.tpr, p.fpr) for p in pts]
    assert back[0].counts[StopVerdict.TRUE_POSITIVE] == 4


def test_sweep_config():
    cfg = sweep.SweepConfig.from_dict({"axes": {"block_size": [5, 7]}, "max_fpr": 0.05, "base_params": {"source": "depth"}})
    assert len(cfg.grid) == 2 and cfg.max_fpr == 0.05 and cfg.base.source == "depth"
    with pytest.raises(sweep.ConfigError):
        sweep.SweepConfig.from_dict({"axes": {"bogus": [1]}})
    with pytest.raises(sweep.ConfigError):
        sweep.SweepConfig.from_dict({})


def test_invalid_grid_value_fails_before_work(ds):
    with pytest.raises(sweep.ConfigError):
        sweep.run_sweep(ds, sweep.ParameterGrid({"block_size": [5, 4]}))
