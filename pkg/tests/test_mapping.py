import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionfc.errors import DegenerateLane, UnknownObjectType
from motionfc.geometry import Pose2, to_agent_frame
from motionfc.mapping import (Lane, LaneSegment, MapQueryConfig, VectorMap, build_index, lane_features,
                              point_polyline_distance, query_segments, split_map)


def _lane(n, lane_id="l"):
    return Lane(lane_id, np.stack([np.arange(n, dtype=float), np.zeros(n)], axis=1))


def test_split_exact_fit():
    segs = split_map(VectorMap((_lane(10),)), 10)
    assert len(segs) == 1
    np.testing.assert_array_equal(segs[0].points, _lane(10).points)


def test_split_shares_boundary_point():
    lane = _lane(19)
    segs = split_map(VectorMap((lane,)), 10)
    assert [len(s.points) for s in segs] == [10, 10]
    np.testing.assert_array_equal(segs[0].points[-1], lane.points[9])
    np.testing.assert_array_equal(segs[1].points[0], lane.points[9])


def test_split_empty_map():
    assert split_map(VectorMap(()), 10) == []


def test_split_degenerate():
    with pytest.raises(DegenerateLane):
        split_map(VectorMap((Lane("x", np.zeros((1, 2))),)), 10)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(2, 60), min_size=1, max_size=5), st.integers(2, 12))
def test_split_reconstruction(lengths, p_max):
    rng = np.random.default_rng(sum(lengths) + p_max)
    lanes = tuple(Lane(f"l{i}", np.cumsum(rng.uniform(0.5, 2, size=(n, 2)), axis=0)) for i, n in enumerate(lengths))
    segs = split_map(VectorMap(lanes), p_max)
    for lane in lanes:
        parts = [s.points for s in segs if s.source_lane_id == lane.lane_id]
        assert all(2 <= len(p) <= p_max for p in parts)
        rebuilt = np.concatenate([parts[0]] + [p[1:] for p in parts[1:]])
        np.testing.assert_array_equal(rebuilt, lane.points)


def _random_segments(rng, n):
    segs = []
    for i in range(n):
        start = rng.uniform(-200, 200, size=2)
        pts = start + np.cumsum(rng.normal(0, 3, size=(int(rng.integers(2, 11)), 2)), axis=0)
        segs.append(LaneSegment(f"s{i:03d}", pts, f"l{i}"))
    return segs


def _brute(segs, center, radius):
    hits = [(point_polyline_distance(center, s.points), s.segment_id) for s in segs]
    return sorted((d, sid) for d, sid in hits if d <= radius)


def _oracle_distance(p, pts):
    # independent: dense sampling is not exact, so use the projection formula per edge in plain python
    best = math.inf
    for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
        vx, vy = bx - ax, by - ay
        L2 = vx * vx + vy * vy
        t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * vx + (p[1] - ay) * vy) / L2))
        best = min(best, math.hypot(p[0] - (ax + t * vx), p[1] - (ay + t * vy)))
    return best


def test_point_polyline_distance_oracle():
    rng = np.random.default_rng(1)
    for seg in _random_segments(rng, 30):
        p = rng.uniform(-200, 200, size=2)
        assert point_polyline_distance(p, seg.points) == pytest.approx(_oracle_distance(p, seg.points), abs=1e-9)


def test_index_empty():
    idx = build_index([])
    assert idx.query_box(-1e3, -1e3, 1e3, 1e3) == []
    assert idx.query_disc((0, 0), 1e3) == []


def test_index_single_segment_box_touch():
    seg = LaneSegment("a", np.array([[0.0, 0.0], [10.0, 5.0]]), "l")
    idx = build_index([seg])
    assert idx.query_box(10.0, 5.0, 20.0, 20.0) == [seg]
    assert idx.query_box(-5.0, -5.0, 0.0, 0.0) == [seg]
    assert idx.query_box(10.1, 5.1, 20.0, 20.0) == []


def test_index_matches_linear_scan():
    rng = np.random.default_rng(2)
    segs = _random_segments(rng, 100)
    idx = build_index(segs, cell_size=17.0)
    for _ in range(50):
        c = rng.uniform(-220, 220, size=2)
        r = rng.uniform(1, 80)
        got = [(d, s.segment_id) for d, s in idx.query_disc(c, r)]
        assert got == _brute(segs, c, r)


def test_query_segments_soundness_200():
    rng = np.random.default_rng(3)
    segs = _random_segments(rng, 120)
    cfg = MapQueryConfig()
    idx = build_index(segs)
    for _ in range(200):
        c = rng.uniform(-220, 220, size=2)
        otype = ["vehicle", "bus", "pedestrian", "cyclist", "motorcyclist"][int(rng.integers(5))]
        got = [s.segment_id for s in query_segments(idx, c, otype, cfg)]
        assert got == [sid for _, sid in _brute(segs, c, cfg.radius(otype))]


def test_query_on_segment_point_first():
    segs = [LaneSegment("b", np.array([[0.0, 0.0], [1.0, 0.0]]), "l"),
            LaneSegment("a", np.array([[5.0, 5.0], [6.0, 5.0]]), "l")]
    out = query_segments(build_index(segs), (5.0, 5.0), "vehicle", MapQueryConfig())
    assert out[0].segment_id == "a"


def test_query_all_far():
    segs = [LaneSegment("a", np.array([[500.0, 0.0], [501.0, 0.0]]), "l")]
    assert query_segments(build_index(segs), (0, 0), "pedestrian", MapQueryConfig()) == []


def test_query_tie_break_by_id():
    segs = [LaneSegment("z", np.array([[0.0, 1.0], [1.0, 1.0]]), "l"),
            LaneSegment("a", np.array([[0.0, -1.0], [1.0, -1.0]]), "l")]
    out = query_segments(build_index(segs), (0.5, 0.0), "vehicle", MapQueryConfig())
    assert [s.segment_id for s in out] == ["a", "z"]


def test_query_unknown_type():
    with pytest.raises(UnknownObjectType):
        query_segments(build_index([]), (0, 0), "tram", MapQueryConfig())


def test_monotone_radius():
    rng = np.random.default_rng(4)
    segs = _random_segments(rng, 80)
    idx = build_index(segs)
    for _ in range(30):
        c = rng.uniform(-150, 150, size=2)
        d1, d2 = sorted(rng.uniform(1, 120, size=2))
        small = {s.segment_id for s in query_segments(idx, c, "vehicle", MapQueryConfig({"vehicle": d1}))}
        big = {s.segment_id for s in query_segments(idx, c, "vehicle", MapQueryConfig({"vehicle": d2}))}
        assert small <= big


def test_query_config_rejects_nonpositive():
    with pytest.raises(ValueError):
        MapQueryConfig({"vehicle": 0.0})


def test_lane_features_aligned():
    seg = LaneSegment("a", np.array([[x, 2.0 * x] for x in range(5)], dtype=float), "l")
    f = lane_features([seg], Pose2(0, 0, math.atan2(2, 1)))
    np.testing.assert_allclose(f[0, :5, 2:4], np.tile([1.0, 0.0], (5, 1)), atol=1e-12)
    assert np.all(f[0, 5:] == 0)


def test_lane_features_two_points():
    seg = LaneSegment("a", np.array([[1.0, 1.0], [1.0, 4.0]]), "l")
    f = lane_features([seg], Pose2(1.0, 1.0, math.pi / 2))
    np.testing.assert_allclose(f[0, :2], [[0, 0, 1, 0, 1], [3, 0, 1, 0, 1]], atol=1e-12)


def test_lane_features_l_shape_rotated():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 3.0]])
    pose = Pose2(-1.0, 0.5, 0.4)
    f = lane_features([LaneSegment("a", pts, "l")], pose, p_max=4)
    c, s = math.cos(0.4), math.sin(0.4)
    local = [(c * (x + 1.0) + s * (y - 0.5), -s * (x + 1.0) + c * (y - 0.5)) for x, y in pts]
    dirs = []
    for (x0, y0), (x1, y1) in zip(local[:-1], local[1:]):
        n = math.hypot(x1 - x0, y1 - y0)
        dirs.append(((x1 - x0) / n, (y1 - y0) / n))
    dirs.append(dirs[-1])
    expected = [[x, y, dx, dy, 1.0] for (x, y), (dx, dy) in zip(local, dirs)] + [[0.0] * 5]
    np.testing.assert_allclose(f[0], expected, atol=1e-12)


def test_lane_feature_directions_unit_norm(synth_small):
    from motionfc.scenario import standardize_track  # noqa: F401

    for s in synth_small[:4]:
        segs = split_map(s.map)
        f = lane_features(segs, s.focal_reference())
        valid = f[..., 4] == 1
        np.testing.assert_allclose(np.linalg.norm(f[..., 2:4], axis=-1)[valid], 1.0, atol=1e-6)
        np.testing.assert_allclose(f[valid][:, :2], to_agent_frame(np.concatenate(
            [sg.points for sg in segs]), s.focal_reference()), atol=1e-9)
