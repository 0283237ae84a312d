import math

import numpy as np
import pytest

from helpers import constant_velocity_predictor, line_track, oracle_predictor, scenario_of
from oracles import loop_metrics
from motionfc.errors import EmptyDataset, ParseError
from motionfc.evaluation import evaluate, evaluate_predictions, format_report, parse_report
from motionfc.geometry import from_agent_frame


def _scene(sid, object_type="vehicle", heading=0.4, speed=5.0, turn=0.0):
    tr = line_track("a0", object_type, start=(10.0, -4.0), heading=heading, speed=speed)
    if turn:
        st = tr.states.copy()
        t = np.arange(60) * 0.1
        st[15:, 1] += turn * t ** 2
        tr = type(tr)(tr.agent_id, tr.object_type, st)
    return scenario_of([tr], sid=sid)


def test_oracle_predictor_zero_displacement():
    data = [_scene("a"), _scene("b", "pedestrian", speed=1.0)]
    rep = evaluate(data, lambda s: oracle_predictor(s, 6, p_best=0.7))
    for k in (1, 6):
        assert rep.get("all", "minADE", k) == pytest.approx(0.0, abs=1e-9)
        assert rep.get("all", "minFDE", k) == pytest.approx(0.0, abs=1e-9)
        assert rep.get("all", "MR", k) == 0.0
        assert rep.get("all", "brier_minFDE", k) == pytest.approx(0.09, abs=1e-9)


def test_single_vehicle_aggregate_equals_category():
    rep = evaluate([_scene("a", turn=1.0)], constant_velocity_predictor())
    assert rep.categories() == ["all", "vehicle"]
    assert rep.rows["all"] == rep.rows["vehicle"]
    assert rep.counts == {"all": 1, "vehicle": 1}


def test_mixed_categories_match_hand_aggregation():
    data = [_scene("v1", turn=0.5), _scene("v2", turn=-1.0), _scene("p1", "pedestrian", speed=1.2, turn=0.3),
            _scene("c1", "cyclist", speed=4.0, turn=2.0)]
    pred = constant_velocity_predictor(K=6)
    rep = evaluate(data, pred)
    per = {}
    for s in data:
        out = pred(s)
        gt, mask = s.focal_future()
        per[s.scenario_id] = (s.focal.object_type,
                              loop_metrics(from_agent_frame(out.trajectories, s.focal_reference()),
                                           out.probabilities, gt, mask))
    for cat in ("vehicle", "pedestrian", "cyclist"):
        rows = [m for t, m in per.values() if t == cat]
        for metric in ("minADE", "minFDE", "MR", "brier_minADE", "brier_minFDE"):
            assert rep.get(cat, metric, 6) == pytest.approx(sum(r[metric] for r in rows) / len(rows), abs=1e-12)
    assert rep.get("all", "minADE", 6) == pytest.approx(sum(m["minADE"] for _, m in per.values()) / 4, abs=1e-12)
    assert list(rep.rows) == ["all", "vehicle", "pedestrian", "cyclist"]


def test_k1_uses_most_probable_mode():
    s = _scene("a")
    gt, _ = s.focal_future()
    traj = np.stack([gt + [0, 3.0], gt + [0, 1.0]])
    rep = evaluate_predictions([s], {"a": (traj, np.array([0.6, 0.4]))}, k_values=(1, 2))
    assert rep.get("all", "minADE", 1) == pytest.approx(3.0)
    assert rep.get("all", "minADE", 2) == pytest.approx(1.0)
    assert rep.get("all", "brier_minADE", 2) == pytest.approx(1.0 + 0.36)


def test_probabilities_are_renormalized():
    s = _scene("a")
    gt, _ = s.focal_future()
    traj = np.stack([gt, gt + 5])
    a = evaluate_predictions([s], {"a": (traj, np.array([0.5, 0.5]))}, (2,))
    b = evaluate_predictions([s], {"a": (traj, np.array([2.0, 2.0]))}, (2,))
    assert a.rows == b.rows


def test_missing_and_empty():
    with pytest.raises(EmptyDataset):
        evaluate([], constant_velocity_predictor())
    with pytest.raises(KeyError):
        evaluate_predictions([_scene("a")], {})


def test_report_format_round_trip():
    rep = evaluate([_scene("a", turn=1.0), _scene("p", "pedestrian", speed=1.0)], constant_velocity_predictor())
    text = format_report(rep)
    table, block = text.split("\n\n")
    header = table.splitlines()[0].split("\t")
    assert header[:3] == ["category", "count", "minADE@K1"]
    assert [ln.split("\t")[0] for ln in table.splitlines()[1:]] == ["all", "vehicle", "pedestrian"]
    values = parse_report(text)
    assert values["all.K6.minADE"] == rep.get("all", "minADE", 6)
    assert values["pedestrian.count"] == 1


def test_parse_report_errors():
    with pytest.raises(ParseError):
        parse_report("category\tcount\n")
    with pytest.raises(ParseError):
        parse_report("x\n\nnot a pair\n")


def test_constant_velocity_is_exact_on_straight_motion():
    rep = evaluate([_scene("a", heading=-2.5, speed=7.0)], constant_velocity_predictor())
    assert rep.get("all", "minFDE", 6) < 1e-4
    assert math.isfinite(rep.get("all", "brier_minADE", 1))
