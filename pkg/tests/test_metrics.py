import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import loop_metrics
from motionfc.errors import NoValidFuture, ShapeMismatch
from motionfc.evaluation.metrics import (ade_per_mode, brier_metrics, min_ade, min_fde, miss_rate, top_k)
from motionfc.evaluation.report import scenario_metrics


def test_exact_mode_gives_zero():
    gt = np.random.default_rng(0).normal(size=(5, 2))
    preds = np.stack([gt + 1, gt, gt - 1])
    assert min_ade(preds, gt) == 0.0 and min_fde(preds, gt) == 0.0


def test_constant_offset():
    gt = np.random.default_rng(1).normal(size=(7, 2))
    preds = np.stack([gt + [0, 1.5], gt + [0, 1.5]])
    assert min_ade(preds, gt) == pytest.approx(1.5, abs=1e-12)
    assert min_fde(preds, gt) == pytest.approx(1.5, abs=1e-12)


def test_three_mode_five_step_triple_loop():
    rng = np.random.default_rng(2)
    preds, gt = rng.normal(size=(3, 5, 2)), rng.normal(size=(5, 2))
    best = None
    for k in range(3):
        total = Fraction(0)
        for t in range(5):
            total += Fraction(math.sqrt((preds[k, t, 0] - gt[t, 0]) ** 2 + (preds[k, t, 1] - gt[t, 1]) ** 2))
        ade = float(total / 5)
        best = ade if best is None else min(best, ade)
    assert min_ade(preds, gt) == best


def test_fde_distances_321():
    gt = np.zeros((4, 2))
    preds = np.zeros((3, 4, 2))
    preds[0, -1] = (3, 0)
    preds[1, -1] = (0, 1)
    preds[2, -1] = (0, -2)
    assert min_fde(preds, gt) == 1.0


def test_fde_masked_tail_uses_last_valid():
    rng = np.random.default_rng(3)
    preds, gt = rng.normal(size=(2, 30, 2)), rng.normal(size=(30, 2))
    mask = np.ones(30, dtype=bool)
    mask[-10:] = False
    expected = min(math.dist(preds[k, 19], gt[19]) for k in range(2))
    assert min_fde(preds, gt, mask) == pytest.approx(expected, abs=1e-15)


def test_miss_rate_boundary():
    gt = np.zeros((3, 2))
    pred = np.zeros((1, 3, 2))
    assert miss_rate(pred, gt) == 0.0
    pred[0, -1] = (2.5, 0)
    assert miss_rate(pred, gt) == 1.0
    pred[0, -1] = (2.0, 0)
    assert miss_rate(pred, gt) == 0.0


def test_brier_closed_forms():
    gt = np.zeros((2, 2))
    preds = np.zeros((2, 2, 2))
    assert brier_metrics(preds[:1], [1.0], gt) == (0.0, 0.0)
    preds[0, -1] = (1.0, 0.0)
    preds[1, :] = 5.0
    _, bfde = brier_metrics(preds, [0.5, 0.5], gt)
    assert bfde == 1.25


def test_no_valid_future_and_shapes():
    with pytest.raises(NoValidFuture):
        min_ade(np.zeros((2, 3, 2)), np.zeros((3, 2)), np.zeros(3, dtype=bool))
    with pytest.raises(ShapeMismatch):
        min_ade(np.zeros((2, 4, 2)), np.zeros((3, 2)))


def test_top_k_ties_by_index():
    assert top_k([0.2, 0.4, 0.2, 0.2], 3).tolist() == [1, 0, 2]


def random_instance(rng):
    K, T = int(rng.integers(1, 7)), int(rng.integers(1, 12))
    gt = rng.normal(scale=5, size=(T, 2))
    preds = gt + rng.normal(scale=rng.choice([0.5, 2.0, 5.0]), size=(K, T, 2))
    if rng.random() < 0.3:  # force ties
        preds[-1] = preds[0]
    mask = rng.random(T) < 0.8
    mask[rng.integers(T)] = True
    probs = rng.dirichlet(np.ones(K))
    return preds, probs, gt, mask


def test_metrics_match_loop_oracle_exactly():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        preds, probs, gt, mask = random_instance(rng)
        oracle = loop_metrics(preds, probs, gt, mask)
        assert min_ade(preds, gt, mask) == oracle["minADE"]
        assert min_fde(preds, gt, mask) == oracle["minFDE"]
        assert miss_rate(preds, gt, mask) == oracle["MR"]
        assert brier_metrics(preds, probs, gt, mask) == (oracle["brier_minADE"], oracle["brier_minFDE"])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rigid_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    preds, probs, gt, mask = random_instance(rng)
    th = rng.uniform(-math.pi, math.pi)
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    off = rng.uniform(-1e3, 1e3, size=2)
    a = scenario_metrics(preds, probs, gt, mask)
    b = scenario_metrics(preds @ R.T + off, probs, gt @ R.T + off, mask)
    for k in a:
        for m in a[k]:
            assert b[k][m] == pytest.approx(a[k][m], abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_report_ordering_invariants(seed):
    rng = np.random.default_rng(seed)
    preds, probs, gt, mask = random_instance(rng)
    v = scenario_metrics(preds, probs, gt, mask, k_values=(1, 6))
    for k in (1, 6):
        assert v[k]["minADE"] <= v[k]["brier_minADE"]
        assert v[k]["minFDE"] <= v[k]["brier_minFDE"]
        assert v[k]["MR"] in (0.0, 1.0)
    assert v[6]["minADE"] <= v[1]["minADE"] and v[6]["minFDE"] <= v[1]["minFDE"]
    assert np.all(ade_per_mode(preds, gt, mask) >= 0)
