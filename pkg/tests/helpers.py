"""Scenario builders and reference predictors shared by the tests."""

import math

import numpy as np

from motionfc.geometry import normalize_angle
from motionfc.mapping import Lane, VectorMap
from motionfc.model import ForecastOutput
from motionfc.scenario import AgentTrack, Scenario, make_states


def line_track(agent_id, object_type="vehicle", start=(0.0, 0.0), heading=0.0, speed=0.0, n=75, valid=None,
               dtype=np.float64):
    t = np.arange(n) * 0.1
    d = np.array([math.cos(heading), math.sin(heading)])
    xy = np.asarray(start) + (speed * t)[:, None] * d
    return AgentTrack(agent_id, object_type,
                      make_states(xy, np.full(n, heading), np.tile(speed * d, (n, 1)), valid, dtype=dtype))


def scenario_of(tracks, lanes=(), H=15, T=60, sid="t0"):
    vmap = VectorMap(tuple(Lane(f"l{i}", np.asarray(p, dtype=np.float32)) for i, p in enumerate(lanes)))
    return Scenario(sid, tracks[0].agent_id, tuple(tracks), vmap, H, T)


def constant_velocity_predictor(K=6):
    """Extrapolates the focal agent's last observed velocity (focal frame)."""

    def predict(s: Scenario) -> ForecastOutput:
        from motionfc.scenario import standardize_track

        st = standardize_track(s.focal, s.H).states
        v = st[s.H - 1, 3:5]
        t = np.arange(1, s.T + 1) * 0.1
        traj = np.repeat((t[:, None] * v)[None], K, axis=0)
        return ForecastOutput(traj, np.full(K, 1.0 / K), np.zeros((0, 0, 2)), traj.copy())

    return predict


def oracle_predictor(s: Scenario, K=6, p_best=1.0) -> ForecastOutput:
    from motionfc.geometry import to_agent_frame

    fut, _ = s.focal_future()
    gt = to_agent_frame(fut, s.focal_reference())
    traj = np.repeat(gt[None], K, axis=0)
    traj[1:] += 50.0
    probs = np.full(K, (1.0 - p_best) / (K - 1))
    probs[0] = p_best
    return ForecastOutput(traj, probs, np.zeros((0, 0, 2)), traj.copy())


def random_pose(rng):
    from motionfc.geometry import Pose2

    return Pose2(rng.uniform(-100, 100), rng.uniform(-100, 100), normalize_angle(rng.uniform(-4, 4)))


def random_scenario(rng, H=15, T=60, max_agents=10, max_lanes=20, sid=None, n_agents=None, n_lanes=None):
    """Valid scenario with random ids, types, magnitudes and validity patterns."""
    from motionfc.scenario import OBJECT_TYPES

    n = H + T
    tracks = []
    for a in range(n_agents or int(rng.integers(1, max_agents + 1))):
        scale = 10.0 ** rng.integers(-3, 7)
        xy = rng.normal(scale=scale, size=(n, 2))
        valid = rng.random(n) < 0.8
        if a == 0:
            valid[:H] = True
        states = make_states(xy, rng.uniform(-4, 4, n), rng.normal(scale=10, size=(n, 2)), valid)
        tracks.append(AgentTrack(f"ag{a}_{rng.integers(1000)}", OBJECT_TYPES[rng.integers(5)], states))
    lanes = []
    for k in range(int(rng.integers(0, max_lanes + 1)) if n_lanes is None else n_lanes):
        pts = np.cumsum(rng.normal(scale=5.0, size=(int(rng.integers(2, 30)), 2)), axis=0)
        lanes.append(Lane(f"lane-{k}", (pts + rng.normal(scale=1e3, size=2)).astype(np.float32)))
    sid = sid if sid is not None else f"sc{rng.integers(10**9)}"
    return Scenario(sid, tracks[0].agent_id, tuple(tracks), VectorMap(tuple(lanes)), H, T)
