import struct

import numpy as np
import pytest

from helpers import line_track, scenario_of
from motionfc.config import TINY_MODEL, ModelConfig
from motionfc.dataio import SynthConfig, generate_synthetic
from motionfc.errors import ConfigError, CorruptCheckpoint, EmptyDataset, MixedHorizons, NonFiniteLoss
from motionfc.evaluation.metrics import min_ade
from motionfc.features import make_batch, scenario_features
from motionfc.geometry import to_agent_frame
from motionfc.model import compute_losses, forward, forward_batch, init_params, outputs_from
from motionfc.nn import checkpoint as ckpt
from motionfc.train import TrainConfig, format_log_line, load_checkpoint, save_checkpoint, train

TINY = TINY_MODEL


def _scene(n_agents, sid, cfg=TINY, speed=3.0):
    n = cfg.H + cfg.T
    tracks = [line_track("a0", start=(0, 0), heading=0.2, speed=speed, n=n)]
    tracks += [line_track(f"b{i}", start=(2.0 * i, 1.5 * i), heading=-0.4 * i, speed=1.0, n=n)
               for i in range(1, n_agents)]
    return scenario_of(tracks, [[(-10, 0), (10, 0)], [(0, -10), (0, 10)]], cfg.H, cfg.T, sid)


@pytest.fixture(scope="module")
def small_set():
    return generate_synthetic(SynthConfig(n_scenarios=5, H=TINY.H, T=TINY.T, seed=11))


# batching -------------------------------------------------------------------

def test_single_scenario_batch_equals_features():
    s = _scene(3, "x")
    b = make_batch([s], TINY)
    f = scenario_features(s, TINY)
    np.testing.assert_array_equal(b.hist[0], f.hist.astype(np.float32))
    np.testing.assert_array_equal(b.lanes[0], f.lanes.astype(np.float32))
    assert b.agent_mask.all() and b.lane_mask.all()


def test_padding_mask_on_smaller_scenario():
    b = make_batch([_scene(1, "x"), _scene(3, "y")], TINY)
    assert b.agent_mask.shape == (2, 3)
    assert b.agent_mask[0].astype(int).tolist() == [1, 0, 0]
    assert b.agent_mask[1].all()
    assert np.all(b.hist[0, 1:] == 0)
    f = scenario_features(_scene(3, "y"), TINY)
    np.testing.assert_array_equal(b.hist[1], f.hist.astype(np.float32))
    assert b.scenario_ids == ("x", "y")


def test_mixed_horizons_rejected():
    other = ModelConfig(d_model=8, n_heads=2, T=8, H=4, anchor_waypoint_stride=4)
    with pytest.raises(MixedHorizons):
        make_batch([_scene(2, "x"), _scene(2, "y", cfg=other)], TINY)


def test_batched_forward_matches_unbatched(small_set):
    store = init_params(TINY, seed=2)
    batched = outputs_from(forward_batch(make_batch(small_set, TINY), TINY, store))
    for s, out in zip(small_set, batched):
        single = forward(s, TINY, store)
        np.testing.assert_allclose(out.trajectories, single.trajectories, atol=1e-5)
        np.testing.assert_allclose(out.probabilities, single.probabilities, atol=1e-5)


def test_batch_loss_is_mean_of_scenario_losses(small_set):
    store = init_params(TINY, seed=2, dtype=np.float64)
    batch = make_batch(small_set, TINY, np.float64)
    _, whole = compute_losses(forward_batch(batch, TINY, store), batch, TINY)
    singles = []
    for s in small_set:
        b = make_batch([s], TINY, np.float64)
        singles.append(compute_losses(forward_batch(b, TINY, store), b, TINY)[1].total)
    assert whole.total == pytest.approx(np.mean(singles), rel=1e-9)


# training -------------------------------------------------------------------

def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(lr=0.0)


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        train([], TINY, TrainConfig(epochs=1))


def test_single_scenario_overfit_sanity():
    r = train([_scene(2, "x")], TINY, TrainConfig(epochs=200, lr=3e-3))
    assert r.history[-1].total < r.history[0].total
    assert r.steps == 200


def test_overfit_one_synthetic_scenario_forward_close():
    s = generate_synthetic(SynthConfig(n_scenarios=1, seed=3))
    cfg = ModelConfig(d_model=32, n_heads=2, n_encoder_layers=1)
    r = train(s, cfg, TrainConfig(epochs=300, lr=3e-3))
    out = forward(s[0], cfg, r.store)
    fut, m = s[0].focal_future()
    assert min_ade(out.trajectories, to_agent_frame(fut, s[0].focal_reference()), m) < 0.1


def test_non_finite_loss_reports_step(small_set):
    store = init_params(TINY, seed=0)
    store.set("pred.reg.b", np.full_like(store.value("pred.reg.b"), np.inf))
    with pytest.raises(NonFiniteLoss) as info:
        train(small_set, TINY, TrainConfig(epochs=1, batch_size=2), store=store)
    assert info.value.step == 0


def test_log_lines_and_partial_batches(small_set, tmp_path):
    log = tmp_path / "train.log"
    seen = []
    r = train(small_set, TINY, TrainConfig(epochs=3, batch_size=2), log_path=log,
              on_epoch=lambda e, b: seen.append(e))
    assert seen == [1, 2, 3]
    assert r.steps == 9  # ceil(5 / 2) batches per epoch
    lines = log.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0] == format_log_line(1, r.history[0])
    assert len(lines[0].split("\t")) == 6


def test_seeded_training_is_byte_identical(small_set, tmp_path):
    paths = [tmp_path / "a.ckpt", tmp_path / "b.ckpt"]
    for p in paths:
        train(small_set, TINY, TrainConfig(epochs=2, batch_size=2, seed=4), out_path=p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    train(small_set, TINY, TrainConfig(epochs=2, batch_size=2, seed=5), out_path=tmp_path / "c.ckpt")
    assert (tmp_path / "c.ckpt").read_bytes() != paths[0].read_bytes()


# checkpoints -----------------------------------------------------------------

def test_checkpoint_round_trip_bitwise(tmp_path):
    store = init_params(TINY, seed=9)
    p = tmp_path / "m.ckpt"
    save_checkpoint(store, TINY, p)
    back, cfg = load_checkpoint(p, expected=TINY)
    assert cfg == TINY
    for n in store.names():
        assert back.value(n).tobytes() == store.value(n).tobytes()
        assert back.value(n).dtype == np.float32


def test_checkpoint_layout(tmp_path):
    store = init_params(TINY, seed=9)
    blob = ckpt.dumps(store, TINY.to_kv())
    assert blob[:4] == b"TJF1"
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = blob[8:8 + hlen].decode()
    assert "d_model=8" in header.splitlines()
    off = 8 + hlen
    (nlen,) = struct.unpack("<I", blob[off:off + 4])
    name = blob[off + 4:off + 4 + nlen].decode()
    off += 4 + nlen
    (rank,) = struct.unpack("<I", blob[off:off + 4])
    shape = struct.unpack(f"<{rank}I", blob[off + 4:off + 4 + 4 * rank])
    off += 4 + 4 * rank
    values = np.frombuffer(blob[off:off + 4 * int(np.prod(shape))], dtype="<f4").reshape(shape)
    np.testing.assert_array_equal(values, store.value(name))


def test_bad_magic(tmp_path):
    p = tmp_path / "m.ckpt"
    save_checkpoint(init_params(TINY), TINY, p)
    p.write_bytes(b"XXXX" + p.read_bytes()[4:])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(p)


@pytest.mark.parametrize("cut", [2, 6, 30, -1, -100])
def test_truncated_checkpoint(tmp_path, cut):
    p = tmp_path / "m.ckpt"
    save_checkpoint(init_params(TINY), TINY, p)
    blob = p.read_bytes()
    p.write_bytes(blob[:cut])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(p)


def test_header_mismatch_names_field(tmp_path):
    p = tmp_path / "m.ckpt"
    save_checkpoint(init_params(TINY), TINY, p)
    with pytest.raises(CorruptCheckpoint, match="K_modes"):
        load_checkpoint(p, expected=TINY.replace(K_modes=3))


def test_shape_mismatch(tmp_path):
    store = init_params(TINY)
    store.params["anchor.query"].value = np.zeros((5, 8), dtype=np.float32)
    p = tmp_path / "m.ckpt"
    save_checkpoint(store, TINY, p)
    with pytest.raises(CorruptCheckpoint, match="anchor.query"):
        load_checkpoint(p)


def test_missing_file(tmp_path):
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(tmp_path / "nope.ckpt")
