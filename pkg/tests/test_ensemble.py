import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odlkit.ensemble import (
    PAYLOAD_SIZE,
    Detection,
    Mode,
    MovingAverageDriftDetector,
    OdlEnsemble,
    drift_trigger,
    pack_detection,
    sequential_kmeans,
    unpack_detection,
)
from odlkit.errors import ConfigurationError, InvalidInputError, ModeError, StateError
from odlkit.oselm import anomaly_score, init_instance, init_projection


def blobs(rng, centers, per, spread=0.05):
    X = np.concatenate([c + spread * rng.normal(size=(per, c.size)) for c in centers])
    y = np.repeat(np.arange(len(centers)), per)
    perm = rng.permutation(len(X))
    return X[perm], y[perm]


def lloyd(X, init, iters=100):
    C = init.copy()
    for _ in range(iters):
        a = np.argmin(((X[:, None, :] - C[None]) ** 2).sum(-1), axis=1)
        newC = np.array([X[a == j].mean(0) if np.any(a == j) else C[j] for j in range(len(C))])
        if np.allclose(newC, C):
            break
        C = newC
    return a


def trained(K=4, n=16, N=8, seed=0, samples=None):
    ens = OdlEnsemble.create(n, N, K, seed=seed)
    if samples is None:
        samples = np.random.default_rng(seed).random((4 * N * K, n))
    ens.kmeans_init(samples)
    return ens


def test_predict_returns_min_and_argmin():
    ens = trained()
    x = np.random.default_rng(1).random(16)
    det = ens.predict(x)
    losses = np.array(det.losses)
    assert det.score_l == losses.min()
    assert det.class_k == int(np.argmin(losses))
    for inst, l in zip(ens.instances, losses):
        assert l == anomaly_score(ens.projection, inst, x)


def test_ties_go_to_lowest_index():
    ens = OdlEnsemble.create(8, 4, 3, seed=0)
    ens.initialized = True  # all instances identical at beta = 0
    assert ens.predict(np.ones(8)).class_k == 0


def test_k1_is_bit_identical_to_single_instance():
    rng = np.random.default_rng(5)
    X = rng.random((50, 16))
    ens = OdlEnsemble.create(16, 8, 1, seed=3)
    ens.kmeans_init(X[:20])
    ens.set_mode(Mode.TRAIN)
    proj = init_projection(3, 16, 8)
    inst = init_instance(8, 16)
    for x in X[:20]:
        inst.seq_update(proj, x, x)
    for x in X[20:]:
        assert ens.train_step(x).score_l == anomaly_score(proj, inst, x)
        inst.seq_update(proj, x, x)
    np.testing.assert_array_equal(ens.instances[0].beta, inst.beta)
    np.testing.assert_array_equal(ens.instances[0].P, inst.P)


def test_train_step_updates_only_winner():
    ens = trained()
    ens.set_mode(Mode.TRAIN)
    before = [i.beta.copy() for i in ens.instances]
    det = ens.train_step(np.random.default_rng(9).random(16))
    for k, (b, inst) in enumerate(zip(before, ens.instances)):
        assert np.array_equal(b, inst.beta) == (k != det.class_k)


def test_mode_and_state_errors():
    ens = OdlEnsemble.create(8, 4, 2)
    with pytest.raises(StateError):
        ens.predict(np.zeros(8))
    ens.kmeans_init(np.random.default_rng(0).random((10, 8)))
    assert ens.mode is Mode.PREDICT
    with pytest.raises(ModeError):
        ens.train_step(np.zeros(8))
    with pytest.raises(InvalidInputError):
        ens.kmeans_init(np.zeros((1, 8)))
    with pytest.raises(ConfigurationError):
        OdlEnsemble.create(8, 4, 0)


def test_strict_init_rejects_small_clusters():
    ens = OdlEnsemble.create(8, 16, 2)
    X = np.random.default_rng(0).random((20, 8))
    with pytest.raises(InvalidInputError, match="fewer than N"):
        ens.kmeans_init(X, strict=True)


def test_running_mean_centroids_match_cluster_means():
    rng = np.random.default_rng(2)
    X, _ = blobs(rng, [np.zeros(4), np.full(4, 5.0), np.full(4, -5.0)], 30)
    C, counts, a = sequential_kmeans(X, 3)
    for j in range(3):
        np.testing.assert_allclose(C[j], X[a == j].mean(0), atol=1e-12)
    assert counts.sum() == len(X)


@pytest.mark.parametrize("seed", range(5))
def test_sequential_kmeans_agrees_with_lloyd(seed):
    rng = np.random.default_rng(seed)
    centers = [rng.uniform(-10, 10, size=6) for _ in range(4)]
    X, _ = blobs(rng, centers, 100, spread=0.5)
    _, _, a = sequential_kmeans(X, 4)
    ref = lloyd(X, np.array(centers))
    # best label permutation via contingency argmax (clusters are well separated)
    table = np.zeros((4, 4), dtype=int)
    np.add.at(table, (a, ref), 1)
    agreement = table.max(axis=1).sum() / len(X)
    assert agreement >= 0.99


def test_first_distinct_seeding_option():
    X = np.array([[0.0], [0.0], [1.0], [2.0]])
    C, _, _ = sequential_kmeans(X[:3], 2, seeding="first-distinct")
    assert C.shape == (2, 1)
    with pytest.raises(ConfigurationError):
        sequential_kmeans(X, 2, seeding="nope")


def test_alternating_patterns_are_separated():
    rng = np.random.default_rng(0)
    n = 64
    base = [np.zeros(n) for _ in range(4)]
    for k, b in enumerate(base):
        b[8 + 12 * k : 12 + 12 * k] = 1.0
    draw = lambda k: base[k] + 0.02 * rng.random(n)
    init = [draw(i % 4) for i in range(4 * 40)]
    ens = OdlEnsemble.create(n, 16, 4, seed=1)
    ens.kmeans_init(init)
    truth = [i % 4 for i in range(400)]
    pred = [ens.predict(draw(t)).class_k for t in truth]
    purity = 0
    for k in set(pred):
        labels = [t for t, p in zip(truth, pred) if p == k]
        purity += max(labels.count(c) for c in set(labels))
    assert purity / len(truth) >= 0.95


def test_drift_detector_fires_on_mean_shift():
    d = MovingAverageDriftDetector(window=5, tau=2.0)
    for s in [1.0] * 5:
        d.observe(s)
    assert d.mark_baseline() == 1.0
    fired = [drift_trigger(d, s) for s in [1.0] * 5 + [10.0] * 5]
    assert not any(fired[:5])
    assert fired.index(True) == 5  # trailing mean (1,1,1,1,10) = 2.8 > 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=50))
def test_drift_with_infinite_tau_never_fires(scores):
    d = MovingAverageDriftDetector(window=3, tau=float("inf"))
    d.observe(1.0)
    d.mark_baseline()
    assert not any(d.update(s) for s in scores)


def test_drift_config_errors():
    with pytest.raises(ConfigurationError):
        MovingAverageDriftDetector(window=0, tau=1.0)
    with pytest.raises(ConfigurationError):
        MovingAverageDriftDetector(window=3, tau=0.0)
    with pytest.raises(StateError):
        MovingAverageDriftDetector(window=3, tau=1.0).mark_baseline()
    assert MovingAverageDriftDetector(3, 1.0).update(5.0) is False  # no baseline yet


def test_payload_is_20_bytes_and_round_trips():
    det = Detection(0.125, 3, Mode.TRAIN)
    raw = pack_detection(det, device_id=7, seq=42, epoch_seconds=1_700_000_000)
    assert len(raw) == PAYLOAD_SIZE == 20
    assert unpack_detection(raw) == {
        "device_id": 7,
        "seq": 42,
        "epoch_seconds": 1_700_000_000,
        "score_l": 0.125,
        "class_k": 3,
        "mode": "train",
    }
    assert struct.unpack_from("<I", raw, 4)[0] == 42  # little-endian, seq at offset 4
    with pytest.raises(InvalidInputError):
        unpack_detection(raw[:-1])
