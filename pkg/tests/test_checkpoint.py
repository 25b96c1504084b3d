import json

import numpy as np
import pytest

from odlkit import checkpoint
from odlkit.baseline import init_mlp
from odlkit.ensemble import Mode, OdlEnsemble
from odlkit.errors import FormatError


@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_ensemble_round_trip_is_exact(tmp_path, dtype):
    rng = np.random.default_rng(0)
    ens = OdlEnsemble.create(16, 8, 3, seed=4, dtype=dtype)
    ens.kmeans_init(rng.random((60, 16)))
    ens.set_mode(Mode.TRAIN)
    p = tmp_path / "c.json"
    checkpoint.save(ens, p)
    back = checkpoint.load(p)
    assert back.mode is Mode.TRAIN and back.initialized
    np.testing.assert_array_equal(back.projection.alpha, ens.projection.alpha)
    for a, b in zip(ens.instances, back.instances):
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.P, b.P)
        assert a.trained_count == b.trained_count
        assert b.beta.dtype == dtype
    np.testing.assert_array_equal(back.centroid_counts, ens.centroid_counts)
    checkpoint.save(back, tmp_path / "d.json")
    assert (tmp_path / "d.json").read_bytes() == p.read_bytes()
    # continuing from the restored copy matches the original exactly
    x = rng.random(16)
    assert back.train_step(x) == ens.train_step(x)


def test_mlp_round_trip(tmp_path):
    m = init_mlp([4, 3, 2], "classifier", seed=1)
    checkpoint.save(m, tmp_path / "m.json")
    back = checkpoint.load(tmp_path / "m.json")
    assert back.kind == "classifier"
    for a, b in zip(m.weights, back.weights):
        np.testing.assert_array_equal(a, b)


def test_corrupt_checkpoints(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        checkpoint.load(p)
    p.write_text(json.dumps({"format_version": 99, "model_kind": "odl-ensemble"}))
    with pytest.raises(FormatError, match="format_version"):
        checkpoint.load(p)
    ens = OdlEnsemble.create(4, 2, 1)
    data = checkpoint.ensemble_to_dict(ens)
    del data["alpha"]
    with pytest.raises(FormatError):
        checkpoint.ensemble_from_dict(data)
