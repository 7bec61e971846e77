import numpy as np
import pytest

from qospinn.checkpoint import load_model, save_model
from qospinn.model import build_spinn
from qospinn.uq import UqSpinn, gp_posterior, rff_features


def test_spinn_round_trip(tmp_path):
    model = build_spinn(2, [5, 5, 4, 3], [(0, 1), (0, 2)], seed=1)
    path = tmp_path / "model.npz"
    save_model(model, path, extra_meta={"note": "test"})
    loaded = load_model(path)
    X = np.random.default_rng(0).uniform(0, 1, size=(20, 2))
    assert np.max(np.abs(model.predict_points(X) - loaded.predict_points(X))) < 1e-15
    assert loaded.axis_ranges == model.axis_ranges
    assert loaded.rank == model.rank


def test_uq_round_trip(tmp_path):
    model = UqSpinn([6, 6], [6, 6], [(0, 1), (0, 1)], feature_count=16, gamma=0.1, seed=2)
    pts = np.random.default_rng(1).uniform(0, 1, size=(30, 2))
    model.fit_posterior(pts)
    path = tmp_path / "uq.npz"
    save_model(model, path)
    loaded = load_model(path)
    X = np.random.default_rng(2).uniform(0, 1, size=(10, 2))
    mu1, sd1 = model.predict(X, return_std=True)
    mu2, sd2 = loaded.predict(X, return_std=True)
    assert np.max(np.abs(mu1 - mu2)) < 1e-15
    assert np.max(np.abs(sd1 - sd2)) < 1e-15


def test_unknown_type_rejected(tmp_path):
    with pytest.raises(TypeError):
        save_model(object(), tmp_path / "x.npz")
