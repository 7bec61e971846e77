import numpy as np
import pytest

from qospinn.layers import angles_to_matrix
from qospinn.model import build_spinn
from qospinn.pde import make_problem
from qospinn.training import (
    AdamState,
    TrainConfig,
    _Plan,
    adam_step,
    assemble_loss,
    evaluate_model,
    history_to_csv,
    train,
)


def tiny_setup(problem_name="advection_diffusion_1d", widths=(4, 4, 4, 2), seed=3, **kw):
    problem = make_problem(problem_name, **kw)
    model = build_spinn(problem.n_axes, list(widths), problem.axis_ranges, seed=seed)
    rng = np.random.default_rng(seed)
    for s in model.subnets:
        for L in s.ortho_layers:
            L.thetas[:] = rng.normal(size=L.thetas.size) * 0.5
        for L in s.post_layers:
            L.W[:] = rng.normal(size=L.W.shape) * 0.5
    return problem, model


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = {"w": np.array([1.0, -2.0])}
        st = AdamState.for_params(p)
        adam_step(p, {"w": np.zeros(2)}, st, lr=0.1)
        assert np.allclose(p["w"], [1.0, -2.0])

    def test_hand_computed_first_step(self):
        # g=1, lr=0.1: m_hat = 1, v_hat = 1 -> step = -0.1 / (1 + 1e-8)
        p = {"w": np.array([0.0])}
        st = AdamState.for_params(p)
        adam_step(p, {"w": np.array([1.0])}, st, lr=0.1)
        assert abs(p["w"][0] + 0.1 / (1.0 + 1e-8)) < 1e-16

    def test_deterministic_trajectories(self):
        def run():
            p = {"w": np.array([0.3])}
            st = AdamState.for_params(p)
            traj = []
            for _ in range(5):
                adam_step(p, {"w": np.array([0.7])}, st, lr=0.05)
                traj.append(p["w"][0])
            return traj

        assert run() == run()

    def test_shape_mismatch(self):
        p = {"w": np.zeros(3)}
        st = AdamState.for_params(p)
        with pytest.raises(ValueError):
            adam_step(p, {"w": np.zeros(2)}, st, lr=0.1)


class TestAssembleLoss:
    def test_zero_weights_zero_loss_and_grads(self):
        problem, model = tiny_setup(n_ic=4, n_bc=4)
        cfg = TrainConfig(collocation=6, lambda_res=0.0, lambda_ic=0.0,
                          lambda_bc=0.0, lambda_data=0.0, epochs=1)
        plan = _Plan(problem, cfg.axis_counts(2), np.random.default_rng(0))
        terms, grads = assemble_loss(model, problem, plan, cfg, dict(model.param_dict()))
        assert terms["total"] == 0.0
        assert all(not np.any(g) for g in grads.values())

    def test_full_loss_gradients_match_fd(self):
        problem, model = tiny_setup("burgers_1d", n_ic=5, n_bc=4)
        cfg = TrainConfig(collocation=6, epochs=1)
        plan = _Plan(problem, cfg.axis_counts(2), np.random.default_rng(1))
        params = dict(model.param_dict())
        _, grads = assemble_loss(model, problem, plan, cfg, params)
        rng = np.random.default_rng(2)
        eps = 1e-5
        for name, arr in params.items():
            flat = arr.ravel()
            g = grads[name].ravel()
            for k in rng.choice(flat.size, size=min(4, flat.size), replace=False):
                old = flat[k]
                flat[k] = old + eps
                tp, _ = assemble_loss(model, problem, plan, cfg, params)
                flat[k] = old - eps
                tm, _ = assemble_loss(model, problem, plan, cfg, params)
                flat[k] = old
                fd = (tp["total"] - tm["total"]) / (2 * eps)
                assert abs(fd - g[k]) <= 1e-4 * max(1e-4, abs(fd)), (name, k)

    def test_learnable_param_gradient_matches_fd(self):
        problem, model = tiny_setup("sine_gordon_inverse", n_ic=4, n_bc=3, n_obs=6)
        cfg = TrainConfig(collocation=6, epochs=1)
        plan = _Plan(problem, cfg.axis_counts(2), np.random.default_rng(3))
        params = dict(model.param_dict())
        params["beta"] = np.array([0.6])
        _, grads = assemble_loss(model, problem, plan, cfg, params)
        eps = 1e-6
        params["beta"][0] = 0.6 + eps
        tp, _ = assemble_loss(model, problem, plan, cfg, params)
        params["beta"][0] = 0.6 - eps
        tm, _ = assemble_loss(model, problem, plan, cfg, params)
        fd = (tp["total"] - tm["total"]) / (2 * eps)
        assert abs(fd - grads["beta"][0]) <= 1e-6 * max(1.0, abs(fd))

    def test_colloc_tensor_cap(self):
        problem = make_problem("advection_diffusion_3d", n_ic=3, n_bc=3)
        problem.colloc_tensor_cap = 1000
        model = build_spinn(4, [4, 4, 4, 2], problem.axis_ranges, seed=0)
        cfg = TrainConfig(collocation=400, colloc_per_axis=[100, 100, 100, 100], epochs=1)
        with pytest.raises(ValueError):
            _Plan(problem, cfg.axis_counts(4), np.random.default_rng(0))


class TestTrainLoop:
    def test_short_run_improves_and_is_deterministic(self):
        problem, _ = tiny_setup(n_ic=8, n_bc=8)
        cfg = TrainConfig(lr=2e-3, epochs=60, collocation=20, log_every=20,
                          eval_every=0, seed=5)

        def run():
            model = build_spinn(2, [4, 4, 4, 2], problem.axis_ranges, seed=5)
            return train(model, problem, cfg)

        r1, r2 = run(), run()
        assert [h["loss_total"] for h in r1.history] == [h["loss_total"] for h in r2.history]
        assert r1.history[-1]["loss_total"] < r1.history[0]["loss_total"]

    def test_orthogonality_preserved_by_training(self):
        problem, _ = tiny_setup(n_ic=6, n_bc=6)
        model = build_spinn(2, [5, 5, 4, 3], problem.axis_ranges, seed=6)
        cfg = TrainConfig(lr=5e-3, epochs=50, collocation=16, log_every=50, eval_every=0)
        train(model, problem, cfg)
        for sub in model.subnets:
            for layer in sub.ortho_layers:
                W = angles_to_matrix(layer)
                assert np.max(np.abs(W.T @ W - np.eye(layer.n))) < 1e-9

    def test_nan_aborts_with_diagnostics(self):
        problem, model = tiny_setup(n_ic=4, n_bc=4)
        model.subnets[0].post_layers[0].W[0, 0] = np.nan
        cfg = TrainConfig(epochs=3, collocation=8, eval_every=0)
        with pytest.raises(RuntimeError, match="non-finite"):
            train(model, problem, cfg)

    def test_inverse_estimate_recorded(self):
        problem, model = tiny_setup("sine_gordon_inverse", n_ic=4, n_bc=3, n_obs=5)
        cfg = TrainConfig(epochs=10, collocation=8, log_every=5, eval_every=0)
        result = train(model, problem, cfg)
        assert result.param_estimate is not None
        assert len(result.param_estimate.trace) == 10
        assert np.isfinite(result.param_estimate.value)

    def test_history_csv_round_trip(self, tmp_path):
        problem, model = tiny_setup(n_ic=4, n_bc=4)
        cfg = TrainConfig(epochs=10, collocation=8, log_every=2, eval_every=5)
        result = train(model, problem, cfg)
        path = tmp_path / "history.csv"
        history_to_csv(result.history, path)
        lines = path.read_text().strip().split("\n")
        header = lines[0].split(",")
        assert header[:5] == ["epoch", "loss_total", "loss_res", "loss_ic", "loss_bc"]
        assert len(lines) == 1 + len(result.history)

    def test_evaluate_model_runs(self):
        problem, model = tiny_setup(n_ic=4, n_bc=4)
        mse, mx = evaluate_model(model, problem)
        assert np.isfinite(mse) and np.isfinite(mx)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(lr=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(mode="warp")
        cfg = TrainConfig(colloc_per_axis=[3, 3])
        with pytest.raises(ValueError):
            cfg.axis_counts(3)
