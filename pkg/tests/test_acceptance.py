"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured quantities.

The training-based criteria share session fixtures so each experiment runs
once. Budgets are sized for a small CI box; the 2d problem is behind the
``slow_suite`` marker (run with ``pytest -m slow_suite``).
"""

import time

import numpy as np
import pytest

from qospinn.layers import PyramidLayer, angles_to_matrix, layer_forward, preprocess_input
from qospinn.lipschitz import model_bound_report, spectral_norm
from qospinn.model import build_spinn
from qospinn.pde import BurgersOracle, burgers_reference, make_problem
from qospinn.training import TrainConfig, _Plan, assemble_loss, evaluate_model, train
from qospinn.unary import tomography
from qospinn.uq import (
    UqSpinn,
    UqTrainConfig,
    eac,
    mc_dropout_predict,
    train_uq,
)

from helpers import random_orthogonal, random_unit


def report(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line, flush=True)
    assert ok, line


# -- criterion 1: orthogonality and matrix/circuit equivalence ---------------


def test_c1_orthogonality_and_mode_equivalence():
    rng = np.random.default_rng(1)
    t0 = time.time()
    worst_orth = 0.0
    worst_gap = 0.0
    for i in range(1000):
        d_in = int(rng.integers(1, 31))
        d_out = int(rng.integers(2, 33))
        lift = "sincos" if d_in == 1 else "norm"
        layer = PyramidLayer(d_in, d_out, lift=lift, rng=rng)  # n <= 32 by draw
        layer.thetas[:] = rng.normal(size=layer.thetas.size)
        W = angles_to_matrix(layer)
        worst_orth = max(worst_orth, float(np.max(np.abs(W.T @ W - np.eye(layer.n)))))
        if i % 4 == 0:  # forward equivalence on a quarter of the draws
            h = rng.uniform(-0.9, 0.9, size=d_in)
            om, _ = layer_forward(layer, h, mode="matrix")
            oc, _ = layer_forward(layer, h, mode="circuit_exact")
            worst_gap = max(worst_gap, float(np.max(np.abs(om - oc))))
    elapsed = time.time() - t0
    ok = worst_orth < 1e-9 and worst_gap < 1e-9 and elapsed < 30
    report(1, ok, f"1000 layers: max |W^T W - I| = {worst_orth:.2e}, "
                  f"max mode gap = {worst_gap:.2e}, {elapsed:.1f}s")


# -- criterion 2: tomography exactness and shot-noise scaling ----------------


def test_c2_tomography():
    rng = np.random.default_rng(2)
    t0 = time.time()
    worst_exact = 0.0
    for n in (2, 4, 8, 16, 32, 64):
        W = random_orthogonal(rng, n)
        h = random_unit(rng, n)
        res = tomography(W, h)
        worst_exact = max(worst_exact, float(np.max(np.abs(res.recovered - W @ h))))
    W = random_orthogonal(rng, 8)
    worst_sampled = 0.0
    mse_small, mse_large = [], []
    for seed in range(20):
        h = random_unit(np.random.default_rng(3000 + seed), 8)
        y = W @ h
        big = tomography(W, h, shots=1_000_000, rng=np.random.default_rng(seed))
        small = tomography(W, h, shots=10_000, rng=np.random.default_rng(7000 + seed))
        worst_sampled = max(worst_sampled, float(np.max(np.abs(big.recovered - y))))
        mse_large.append(np.mean((big.recovered - y) ** 2))
        mse_small.append(np.mean((small.recovered - y) ** 2))
    ratio = float(np.sqrt(np.mean(mse_small) / np.mean(mse_large)))
    elapsed = time.time() - t0
    ok = worst_exact < 1e-9 and worst_sampled <= 5e-3 and 7.0 <= ratio <= 13.0 \
        and elapsed < 120
    report(2, ok, f"exact err {worst_exact:.2e}, sampled max err {worst_sampled:.2e}, "
                  f"x100-shot RMS ratio {ratio:.2f}, {elapsed:.1f}s")


# -- criterion 3: gradient oracles -------------------------------------------


def test_c3_gradient_oracles():
    t0 = time.time()
    rng = np.random.default_rng(3)
    # angle gradients of a single layer against central differences
    layer = PyramidLayer(6, 8, rng=rng)
    layer.thetas[:] = rng.normal(size=layer.thetas.size)
    h = rng.uniform(-0.8, 0.8, size=6)
    adj = rng.normal(size=8)
    from qospinn.layers import layer_backward
    out, tape = layer_forward(layer, h)
    _, tg, _ = layer_backward(layer, tape, adj)
    worst_layer = 0.0
    eps = 1e-5
    for k in rng.choice(tg.size, size=10, replace=False):
        old = layer.thetas[k]
        layer.thetas[k] = old + eps
        op, _ = layer_forward(layer, h)
        layer.thetas[k] = old - eps
        om, _ = layer_forward(layer, h)
        layer.thetas[k] = old
        fd = float(adj @ (op - om)) / (2 * eps)
        worst_layer = max(worst_layer, abs(fd - tg[k]) / max(1e-4, abs(fd)))

    # full-loss gradients on a tiny model (K=2, r=2, width 4, 3x3 grid)
    problem = make_problem("burgers_1d", n_ic=4, n_bc=3)
    model = build_spinn(2, [4, 4, 4, 2], problem.axis_ranges, seed=4)
    for s in model.subnets:
        for L in s.post_layers:
            L.W[:] = rng.normal(size=L.W.shape) * 0.5
    cfg = TrainConfig(collocation=6, epochs=1)
    plan = _Plan(problem, cfg.axis_counts(2), np.random.default_rng(5))
    params = dict(model.param_dict())
    _, grads = assemble_loss(model, problem, plan, cfg, params)
    worst_loss = 0.0
    for name, arr in params.items():
        flat = arr.ravel()
        g = grads[name].ravel()
        for k in rng.choice(flat.size, size=min(3, flat.size), replace=False):
            old = flat[k]
            flat[k] = old + eps
            tp, _ = assemble_loss(model, problem, plan, cfg, params)
            flat[k] = old - eps
            tm, _ = assemble_loss(model, problem, plan, cfg, params)
            flat[k] = old
            fd = (tp["total"] - tm["total"]) / (2 * eps)
            worst_loss = max(worst_loss, abs(fd - g[k]) / max(1e-4, abs(fd)))

    # jet derivatives against central differences
    net = model.subnets[0]
    xs = rng.uniform(-0.9, 0.9, size=9)
    _, d1, d2, _ = net.forward_jets(xs)
    fh = 1e-4
    vp = net.forward_values(xs + fh)
    vm = net.forward_values(xs - fh)
    v0 = net.forward_values(xs)
    fd1 = (vp - vm) / (2 * fh)
    fd2 = (vp - 2 * v0 + vm) / fh**2
    worst_d1 = float(np.max(np.abs(fd1 - d1) / np.maximum(1e-6, np.abs(fd1))))
    worst_d2 = float(np.max(np.abs(fd2 - d2) / np.maximum(1e-2, np.abs(fd2))))
    elapsed = time.time() - t0
    ok = worst_layer < 1e-4 and worst_loss < 1e-4 and worst_d1 < 1e-5 \
        and worst_d2 < 1e-4 and elapsed < 60
    report(3, ok, f"layer grad rel {worst_layer:.2e}, loss grad rel {worst_loss:.2e}, "
                  f"jet d1 rel {worst_d1:.2e}, d2 rel {worst_d2:.2e}, {elapsed:.1f}s")


# -- criterion 4: forward-pass counting --------------------------------------


def test_c4_forward_pass_counting():
    model = build_spinn(2, [6, 6, 5, 4], [(0, 1), (0, 1)], seed=6)
    n = 64
    model.reset_forward_count()
    model.predict_grid([np.linspace(0, 1, n), np.linspace(0, 1, n)])
    ok = model.forward_count == 2 * n
    report(4, ok, f"N x N grid with N = {n}: {model.forward_count} subnet passes "
                  f"(expected {2 * n})")


# -- criteria 5-9: trained experiments ----------------------------------------


@pytest.fixture(scope="session")
def trained_ad():
    problem = make_problem("advection_diffusion_1d")
    model = build_spinn(2, [16, 16, 16, 20], problem.axis_ranges, seed=0)
    cfg = TrainConfig(lr=5e-3, epochs=6000, collocation=250, seed=0,
                      log_every=1000, eval_every=0)
    result = train(model, problem, cfg)
    return problem, result


@pytest.fixture(scope="session")
def trained_burgers():
    problem = make_problem("burgers_1d")
    model = build_spinn(2, [20, 20, 32, 32], problem.axis_ranges, seed=0)
    cfg = TrainConfig(lr=5e-3, epochs=12000, collocation=280, seed=0,
                      log_every=2000, eval_every=0)
    result = train(model, problem, cfg)
    return problem, result


def test_c5_advection_diffusion_1d(trained_ad):
    problem, result = trained_ad
    axes = [np.linspace(0, 1, 101), np.linspace(0, 1, 101)]
    mse, _ = evaluate_model(result.model, problem, axes)
    ok = mse <= 5e-2 and result.wall_time < 900
    report(5, ok, f"architecture 2x[16,16,16,20], lr 5e-3, 250 points: "
                  f"MSE {mse:.3e} (bound 5e-2), {result.wall_time:.0f}s")


def test_c6_burgers_1d(trained_burgers):
    problem, result = trained_burgers
    oracle = problem.get_oracle()
    xs = np.linspace(0, 1, 41)
    ts = np.linspace(0, 1, 41)
    series_gap = float(np.max(np.abs(
        oracle.sample_grid(xs, ts) - burgers_reference(xs[:, None], ts[None, :]))))
    mse, _ = evaluate_model(result.model, problem)
    ok = series_gap < 5e-3 and mse <= 2e-2 and result.wall_time < 1200
    report(6, ok, f"series-vs-oracle gap {series_gap:.2e} (bound 5e-3); "
                  f"architecture 2x[20,20,32,32]: MSE {mse:.3e} (bound 2e-2), "
                  f"{result.wall_time:.0f}s")


@pytest.fixture(scope="session")
def trained_sine_gordon():
    problem = make_problem("sine_gordon_inverse", n_ic=192, n_bc=96)
    model = build_spinn(2, [16, 16, 32, 40], problem.axis_ranges, seed=0)
    cfg = TrainConfig(lr=8e-3, epochs=40000, collocation=800, seed=0,
                      log_every=5000, eval_every=0)
    result = train(model, problem, cfg)
    return problem, result


def test_c7_sine_gordon_inverse(trained_sine_gordon):
    problem, result = trained_sine_gordon
    beta = result.param_estimate.value
    ok = abs(beta - 0.25) <= 0.01 and result.wall_time < 1800
    report(7, ok, f"architecture 2x[16,16,32,40], lr 8e-3, init 1.0: "
                  f"beta_hat {beta:.4f} (target 0.25 +- 0.01), {result.wall_time:.0f}s")


def test_c8_lipschitz_verification(trained_burgers):
    problem, result = trained_burgers
    model = result.model
    bound = model_bound_report(model, samples=2000, pairs=100000, seed=8)
    # every orthogonal layer individually: contraction in lift space
    rng = np.random.default_rng(9)
    layer_ok = True
    for sub in model.subnets:
        for layer in sub.ortho_layers[1:]:  # hidden layers use the norm lift
            for _ in range(200):
                h1 = rng.uniform(-0.9, 0.9, size=layer.d_in)
                h2 = rng.uniform(-0.9, 0.9, size=layer.d_in)
                o1, _ = layer_forward(layer, h1)
                o2, _ = layer_forward(layer, h2)
                num = np.linalg.norm(o1 - o2)
                den = np.linalg.norm(preprocess_input(h1) - preprocess_input(h2))
                if num > den * (1 + 1e-9):
                    layer_ok = False
    spec_ok = all(abs(s - 1.0) < 1e-9 for s in bound.ortho_spectral_norms)
    ok = bound.bound_satisfied and layer_ok and spec_ok
    report(8, ok, f"empirical max ratio {bound.empirical_max_ratio:.3f} <= "
                  f"theorem-2 bound {bound.theorem2_bound:.3f} over 1e5 pairs; "
                  f"per-layer contraction {layer_ok}; "
                  f"orthogonal spectral norms == 1: {spec_ok}")


@pytest.fixture(scope="session")
def trained_uq(tmp_path_factory):
    model = UqSpinn([35, 35], [35, 35], [(0, 1), (0, 1)], feature_count=128,
                    gamma=0.05, ridge=1.0, seed=0)
    cfg = UqTrainConfig(lr=2e-3, epochs=12000, n_colloc=768, n_ic=128, n_bc=64,
                        seed=0, log_every=2000)
    train_uq(model, cfg)
    return model


def test_c9_uncertainty_quantification(trained_uq, tmp_path):
    model = trained_uq
    oracle = BurgersOracle()
    xs = np.linspace(0, 1, 101)
    eacs = {}
    rows = []
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        X = np.stack([xs, np.full_like(xs, t)], axis=1)
        mu, sd = model.predict(X, return_std=True)
        ref = oracle.sample(xs, t)
        err = np.abs(mu - ref)
        eacs[t] = eac(sd, err)
        rows.append(("QO-SPINN", t, float(np.mean(err**2)), float(err.max()), eacs[t]))
        assert np.all(sd >= 0.0)
    # sigma must rise outside the training domain (t > 1 extrapolation)
    rng = np.random.default_rng(10)
    Xin = rng.uniform([0, 0], [1, 1], size=(800, 2))
    Xout = rng.uniform([0, 1.05], [1, 1.5], size=(800, 2))
    _, sd_in = model.predict(Xin, return_std=True)
    _, sd_out = model.predict(Xout, return_std=True)

    # MC-dropout baseline: train briefly, predict, and emit the comparison CSV
    from qospinn.uq import DropoutSpinn, train_mc_baseline
    baseline = DropoutSpinn([100, 100], [100, 100], [(0, 1), (0, 1)],
                            p_drop=0.05, seed=0)
    bl_cfg = UqTrainConfig(lr=2e-3, epochs=3000, n_colloc=768, n_ic=128, n_bc=64,
                           seed=0, log_every=1000)
    train_mc_baseline(baseline, bl_cfg)
    mc_rng = np.random.default_rng(11)
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        X = np.stack([xs, np.full_like(xs, t)], axis=1)
        mu, sd = mc_dropout_predict(baseline, X, passes=100, rng=mc_rng)
        ref = oracle.sample(xs, t)
        err = np.abs(mu - ref)
        rows.append(("MC-Dropout", t, float(np.mean(err**2)), float(err.max()),
                     eac(sd, err)))
    csv_path = tmp_path / "uq_summary.csv"
    with open(csv_path, "w") as f:
        f.write("method,time,mse,max_error,eac\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")

    interior_ok = all(eacs[t] > 0.5 for t in (0.25, 0.5, 0.75))
    extrap_ok = float(sd_out.mean()) > float(sd_in.mean())
    ok = interior_ok and extrap_ok and csv_path.exists()
    report(9, ok, f"EAC at t=0.25/0.5/0.75: {eacs[0.25]:.3f}/{eacs[0.5]:.3f}/"
                  f"{eacs[0.75]:.3f} (need > 0.5); sigma out {sd_out.mean():.4f} > "
                  f"in {sd_in.mean():.4f}: {extrap_ok}; baseline CSV written")


# -- criterion 10: 2d advection-diffusion (slow suite) ------------------------


@pytest.mark.slow_suite
def test_c10_advection_diffusion_2d():
    problem = make_problem("advection_diffusion_2d", n_ic=48, n_bc=32)
    model = build_spinn(3, [16, 16, 16, 24], problem.axis_ranges, seed=0)
    cfg = TrainConfig(lr=1e-3, epochs=12000, colloc_per_axis=[64, 64, 64],
                      collocation=192, seed=0, log_every=2000, eval_every=0)
    result = train(model, problem, cfg)
    mse, _ = evaluate_model(result.model, problem)
    ok = mse <= 1e-1
    report(10, ok, f"architecture 3x[16,16,16,24]: MSE {mse:.3e} (bound 1e-1), "
                   f"{result.wall_time:.0f}s")
