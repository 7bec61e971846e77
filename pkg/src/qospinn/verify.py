"""Fast invariant suite behind the ``verify`` CLI subcommand.

Each check re-derives a structural property from scratch (independent
oracles where the property has one) and raises AssertionError on violation;
the runner prints one PASS/FAIL line per property.
"""

import numpy as np

from . import jets, layers, lipschitz, model, pde, training, unary, uq


def _random_unit(rng, n):
    h = rng.normal(size=n)
    return h / np.linalg.norm(h)


def check_norm_preservation():
    rng = np.random.default_rng(0)
    for n in (2, 5, 16):
        st = unary.UnaryState(_random_unit(rng, n))
        for _ in range(30):
            i = rng.integers(0, n - 1)
            st = unary.apply_rbs(st, unary.GateSpec(i, i + 1, rng.normal()))
            assert abs(st.norm() - 1.0) < 1e-9


def check_encode_round_trip():
    rng = np.random.default_rng(1)
    for n in (2, 3, 8, 16):
        for _ in range(25):
            h = _random_unit(rng, n)
            amps = unary.load_state(unary.encode_angles(h)).amplitudes
            assert np.max(np.abs(amps - h)) < 1e-9


def check_pyramid_counts():
    for n in range(2, 65):
        assert len(unary.pyramid_gate_sequence(n)) == n * (n - 1) // 2


def check_tomography_exact():
    rng = np.random.default_rng(2)
    for n in (2, 8, 32, 64):
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        h = _random_unit(rng, n)
        res = unary.tomography(Q, h)
        assert np.max(np.abs(res.recovered - Q @ h)) < 1e-9


def check_shot_scaling():
    rng = np.random.default_rng(3)
    n = 8
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    errs = {10_000: [], 1_000_000: []}
    for seed in range(8):
        h = _random_unit(np.random.default_rng(100 + seed), n)
        for shots in errs:
            r = unary.tomography(Q, h, shots=shots, rng=np.random.default_rng(seed))
            errs[shots].append(np.mean((r.recovered - Q @ h) ** 2))
    ratio = np.sqrt(np.mean(errs[10_000]) / np.mean(errs[1_000_000]))
    assert 7.0 < ratio < 13.0, f"shot-noise ratio {ratio:.2f} outside x10 +-30%"


def check_layer_orthogonality():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n_in = int(rng.integers(1, 12))
        n_out = int(rng.integers(2, 24))
        layer = layers.PyramidLayer(n_in, n_out, lift="sincos" if n_in == 1 else "norm", rng=rng)
        layer.thetas[:] = rng.normal(size=layer.thetas.size)
        W = layers.angles_to_matrix(layer)
        assert np.max(np.abs(W.T @ W - np.eye(layer.n))) < 1e-9


def check_mode_equivalence():
    rng = np.random.default_rng(5)
    for _ in range(50):
        d_in = int(rng.integers(2, 10))
        d_out = int(rng.integers(2, 12))
        layer = layers.PyramidLayer(d_in, d_out, rng=rng)
        layer.thetas[:] = rng.normal(size=layer.thetas.size)
        h = rng.uniform(-0.9, 0.9, size=d_in)
        om, _ = layers.layer_forward(layer, h, mode="matrix")
        oc, _ = layers.layer_forward(layer, h, mode="circuit_exact")
        assert np.max(np.abs(om - oc)) < 1e-9


def check_layer_contraction():
    # tanh(orthogonal@lift) never expands distances measured in lift space
    rng = np.random.default_rng(6)
    layer = layers.PyramidLayer(6, 6, rng=rng)
    layer.thetas[:] = rng.normal(size=layer.thetas.size)
    for _ in range(200):
        h1 = rng.uniform(-0.9, 0.9, size=6)
        h2 = rng.uniform(-0.9, 0.9, size=6)
        p1 = layers.preprocess_input(h1)
        p2 = layers.preprocess_input(h2)
        o1, _ = layers.layer_forward(layer, h1)
        o2, _ = layers.layer_forward(layer, h2)
        lhs = np.linalg.norm(o1 - o2)
        rhs = np.linalg.norm(p1 - p2)
        assert lhs <= rhs + 1e-9


def check_jet_derivatives():
    rng = np.random.default_rng(7)
    net = model.QoMlp([6, 6, 5, 4], rng)
    for L in net.post_layers:
        L.W[:] = rng.normal(size=L.W.shape) * 0.5
    xs = rng.uniform(-1, 1, size=9)
    v, d1, d2, _ = net.forward_jets(xs)
    h = 1e-4
    vp = net.forward_values(xs + h)
    vm = net.forward_values(xs - h)
    v0 = net.forward_values(xs)
    assert np.max(np.abs((vp - vm) / (2 * h) - d1) / np.maximum(1e-6, np.abs(d1))) < 1e-5
    fd2 = (vp - 2 * v0 + vm) / h**2
    assert np.max(np.abs(fd2 - d2) / np.maximum(1e-2, np.abs(fd2))) < 1e-4


def check_factorized_equals_pointwise():
    m = model.build_spinn(2, [5, 5, 4, 3], [(0, 1), (0, 1)], seed=8)
    ax = [np.linspace(0, 1, 5), np.linspace(0, 1, 6)]
    grid = m.predict_grid(ax)
    pts = np.array([[a, b] for a in ax[0] for b in ax[1]])
    assert np.max(np.abs(grid - m.predict_points(pts).reshape(5, 6))) < 1e-12


def check_forward_counter():
    m = model.build_spinn(2, [5, 5, 4, 3], [(0, 1), (0, 1)], seed=9)
    m.reset_forward_count()
    m.predict_grid([np.linspace(0, 1, 13), np.linspace(0, 1, 13)])
    assert m.forward_count == 26


def check_reference_residuals():
    # closed-form solutions must annihilate their residual operators
    xs = np.linspace(0, 1, 15)
    ts = np.linspace(0, 1, 15)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    jx = jets.Jet2.seed(X.ravel())
    jt_c = jets.Jet2.const(T.ravel())
    D, vel = 0.1, 0.4
    rate = D * np.pi**2 + vel**2 / (4 * D)

    def ad_jet(jx, jt):
        a = jets.jet_unary(jets.jet_unary(jx, "scale", vel / (2 * D)), "exp")
        b = jets.jet_unary(jets.jet_unary(jx, "scale", np.pi), "sin")
        c = jets.jet_unary(jets.jet_unary(jt, "scale", -rate), "exp")
        return a * b * c

    ux = ad_jet(jx, jt_c)
    ut = ad_jet(jets.Jet2.const(X.ravel()), jets.Jet2.seed(T.ravel()))
    assert np.max(np.abs(ut.d1 + vel * ux.d1 - D * ux.d2)) < 1e-6

    gam = 1.0 / np.sqrt(1 - 0.25)
    xs = np.linspace(-20, 20, 21)
    X, T = np.meshgrid(xs, np.linspace(0, 4, 9), indexing="ij")

    def kink_jet(jx, jt):
        arg = jets.jet_unary(jx - jt, "scale", gam)
        return jets.jet_unary(jets.jet_unary(jets.jet_unary(arg, "exp"), "arctan"), "scale", 4.0)

    kx = kink_jet(jets.Jet2.seed(X.ravel()), jets.Jet2.const(T.ravel()))
    kt = kink_jet(jets.Jet2.const(X.ravel()), jets.Jet2.seed(T.ravel()))
    assert np.max(np.abs(0.25 * kt.d2 - kx.d2 + np.sin(kx.v))) < 1e-6


def check_burgers_oracle_vs_series():
    oracle = pde.BurgersOracle(nu=0.05, nx=512, nt=2048)
    xs = np.linspace(0, 1, 21)
    ts = np.linspace(0, 1, 21)
    diff = oracle.sample_grid(xs, ts) - pde.burgers_reference(xs[:, None], ts[None, :])
    assert np.max(np.abs(diff)) < 5e-3


def check_adam_hand_step():
    p = {"w": np.array([0.0])}
    g = {"w": np.array([1.0])}
    st = training.AdamState.for_params(p)
    training.adam_step(p, g, st, lr=0.1)
    expected = -0.1 * 1.0 / (1.0 + 1e-8)
    assert abs(p["w"][0] - expected) < 1e-15


def check_training_determinism():
    problem = pde.make_problem("advection_diffusion_1d", n_ic=8, n_bc=8)
    cfg = training.TrainConfig(epochs=30, collocation=20, log_every=10,
                               eval_every=0, seed=11, lr=1e-3)
    h1 = training.train(model.build_spinn(2, [4, 4, 4, 3], problem.axis_ranges, seed=1),
                        problem, cfg).history
    h2 = training.train(model.build_spinn(2, [4, 4, 4, 3], problem.axis_ranges, seed=1),
                        problem, cfg).history
    for a, b in zip(h1, h2):
        assert a["loss_total"] == b["loss_total"]


def check_gp_posterior():
    rng = np.random.default_rng(12)
    Phi = rng.normal(size=(40, 24))
    S = uq.gp_posterior(Phi, ridge=1.0)
    direct = np.eye(24) - Phi.T @ np.linalg.solve(Phi @ Phi.T + np.eye(40), Phi)
    assert np.max(np.abs(S - direct)) < 1e-8
    assert np.min(np.linalg.eigvalsh(S)) > -1e-8
    head = uq.GpHead(6, feature_count=32, gamma=0.1, seed=1)
    head.Sigma = uq.gp_posterior(rng.normal(size=(20, 32)))
    for _ in range(200):
        _, s2 = uq.gp_predict(rng.normal(size=6), head)
        assert s2 >= 0.0


def check_eac_cases():
    assert uq.eac([1, 2, 3], [1, 2, 3]) == 1.0
    assert abs(uq.eac([1, 2, 3], [4, 3, 2]) + 1.0) < 1e-12
    assert uq.eac([1, 1, 1], [1, 2, 3]) == 0.0


def check_spectral_norms():
    rng = np.random.default_rng(13)
    assert abs(lipschitz.spectral_norm(np.eye(5)) - 1.0) < 1e-12
    assert abs(lipschitz.spectral_norm(np.diag([3.0, 1.0])) - 3.0) < 1e-9
    M = rng.normal(size=(20, 20))
    truth = np.sqrt(np.max(np.linalg.eigvalsh(M.T @ M)))
    assert abs(lipschitz.spectral_norm(M, iters=500) - truth) < 1e-6
    layer = layers.PyramidLayer(7, 7, rng=rng)
    layer.thetas[:] = rng.normal(size=layer.thetas.size)
    assert abs(lipschitz.spectral_norm(layers.angles_to_matrix(layer)) - 1.0) < 1e-9


def check_stacking_bounds():
    assert lipschitz.stacking_bounds([0.5, 0.9], [1.0, 2.0]) == (0.5, 2.0)
    assert lipschitz.theorem_bounds(2, [1.0, 1.0], [3.0, 4.0]) == 10.0


ALL_CHECKS = [
    ("unary.norm_preservation", check_norm_preservation),
    ("unary.encode_round_trip", check_encode_round_trip),
    ("unary.pyramid_counts", check_pyramid_counts),
    ("unary.tomography_exact", check_tomography_exact),
    ("unary.shot_noise_scaling", check_shot_scaling),
    ("layers.orthogonality", check_layer_orthogonality),
    ("layers.mode_equivalence", check_mode_equivalence),
    ("layers.lift_space_contraction", check_layer_contraction),
    ("jets.derivatives_vs_fd", check_jet_derivatives),
    ("model.factorized_equals_pointwise", check_factorized_equals_pointwise),
    ("model.forward_counter", check_forward_counter),
    ("pde.reference_residuals", check_reference_residuals),
    ("pde.burgers_oracle_vs_series", check_burgers_oracle_vs_series),
    ("trainer.adam_hand_step", check_adam_hand_step),
    ("trainer.determinism", check_training_determinism),
    ("uq.gp_posterior_woodbury_psd", check_gp_posterior),
    ("uq.eac_cases", check_eac_cases),
    ("lipschitz.spectral_norms", check_spectral_norms),
    ("lipschitz.stacking_and_theorem", check_stacking_bounds),
]


def run_all(out=print):
    failures = 0
    for name, fn in ALL_CHECKS:
        try:
            fn()
        except Exception as exc:  # report and keep going
            failures += 1
            out(f"FAIL {name}: {exc}")
        else:
            out(f"PASS {name}")
    return failures
