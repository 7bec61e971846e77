"""Uncertainty quantification: orthogonal residual blocks, a concatenation
trunk, and a random-Fourier-feature Gaussian-process output head.

The inner transform of every residual block is an angle-parameterized
orthogonal matrix, so its spectral norm is exactly 1 and each hidden layer
is bi-Lipschitz without any spectral-normalization step (there is none
anywhere in this module). The GP posterior over the head weights follows
Bayesian linear regression with a ridge-regularized feature Gram matrix;
its predictive variance is distance-aware in the input.
"""

from dataclasses import dataclass, field

import numpy as np

from .layers import PyramidLayer, ortho_backward_jets, ortho_forward_jets
from .model import QoMlp
from .validation import check_positive


# ---------------------------------------------------------------------------
# Residual blocks and stacks
# ---------------------------------------------------------------------------


class ResBlock:
    """Skip connection around one orthogonal layer: x + tanh(W lift(x) + b).

    ``input_scale`` < 1 is applied inside the lift for blocks deeper in a
    stack, where the running residual sum can exceed the lift domain.
    """

    def __init__(self, width, rng=None, input_scale=1.0):
        self.width = int(width)
        self.inner = PyramidLayer(width, width, lift="norm", rng=rng,
                                  input_scale=input_scale)

    def param_items(self, prefix):
        return [(f"{prefix}.thetas", self.inner.thetas), (f"{prefix}.bias", self.inner.bias)]

    def forward_jets(self, hv, h1, h2):
        av, a1, a2, tape = ortho_forward_jets(self.inner, hv, h1, h2, activation="tanh")
        return hv + av, h1 + a1, h2 + a2, tape

    def backward_jets(self, tape, dv, d1, d2):
        (iv, i1, i2), th_grad, b_grad = ortho_backward_jets(self.inner, tape, dv, d1, d2)
        return (dv + iv, d1 + i1, d2 + i2), th_grad, b_grad


class ResStack:
    """Entry orthogonal layer (tanh) followed by residual blocks."""

    def __init__(self, d_in, widths, rng, lift="norm", input_scale=1.0):
        widths = [int(w) for w in widths]
        if len(set(widths)) != 1:
            raise ValueError(f"residual stacks need one width, got {widths}")
        self.width = widths[0]
        self.entry = PyramidLayer(d_in, self.width, lift=lift, rng=rng,
                                  input_scale=input_scale)
        # block i consumes a residual sum of up to i unit-bounded terms
        self.blocks = [ResBlock(self.width, rng=rng, input_scale=1.0 / (i + 1))
                       for i in range(1, len(widths))]

    @property
    def out_bound(self):
        # entry tanh is in (-1, 1); every block adds another tanh
        return 1.0 + len(self.blocks)

    def param_items(self, prefix):
        items = [(f"{prefix}.entry.thetas", self.entry.thetas),
                 (f"{prefix}.entry.bias", self.entry.bias)]
        for bi, block in enumerate(self.blocks):
            items.extend(block.param_items(f"{prefix}.block{bi}"))
        return items

    def forward_jets(self, hv, h1, h2):
        tapes = []
        hv, h1, h2, tape = ortho_forward_jets(self.entry, hv, h1, h2, activation="tanh")
        tapes.append(tape)
        for block in self.blocks:
            hv, h1, h2, tape = block.forward_jets(hv, h1, h2)
            tapes.append(tape)
        return hv, h1, h2, tapes

    def backward_jets(self, tapes, dv, d1, d2, grads, prefix):
        for bi in range(len(self.blocks) - 1, -1, -1):
            (dv, d1, d2), th_g, b_g = self.blocks[bi].backward_jets(tapes[bi + 1], dv, d1, d2)
            grads[f"{prefix}.block{bi}.thetas"] += th_g
            grads[f"{prefix}.block{bi}.bias"] += b_g
        (dv, d1, d2), th_g, b_g = ortho_backward_jets(self.entry, tapes[0], dv, d1, d2)
        grads[f"{prefix}.entry.thetas"] += th_g
        grads[f"{prefix}.entry.bias"] += b_g
        return dv, d1, d2


# ---------------------------------------------------------------------------
# Random-feature GP head
# ---------------------------------------------------------------------------


class GpHead:
    """Frozen random Fourier features with a learnable linear readout.

    phi(h) = sqrt(2/D_L) * cos(sqrt(2 gamma) W_L h + b_L) approximates an
    RBF kernel of scale gamma; the readout weights get a Gaussian posterior
    whose covariance comes from ridge-regularized Bayesian linear regression.
    """

    def __init__(self, d_hidden, feature_count=128, gamma=0.05, ridge=1.0, seed=0,
                 hidden_scale=None):
        check_positive(feature_count, "feature_count")
        check_positive(gamma, "gamma")
        check_positive(ridge, "ridge")
        rng = np.random.default_rng(seed)
        self.d_hidden = int(d_hidden)
        self.D_L = int(feature_count)
        self.gamma = float(gamma)
        self.ridge = float(ridge)
        # hidden activations of an orthogonal stack live near the unit sphere
        # (components O(1/sqrt(d))); rescaling them to O(1) puts the kernel
        # scale gamma in its usual regime. A fixed scalar keeps bi-Lipschitzness.
        self.hidden_scale = 1.0 if hidden_scale is None else float(hidden_scale)
        W = rng.standard_normal((self.D_L, self.d_hidden))
        b = rng.uniform(0.0, 2.0 * np.pi, size=self.D_L)
        W.setflags(write=False)
        b.setflags(write=False)
        self.W_L = W
        self.b_L = b
        # draw the readout from its N(0, I) prior: keeps initial outputs O(1)
        # and lets gradients reach the network from the first step
        self.beta_hat = rng.standard_normal(self.D_L)
        self.Sigma = None

    @property
    def scale(self):
        return np.sqrt(2.0 / self.D_L)

    @property
    def freq_scale(self):
        return np.sqrt(2.0 * self.gamma) * self.hidden_scale

    def param_items(self, prefix):
        return [(f"{prefix}.beta_hat", self.beta_hat)]

    def forward_jets(self, hv, h1, h2):
        zv = self.freq_scale * (hv @ self.W_L.T) + self.b_L
        z1 = self.freq_scale * (h1 @ self.W_L.T)
        z2 = self.freq_scale * (h2 @ self.W_L.T)
        cv, sv = np.cos(zv), np.sin(zv)
        pv = self.scale * cv
        p1 = self.scale * (-sv * z1)
        p2 = self.scale * (-cv * z1 * z1 - sv * z2)
        mu_v = pv @ self.beta_hat
        mu_1 = p1 @ self.beta_hat
        mu_2 = p2 @ self.beta_hat
        tape = (hv, h1, h2, zv, z1, z2, cv, sv, pv, p1, p2)
        return (mu_v, mu_1, mu_2), tape

    def backward_jets(self, tape, dmu_v, dmu_1, dmu_2):
        hv, h1, h2, zv, z1, z2, cv, sv, pv, p1, p2 = tape
        beta_grad = pv.T @ dmu_v + p1.T @ dmu_1 + p2.T @ dmu_2
        dpv = np.outer(dmu_v, self.beta_hat)
        dp1 = np.outer(dmu_1, self.beta_hat)
        dp2 = np.outer(dmu_2, self.beta_hat)
        # chain through pv/p1/p2 as functions of (zv, z1, z2)
        dzv = self.scale * (-dpv * sv - dp1 * cv * z1 + dp2 * (sv * z1 * z1 - cv * z2))
        dz1 = self.scale * (-dp1 * sv - dp2 * 2.0 * cv * z1)
        dz2 = self.scale * (-dp2 * sv)
        dhv = self.freq_scale * (dzv @ self.W_L)
        dh1 = self.freq_scale * (dz1 @ self.W_L)
        dh2 = self.freq_scale * (dz2 @ self.W_L)
        return (dhv, dh1, dh2), beta_grad


def rff_features(h, head):
    """Feature map phi(h) for one hidden vector or a batch of them."""
    h = np.asarray(h, dtype=float)
    z = head.freq_scale * (h @ head.W_L.T) + head.b_L
    return head.scale * np.cos(z)


def gp_posterior(phi_train, ridge=1.0):
    """Posterior covariance of the readout weights.

    Sigma = I - Phi^T (Phi Phi^T + ridge I)^-1 Phi, computed through the
    Woodbury-equivalent D_L-sided form ridge * (ridge I + Phi^T Phi)^-1.
    """
    check_positive(ridge, "ridge")
    phi_train = np.asarray(phi_train, dtype=float)
    if phi_train.ndim != 2:
        raise ValueError("phi_train must be (n_points, D_L)")
    n, d = phi_train.shape
    if n == 0:
        return np.eye(d)
    A = ridge * np.eye(d) + phi_train.T @ phi_train
    try:
        sigma = ridge * np.linalg.solve(A, np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"posterior solve failed (ridge={ridge}): {exc}") from exc
    return 0.5 * (sigma + sigma.T)


def gp_predict(h_star, head):
    """Predictive mean and variance at a hidden vector (or batch)."""
    if head.Sigma is None:
        raise ValueError("posterior covariance not computed; call fit_posterior first")
    phi = rff_features(h_star, head)
    mu = phi @ head.beta_hat
    if phi.ndim == 1:
        sigma2 = float(phi @ head.Sigma @ phi)
        return mu, max(sigma2, 0.0)
    sigma2 = np.einsum("nd,de,ne->n", phi, head.Sigma, phi)
    return mu, np.clip(sigma2, 0.0, None)


def eac(sigmas, errors):
    """Error-aware coefficient: Pearson correlation of sigma against |error|.

    Returns 0 when either sample variance is below 1e-30.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if sigmas.shape != errors.shape:
        raise ValueError("sigma and error sequences must have equal length")
    if sigmas.size < 2:
        raise ValueError("need at least two points")
    vs = np.var(sigmas)
    ve = np.var(errors)
    if vs < 1e-30 or ve < 1e-30:
        return 0.0
    cov = np.mean((sigmas - sigmas.mean()) * (errors - errors.mean()))
    return float(cov / np.sqrt(vs * ve))


# ---------------------------------------------------------------------------
# Concatenation-trunk model
# ---------------------------------------------------------------------------


class UqSpinn:
    """Per-axis residual subnets, concatenated, trunked, and read by the GP.

    Derivatives w.r.t. one axis come from seeding that axis's jet lane; the
    other subnets contribute constant lanes. Axis inputs are normalized to
    [-1, 1] exactly as in the product-sum model.
    """

    def __init__(self, subnet_widths, trunk_widths, axis_ranges,
                 feature_count=128, gamma=0.05, ridge=1.0, seed=0):
        rng = np.random.default_rng(seed)
        self.axis_ranges = [(float(lo), float(hi)) for lo, hi in axis_ranges]
        k = len(axis_ranges)
        self.subnets = [ResStack(1, subnet_widths, rng, lift="sincos") for _ in range(k)]
        concat_dim = sum(s.width for s in self.subnets)
        bound = max(s.out_bound for s in self.subnets)
        self.trunk = ResStack(concat_dim, trunk_widths, rng, lift="norm",
                              input_scale=1.0 / bound)
        self.head = GpHead(self.trunk.width, feature_count=feature_count,
                           gamma=gamma, ridge=ridge,
                           seed=int(rng.integers(2**31)),
                           hidden_scale=float(np.sqrt(self.trunk.width)))
        self.forward_count = 0

    @property
    def n_axes(self):
        return len(self.subnets)

    def axis_scale(self, j):
        lo, hi = self.axis_ranges[j]
        return 2.0 / (hi - lo)

    def normalize_axis(self, j, x):
        lo, hi = self.axis_ranges[j]
        return (2.0 * np.asarray(x, dtype=float) - (lo + hi)) / (hi - lo)

    def param_items(self):
        items = []
        for k, sub in enumerate(self.subnets):
            items.extend(sub.param_items(f"sub{k}"))
        items.extend(self.trunk.param_items("trunk"))
        items.extend(self.head.param_items("head"))
        return items

    def param_dict(self):
        return dict(self.param_items())

    def forward_jets(self, X, seed_axis):
        """Jet lanes of mu at points X (n, K), seeded along ``seed_axis``."""
        X = np.asarray(X, dtype=float)
        n, k = X.shape
        self.forward_count += n * k
        sub_out = []
        sub_tapes = []
        for j in range(k):
            xj = self.normalize_axis(j, X[:, j]).reshape(-1, 1)
            if j == seed_axis:
                d1 = np.full_like(xj, self.axis_scale(j))
            else:
                d1 = np.zeros_like(xj)
            d2 = np.zeros_like(xj)
            hv, h1, h2, tapes = self.subnets[j].forward_jets(xj, d1, d2)
            sub_out.append((hv, h1, h2))
            sub_tapes.append(tapes)
        cv = np.concatenate([o[0] for o in sub_out], axis=1)
        c1 = np.concatenate([o[1] for o in sub_out], axis=1)
        c2 = np.concatenate([o[2] for o in sub_out], axis=1)
        tv, t1, t2, trunk_tapes = self.trunk.forward_jets(cv, c1, c2)
        (mu_v, mu_1, mu_2), head_tape = self.head.forward_jets(tv, t1, t2)
        tape = (sub_tapes, trunk_tapes, head_tape, tv)
        return (mu_v, mu_1, mu_2), tape

    def backward_jets(self, tape, dmu_v, dmu_1, dmu_2, grads):
        sub_tapes, trunk_tapes, head_tape, _ = tape
        (dv, d1, d2), beta_grad = self.head.backward_jets(head_tape, dmu_v, dmu_1, dmu_2)
        grads["head.beta_hat"] += beta_grad
        dv, d1, d2 = self.trunk.backward_jets(trunk_tapes, dv, d1, d2, grads, "trunk")
        start = 0
        for j, sub in enumerate(self.subnets):
            w = sub.width
            sub.backward_jets(sub_tapes[j], dv[:, start:start + w],
                              d1[:, start:start + w], d2[:, start:start + w],
                              grads, f"sub{j}")
            start += w

    def hidden_features(self, X):
        """Trunk output (hidden representation) at points X, value lanes only."""
        (mu, _, _), tape = self.forward_jets(np.asarray(X, dtype=float), seed_axis=0)
        return tape[3], mu

    def fit_posterior(self, X):
        """Compute and store the readout posterior covariance from points X."""
        hidden, _ = self.hidden_features(X)
        phi = rff_features(hidden, self.head)
        self.head.Sigma = gp_posterior(phi, self.head.ridge)
        return self.head.Sigma

    def predict(self, X, return_std=False):
        hidden, mu = self.hidden_features(X)
        if not return_std:
            return mu
        _, sigma2 = gp_predict(hidden, self.head)
        return mu, np.sqrt(sigma2)


def concat_forward(model, x):
    """(mu, sigma2, hidden) of the concatenation model at one input point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    hidden, mu = model.hidden_features(x)
    _, sigma2 = gp_predict(hidden, model.head)
    return float(mu[0]), float(sigma2[0]), hidden[0]


# ---------------------------------------------------------------------------
# Physics-informed UQ training on Burgers
# ---------------------------------------------------------------------------


@dataclass
class UqTrainConfig:
    lr: float = 5e-4
    epochs: int = 6000
    n_colloc: int = 1024      # scattered (x, t) pairs; the trunk sees pairs anyway
    n_ic: int = 128
    n_bc: int = 64
    lambda_res: float = 1.0
    lambda_ic: float = 10.0
    lambda_bc: float = 10.0
    beta_l2: float = 1e-6
    resample_every: int = 200
    seed: int = 0
    log_every: int = 500
    nu: float = 0.05

    def __post_init__(self):
        check_positive(self.lr, "lr")
        check_positive(self.epochs, "epochs")


def _uq_sample(cfg, rng):
    colloc = rng.uniform(0.0, 1.0, size=(cfg.n_colloc, 2))
    x_ic = rng.uniform(0.0, 1.0, size=cfg.n_ic)
    t_bc = rng.uniform(0.0, 1.0, size=cfg.n_bc)
    return colloc, x_ic, t_bc


def uq_loss_and_grads(model, cfg, colloc, x_ic, t_bc, params):
    """Burgers physics loss of the concatenation model at scattered pairs."""
    nu = cfg.nu
    n_c, n_i, n_b = len(colloc), len(x_ic), len(t_bc)
    # x-seeded pass over collocation + IC + both periodic boundary columns
    X_x = np.concatenate([
        colloc,
        np.stack([x_ic, np.zeros(n_i)], axis=1),
        np.stack([np.zeros(n_b), t_bc], axis=1),
        np.stack([np.ones(n_b), t_bc], axis=1),
    ])
    (uv, ux, uxx), tape_x = model.forward_jets(X_x, seed_axis=0)
    # t-seeded pass over collocation only
    (utv, ut, _), tape_t = model.forward_jets(colloc, seed_axis=1)

    sl_c = slice(0, n_c)
    sl_i = slice(n_c, n_c + n_i)
    sl_b0 = slice(n_c + n_i, n_c + n_i + n_b)
    sl_b1 = slice(n_c + n_i + n_b, n_c + n_i + 2 * n_b)

    r = ut + uv[sl_c] * ux[sl_c] - nu * uxx[sl_c]
    loss_res = float(np.mean(r * r))
    e_ic = uv[sl_i] - np.sin(2.0 * np.pi * x_ic)
    loss_ic = float(np.mean(e_ic * e_ic))
    e_bv = uv[sl_b0] - uv[sl_b1]
    e_bs = ux[sl_b0] - ux[sl_b1]
    loss_bc = float(np.mean(e_bv * e_bv) + np.mean(e_bs * e_bs))
    beta = params["head.beta_hat"]
    loss = cfg.lambda_res * loss_res + cfg.lambda_ic * loss_ic \
        + cfg.lambda_bc * loss_bc + cfg.beta_l2 * float(beta @ beta)

    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    rbar = (2.0 * cfg.lambda_res / n_c) * r
    # x-pass adjoints
    dmu_v = np.zeros_like(uv)
    dmu_1 = np.zeros_like(ux)
    dmu_2 = np.zeros_like(uxx)
    dmu_v[sl_c] += rbar * ux[sl_c]
    dmu_1[sl_c] += rbar * uv[sl_c]
    dmu_2[sl_c] += -nu * rbar
    dmu_v[sl_i] += (2.0 * cfg.lambda_ic / n_i) * e_ic
    bvbar = (2.0 * cfg.lambda_bc / n_b) * e_bv
    bsbar = (2.0 * cfg.lambda_bc / n_b) * e_bs
    dmu_v[sl_b0] += bvbar
    dmu_v[sl_b1] -= bvbar
    dmu_1[sl_b0] += bsbar
    dmu_1[sl_b1] -= bsbar
    model.backward_jets(tape_x, dmu_v, dmu_1, dmu_2, grads)
    # t-pass adjoints: only u_t feeds the residual
    model.backward_jets(tape_t, np.zeros_like(utv), rbar, np.zeros_like(utv), grads)
    grads["head.beta_hat"] += 2.0 * cfg.beta_l2 * beta
    terms = {"total": loss, "res": loss_res, "ic": loss_ic, "bc": loss_bc}
    return terms, grads


def train_uq(model, cfg, callback=None):
    """Train the concatenation model on the Burgers physics loss, then fit
    the readout posterior over the final collocation/IC/BC point set."""
    from .training import AdamState, adam_step  # local import avoids a cycle

    rng = np.random.default_rng(cfg.seed)
    params = model.param_dict()
    state = AdamState.for_params(params)
    history = []
    batch = None
    for epoch in range(cfg.epochs):
        if batch is None or (cfg.resample_every > 0 and epoch % cfg.resample_every == 0):
            batch = _uq_sample(cfg, rng)
        terms, grads = uq_loss_and_grads(model, cfg, *batch, params)
        if not np.isfinite(terms["total"]):
            raise RuntimeError(f"UQ loss became non-finite at epoch {epoch}: {terms}")
        adam_step(params, grads, state, cfg.lr)
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1:
            row = {"epoch": epoch, **terms}
            history.append(row)
            if callback is not None:
                callback(row)
    colloc, x_ic, t_bc = batch
    fit_pts = np.concatenate([
        colloc,
        np.stack([x_ic, np.zeros_like(x_ic)], axis=1),
        np.stack([np.zeros_like(t_bc), t_bc], axis=1),
        np.stack([np.ones_like(t_bc), t_bc], axis=1),
    ])
    model.fit_posterior(fit_pts)
    return history


# ---------------------------------------------------------------------------
# Monte-Carlo-dropout baseline (conventional dense separable net)
# ---------------------------------------------------------------------------


class DropoutSpinn:
    """Dense concat-trunk separable network with unit dropout on hidden layers."""

    def __init__(self, subnet_widths, trunk_widths, axis_ranges, p_drop=0.05, seed=0):
        from .layers import DenseLayer

        rng = np.random.default_rng(seed)
        self.axis_ranges = [(float(lo), float(hi)) for lo, hi in axis_ranges]
        k = len(axis_ranges)
        self.p_drop = float(p_drop)
        self.activation = "tanh"
        self.subnets = []
        for _ in range(k):
            layers = []
            d_prev = 1
            for w in subnet_widths:
                layers.append(DenseLayer(d_prev, w, rng=rng))
                d_prev = w
            self.subnets.append(layers)
        concat_dim = k * subnet_widths[-1]
        self.trunk = []
        d_prev = concat_dim
        for w in trunk_widths:
            self.trunk.append(DenseLayer(d_prev, w, rng=rng))
            d_prev = w
        self.out = DenseLayer(d_prev, 1, rng=rng)

    @property
    def n_axes(self):
        return len(self.subnets)

    def normalize_axis(self, j, x):
        lo, hi = self.axis_ranges[j]
        return (2.0 * np.asarray(x, dtype=float) - (lo + hi)) / (hi - lo)

    def axis_scale(self, j):
        lo, hi = self.axis_ranges[j]
        return 2.0 / (hi - lo)

    def param_items(self):
        items = []
        for k, layers in enumerate(self.subnets):
            for li, L in enumerate(layers):
                items.append((f"sub{k}.dense{li}.W", L.W))
                items.append((f"sub{k}.dense{li}.bias", L.bias))
        for li, L in enumerate(self.trunk):
            items.append((f"trunk.dense{li}.W", L.W))
            items.append((f"trunk.dense{li}.bias", L.bias))
        items.append(("out.W", self.out.W))
        items.append(("out.bias", self.out.bias))
        return items

    def param_dict(self):
        return dict(self.param_items())

    def sample_masks(self, rng, n_rows=1):
        """Inverted-scaling dropout masks, one per hidden layer."""
        if self.p_drop <= 0.0:
            return None
        keep = 1.0 - self.p_drop
        masks = []
        for k in range(self.n_axes):
            for L in self.subnets[k]:
                masks.append(rng.binomial(1, keep, size=L.d_out) / keep)
        for L in self.trunk:
            masks.append(rng.binomial(1, keep, size=L.d_out) / keep)
        return masks

    def forward_jets(self, X, seed_axis, masks=None, activation=None):
        activation = self.activation if activation is None else activation
        X = np.asarray(X, dtype=float)
        n, k = X.shape
        mi = 0
        tapes = []
        sub_out = []
        for j in range(k):
            xj = self.normalize_axis(j, X[:, j]).reshape(-1, 1)
            d1 = np.full_like(xj, self.axis_scale(j)) if j == seed_axis else np.zeros_like(xj)
            hv, h1, h2 = xj, d1, np.zeros_like(xj)
            for L in self.subnets[j]:
                hv, h1, h2, tape = L.forward_jets(hv, h1, h2, activation=activation)
                mask = None if masks is None else masks[mi]
                mi += 1
                if mask is not None:
                    hv, h1, h2 = hv * mask, h1 * mask, h2 * mask
                tapes.append((L, tape, mask))
            sub_out.append((hv, h1, h2))
        hv = np.concatenate([o[0] for o in sub_out], axis=1)
        h1 = np.concatenate([o[1] for o in sub_out], axis=1)
        h2 = np.concatenate([o[2] for o in sub_out], axis=1)
        for L in self.trunk:
            hv, h1, h2, tape = L.forward_jets(hv, h1, h2, activation=activation)
            mask = None if masks is None else masks[mi]
            mi += 1
            if mask is not None:
                hv, h1, h2 = hv * mask, h1 * mask, h2 * mask
            tapes.append((L, tape, mask))
        hv, h1, h2, tape = self.out.forward_jets(hv, h1, h2, activation="identity")
        tapes.append((self.out, tape, None))
        return (hv[:, 0], h1[:, 0], h2[:, 0]), tapes

    def backward_jets(self, tapes, dv, d1, d2, grads):
        dv = dv[:, None]
        d1 = d1[:, None]
        d2 = d2[:, None]
        # trunk+out part is sequential; subnet parts split the concat adjoint
        L, tape, _ = tapes[-1]
        (dv, d1, d2), w_g, b_g = L.backward_jets(tape, dv, d1, d2)
        grads["out.W"] += w_g
        grads["out.bias"] += b_g
        ti = len(tapes) - 2
        for li in range(len(self.trunk) - 1, -1, -1):
            L, tape, mask = tapes[ti]
            ti -= 1
            if mask is not None:
                dv, d1, d2 = dv * mask, d1 * mask, d2 * mask
            (dv, d1, d2), w_g, b_g = L.backward_jets(tape, dv, d1, d2)
            grads[f"trunk.dense{li}.W"] += w_g
            grads[f"trunk.dense{li}.bias"] += b_g
        widths = [self.subnets[k][-1].d_out for k in range(self.n_axes)]
        start = 0
        splits = []
        for w in widths:
            splits.append((start, start + w))
            start += w
        per_axis = [(dv[:, a:b], d1[:, a:b], d2[:, a:b]) for a, b in splits]
        # subnet tapes are stored axis-major at the front of the tape list
        pos = 0
        for k in range(self.n_axes):
            n_l = len(self.subnets[k])
            sdv, sd1, sd2 = per_axis[k]
            for li in range(n_l - 1, -1, -1):
                L, tape, mask = tapes[pos + li]
                if mask is not None:
                    sdv, sd1, sd2 = sdv * mask, sd1 * mask, sd2 * mask
                (sdv, sd1, sd2), w_g, b_g = L.backward_jets(tape, sdv, sd1, sd2)
                grads[f"sub{k}.dense{li}.W"] += w_g
                grads[f"sub{k}.dense{li}.bias"] += b_g
            pos += n_l

    def predict(self, X, masks=None):
        (v, _, _), _ = self.forward_jets(np.asarray(X, dtype=float), seed_axis=0, masks=masks)
        return v


def mc_dropout_predict(model, X, passes, p_drop=None, rng=None):
    """Monte-Carlo dropout: sample mean and std over ``passes`` stochastic passes."""
    if passes < 2:
        raise ValueError("need at least 2 stochastic passes")
    if rng is None:
        raise ValueError("mc_dropout_predict requires a seeded rng")
    if p_drop is not None:
        model.p_drop = float(p_drop)
    X = np.asarray(X, dtype=float)
    outs = np.empty((passes, X.shape[0]))
    for p in range(passes):
        masks = model.sample_masks(rng)
        outs[p] = model.predict(X, masks=masks)
    return outs.mean(axis=0), outs.std(axis=0)


def train_mc_baseline(model, cfg, callback=None):
    """Train the dense baseline on the same Burgers loss, dropout active."""
    from .training import AdamState, adam_step

    rng = np.random.default_rng(cfg.seed)
    params = model.param_dict()
    state = AdamState.for_params(params)
    history = []
    batch = None
    nu = cfg.nu
    for epoch in range(cfg.epochs):
        if batch is None or (cfg.resample_every > 0 and epoch % cfg.resample_every == 0):
            batch = _uq_sample(cfg, rng)
        colloc, x_ic, t_bc = batch
        masks = model.sample_masks(rng)
        n_c, n_i, n_b = len(colloc), len(x_ic), len(t_bc)
        X_x = np.concatenate([
            colloc,
            np.stack([x_ic, np.zeros(n_i)], axis=1),
            np.stack([np.zeros(n_b), t_bc], axis=1),
            np.stack([np.ones(n_b), t_bc], axis=1),
        ])
        (uv, ux, uxx), tape_x = model.forward_jets(X_x, seed_axis=0, masks=masks)
        (utv, ut, _), tape_t = model.forward_jets(colloc, seed_axis=1, masks=masks)
        sl_c = slice(0, n_c)
        sl_i = slice(n_c, n_c + n_i)
        sl_b0 = slice(n_c + n_i, n_c + n_i + n_b)
        sl_b1 = slice(n_c + n_i + n_b, n_c + n_i + 2 * n_b)
        r = ut + uv[sl_c] * ux[sl_c] - nu * uxx[sl_c]
        e_ic = uv[sl_i] - np.sin(2.0 * np.pi * x_ic)
        e_bv = uv[sl_b0] - uv[sl_b1]
        e_bs = ux[sl_b0] - ux[sl_b1]
        loss = cfg.lambda_res * np.mean(r * r) + cfg.lambda_ic * np.mean(e_ic**2) \
            + cfg.lambda_bc * (np.mean(e_bv**2) + np.mean(e_bs**2))
        if not np.isfinite(loss):
            raise RuntimeError(f"baseline loss became non-finite at epoch {epoch}")
        grads = {name: np.zeros_like(arr) for name, arr in params.items()}
        rbar = (2.0 * cfg.lambda_res / n_c) * r
        dmu_v = np.zeros_like(uv)
        dmu_1 = np.zeros_like(ux)
        dmu_2 = np.zeros_like(uxx)
        dmu_v[sl_c] += rbar * ux[sl_c]
        dmu_1[sl_c] += rbar * uv[sl_c]
        dmu_2[sl_c] += -nu * rbar
        dmu_v[sl_i] += (2.0 * cfg.lambda_ic / n_i) * e_ic
        bvbar = (2.0 * cfg.lambda_bc / n_b) * e_bv
        bsbar = (2.0 * cfg.lambda_bc / n_b) * e_bs
        dmu_v[sl_b0] += bvbar
        dmu_v[sl_b1] -= bvbar
        dmu_1[sl_b0] += bsbar
        dmu_1[sl_b1] -= bsbar
        model.backward_jets(tape_x, dmu_v, dmu_1, dmu_2, grads)
        model.backward_jets(tape_t, np.zeros_like(utv), rbar, np.zeros_like(utv), grads)
        adam_step(params, grads, state, cfg.lr)
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1:
            row = {"epoch": epoch, "total": float(loss)}
            history.append(row)
            if callback is not None:
                callback(row)
    return history
