"""Orthogonal layers parameterized in RBS-angle space, plus dense layers.

A :class:`PyramidLayer` lifts its input onto the unit sphere (norm lift or
[sin, cos] scalar lift), zero-pads to ``n = max(d_in + 1, d_out)`` wires,
applies the pyramid rotation cascade (a point of SO(n) for any angles), and
truncates to ``d_out`` before bias and activation. Parameters are the gate
angles, so the transform stays exactly orthogonal under any update.

Forward/backward come in two flavors: the per-vector ``layer_forward`` /
``layer_backward`` pair with a per-gate tape (O(1) work per gate in the
backward sweep), and batched "lane" versions that push order-2 jet triples
(value, d1, d2) through the layer for physics-informed training.
"""

from dataclasses import dataclass, field

import numpy as np

from .unary import (
    apply_gate_slots,
    backward_gate_slots,
    gate_slots,
    pyramid_gate_sequence,
    tomography_from_amplitudes,
)
from .validation import as_float_array

SQRT6 = np.sqrt(6.0)


def first_layer_encode(x):
    """Scalar entry encoding [sin(x), cos(x)]; unit norm by construction."""
    x = np.asarray(x, dtype=float)
    return np.stack([np.sin(x), np.cos(x)], axis=-1)


def preprocess_input(h):
    """Lift h in R^d to the unit vector [h/sqrt(d), sqrt(1 - sum(h^2)/d)].

    Requires sum(h_i^2) <= d, which holds whenever h comes out of a tanh.
    """
    h = as_float_array(h, "h", ndim=1)
    d = h.shape[0]
    s = float(np.dot(h, h))
    if s > d * (1.0 + 1e-12):
        raise ValueError(f"preprocess domain error: sum(h^2) = {s:.6g} > d = {d}")
    tail = np.sqrt(max(1.0 - s / d, 0.0))
    return np.concatenate([h / np.sqrt(d), [tail]])


class PyramidLayer:
    """Angle-parameterized orthogonal transform with bias and activation.

    ``lift`` selects the input embedding: "norm" for the d -> d+1 unit lift,
    "sincos" for the scalar [sin, cos] entry encoding (d_in must be 1).
    ``input_scale`` rescales the input before the norm lift; stacks feeding
    unbounded activations (residual blocks) use it to stay inside the lift
    domain.
    """

    def __init__(self, d_in, d_out, lift="norm", rng=None, input_scale=1.0):
        if lift == "sincos" and d_in != 1:
            raise ValueError("sincos lift requires scalar input")
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        self.lift = lift
        self.input_scale = float(input_scale)
        self.n = max(self.d_in + 1, self.d_out)
        self.gates = pyramid_gate_sequence(self.n)
        self.slots = gate_slots(self.gates)
        n_angles = len(self.gates)
        if rng is None:
            self.thetas = np.zeros(n_angles)
        else:
            lim = np.pi / (2.0 * self.n)  # keeps W near identity at init
            self.thetas = rng.uniform(-lim, lim, size=n_angles)
        self.bias = np.zeros(self.d_out)

    @property
    def lift_dim(self):
        return self.d_in + 1

    def n_params(self):
        return self.thetas.size + self.bias.size


def angles_to_matrix(layer):
    """Materialize the layer's orthogonal matrix W = G_T ... G_1.

    Column k of W equals the rotation cascade run on basis state e_k.
    """
    eye = np.eye(layer.n)
    wt = apply_gate_slots(eye, layer.thetas, layer.slots)
    return wt.T


@dataclass
class LayerTape:
    """Cached forward intermediates for the per-vector backward sweep."""

    layer: PyramidLayer
    h: np.ndarray
    pair_cache: list  # per gate, in application order: (a_lo, a_hi) before rotation
    p: np.ndarray  # lifted, padded circuit input
    z: np.ndarray  # pre-activation output (length d_out)
    activation: str
    mode: str = "matrix"
    lift_cache: tuple = None


def _run_gates_with_pairs(p, thetas, gates):
    amps = p.copy()
    pairs = []
    for (i, j), t in zip(gates, thetas):
        c, s = np.cos(t), np.sin(t)
        a, b = amps[i], amps[j]
        pairs.append((a, b))
        amps[i] = c * a + s * b
        amps[j] = c * b - s * a
    return amps, pairs


def _lift_value(layer, h):
    """Value-only lift; returns (padded p, cache for the backward pass)."""
    hv = np.asarray(h, dtype=float).reshape(1, -1)
    pv, _, _, cache = _lift_jets(layer, hv, np.zeros_like(hv), np.zeros_like(hv))
    return pv[0], cache


def layer_forward(layer, h, mode="matrix", activation="tanh", shots=None, rng=None):
    """Run one orthogonal layer on a single input vector.

    mode "matrix" applies the materialized W; "circuit_exact" runs the gate
    cascade and the exact tomography recovery; "circuit_sampled" draws
    ``shots`` samples from the tomography distribution (seeded ``rng``
    required). Returns (output, LayerTape).
    """
    h = as_float_array(h, "h", ndim=1)
    if h.shape[0] != layer.d_in:
        raise ValueError(f"expected input of length {layer.d_in}, got {h.shape[0]}")
    p, lift_cache = _lift_value(layer, h)
    # The pair cache is always produced by the cascade; in matrix mode the
    # output itself comes from the materialized W (independent code path).
    y_circuit, pairs = _run_gates_with_pairs(p, layer.thetas, layer.gates)
    if mode == "matrix":
        y = angles_to_matrix(layer) @ p
    elif mode == "circuit_exact":
        y = tomography_from_amplitudes(y_circuit).recovered
    elif mode == "circuit_sampled":
        y = tomography_from_amplitudes(y_circuit, shots=shots, rng=rng).recovered
    else:
        raise ValueError(f"unknown mode {mode!r}")
    z = y[: layer.d_out] + layer.bias
    if activation == "tanh":
        out = np.tanh(z)
    elif activation == "identity":
        out = z.copy()
    else:
        raise ValueError(f"unknown activation {activation!r}")
    tape = LayerTape(layer, h.copy(), pairs, p, z, activation, mode, lift_cache)
    return out, tape


def layer_backward(layer, tape, adjoint):
    """Reverse sweep through the gate list; O(1) per gate.

    Returns (input adjoint, theta gradients, bias gradients) for the forward
    call that produced ``tape``.
    """
    if tape.layer is not layer:
        raise ValueError("tape does not belong to this layer")
    adjoint = as_float_array(adjoint, "adjoint", ndim=1)
    if adjoint.shape[0] != layer.d_out:
        raise ValueError(f"adjoint must have length {layer.d_out}")
    if tape.activation == "tanh":
        t = np.tanh(tape.z)
        dz = adjoint * (1.0 - t * t)
    else:
        dz = adjoint.copy()
    bias_grad = dz.copy()
    dy = np.zeros(layer.n)
    dy[: layer.d_out] = dz
    theta_grads = np.zeros_like(layer.thetas)
    for k in range(len(layer.gates) - 1, -1, -1):
        i, j = layer.gates[k]
        th = layer.thetas[k]
        c, s = np.cos(th), np.sin(th)
        a, b = tape.pair_cache[k]
        da, db = dy[i], dy[j]
        theta_grads[k] = da * (c * b - s * a) - db * (c * a + s * b)
        dy[i] = c * da - s * db
        dy[j] = s * da + c * db
    dp = dy.reshape(1, -1)
    zeros = np.zeros_like(dp)
    hbar, _, _ = _lift_backward(layer, tape.lift_cache, dp, zeros, zeros)
    return hbar[0], theta_grads, bias_grad


# ---------------------------------------------------------------------------
# Batched jet-lane machinery (training path)
# ---------------------------------------------------------------------------


def _lift_jets(layer, hv, h1, h2):
    """Lift jet lanes (B, d_in) -> padded circuit lanes (B, n) plus cache."""
    B = hv.shape[0]
    n = layer.n
    pv = np.zeros((B, n))
    p1 = np.zeros((B, n))
    p2 = np.zeros((B, n))
    if layer.lift == "sincos":
        x, x1, x2 = hv[:, 0], h1[:, 0], h2[:, 0]
        sn, cs = np.sin(x), np.cos(x)
        pv[:, 0], pv[:, 1] = sn, cs
        p1[:, 0], p1[:, 1] = cs * x1, -sn * x1
        p2[:, 0] = -sn * x1 * x1 + cs * x2
        p2[:, 1] = -cs * x1 * x1 - sn * x2
        cache = ("sincos", x, x1, x2, sn, cs)
        return pv, p1, p2, cache
    d = layer.d_in
    alpha = layer.input_scale
    gv, g1, g2 = alpha * hv, alpha * h1, alpha * h2
    sv = np.sum(gv * gv, axis=1)
    s1 = 2.0 * np.sum(gv * g1, axis=1)
    s2 = 2.0 * np.sum(g1 * g1 + gv * g2, axis=1)
    if np.any(sv > d * (1.0 + 1e-12)):
        raise ValueError(f"preprocess domain error: max sum(h^2) = {sv.max():.6g} > d = {d}")
    r = np.sqrt(np.clip(1.0 - sv / d, 0.0, None))
    r = np.maximum(r, 1e-150)  # derivative guard at the sphere boundary
    gp = -1.0 / (2.0 * d * r)
    gpp = -1.0 / (4.0 * d * d * r**3)
    gppp = -3.0 / (8.0 * d**3 * r**5)
    root_d = np.sqrt(d)
    pv[:, :d] = gv / root_d
    p1[:, :d] = g1 / root_d
    p2[:, :d] = g2 / root_d
    pv[:, d] = r
    p1[:, d] = gp * s1
    p2[:, d] = gpp * s1 * s1 + gp * s2
    cache = ("norm", gv, g1, g2, s1, s2, gp, gpp, gppp)
    return pv, p1, p2, cache


def _lift_backward(layer, cache, dpv, dp1, dp2):
    """Adjoint of :func:`_lift_jets`: padded-lane adjoints -> input-lane adjoints."""
    if cache[0] == "sincos":
        _, x, x1, x2, sn, cs = cache
        # per output component f in (sin, cos): ev=f, e1=f'x1, e2=f''x1^2+f'x2
        fv = (sn, cs)
        f1 = (cs, -sn)
        f2 = (-sn, -cs)
        f3 = (-cs, sn)
        xv_bar = np.zeros_like(x)
        x1_bar = np.zeros_like(x)
        x2_bar = np.zeros_like(x)
        for k in range(2):
            ev, e1, e2 = dpv[:, k], dp1[:, k], dp2[:, k]
            xv_bar += ev * f1[k] + e1 * f2[k] * x1 + e2 * (f3[k] * x1 * x1 + f2[k] * x2)
            x1_bar += e1 * f1[k] + e2 * 2.0 * f2[k] * x1
            x2_bar += e2 * f1[k]
        return xv_bar[:, None], x1_bar[:, None], x2_bar[:, None]
    _, gv, g1, g2, s1, s2, gp, gpp, gppp = cache
    d = layer.d_in
    alpha = layer.input_scale
    root_d = np.sqrt(d)
    qv_bar, q1_bar, q2_bar = dpv[:, d], dp1[:, d], dp2[:, d]
    sv_bar = qv_bar * gp + q1_bar * gpp * s1 + q2_bar * (gppp * s1 * s1 + gpp * s2)
    s1_bar = q1_bar * gp + q2_bar * 2.0 * gpp * s1
    s2_bar = q2_bar * gp
    gv_bar = dpv[:, :d] / root_d + 2.0 * gv * sv_bar[:, None] \
        + 2.0 * g1 * s1_bar[:, None] + 2.0 * g2 * s2_bar[:, None]
    g1_bar = dp1[:, :d] / root_d + 2.0 * gv * s1_bar[:, None] + 4.0 * g1 * s2_bar[:, None]
    g2_bar = dp2[:, :d] / root_d + 2.0 * gv * s2_bar[:, None]
    return alpha * gv_bar, alpha * g1_bar, alpha * g2_bar


def _tanh_jets(zv, z1, z2):
    t = np.tanh(zv)
    u = 1.0 - t * t
    av = t
    a1 = u * z1
    a2 = -2.0 * t * u * z1 * z1 + u * z2
    return av, a1, a2, (t, u, z1, z2)


def _tanh_backward(cache, dav, da1, da2):
    t, u, z1, z2 = cache
    f3 = -2.0 * u * (1.0 - 3.0 * t * t)  # tanh'''
    dzv = dav * u + da1 * (-2.0 * t * u * z1) + da2 * (f3 * z1 * z1 - 2.0 * t * u * z2)
    dz1 = da1 * u + da2 * (-4.0 * t * u * z1)
    dz2 = da2 * u
    return dzv, dz1, dz2


@dataclass
class OrthoJetTape:
    lift_cache: tuple
    p_lanes: tuple  # padded (B, n) lanes
    wt: np.ndarray  # W transposed, so y = p @ wt
    mat_tape: list
    act_cache: object
    activation: str


def ortho_forward_jets(layer, hv, h1, h2, activation="tanh"):
    """Push jet lanes through the layer in matrix mode; returns lanes + tape."""
    pv, p1, p2, lift_cache = _lift_jets(layer, hv, h1, h2)
    mat_tape = []
    wt = apply_gate_slots(np.eye(layer.n), layer.thetas, layer.slots, mat_tape)
    d_out = layer.d_out
    zv = pv @ wt[:, :d_out] + layer.bias
    z1 = p1 @ wt[:, :d_out]
    z2 = p2 @ wt[:, :d_out]
    if activation == "tanh":
        av, a1, a2, act_cache = _tanh_jets(zv, z1, z2)
    else:
        av, a1, a2, act_cache = zv, z1, z2, None
    tape = OrthoJetTape(lift_cache, (pv, p1, p2), wt, mat_tape, act_cache, activation)
    return av, a1, a2, tape


def ortho_backward_jets(layer, tape, dav, da1, da2):
    """Adjoint of :func:`ortho_forward_jets`.

    Returns input-lane adjoints plus gradients for (thetas, bias). The angle
    gradient is recovered from d(loss)/dW by a reverse sweep over the gate
    schedule, so W never leaves the orthogonal manifold.
    """
    if tape.activation == "tanh":
        dzv, dz1, dz2 = _tanh_backward(tape.act_cache, dav, da1, da2)
    else:
        dzv, dz1, dz2 = dav, da1, da2
    bias_grad = np.sum(dzv, axis=0)
    pv, p1, p2 = tape.p_lanes
    n, d_out = layer.n, layer.d_out
    wt_block = tape.wt[:, :d_out]
    # dL/dWt accumulated over all three lanes
    dwt = np.zeros((n, n))
    dwt[:, :d_out] = pv.T @ dzv + p1.T @ dz1 + p2.T @ dz2
    dpv = dzv @ wt_block.T
    dp1 = dz1 @ wt_block.T
    dp2 = dz2 @ wt_block.T
    theta_grads = np.zeros_like(layer.thetas)
    backward_gate_slots(dwt, layer.thetas, layer.slots, tape.mat_tape, theta_grads)
    hbar = _lift_backward(layer, tape.lift_cache, dpv, dp1, dp2)
    return hbar, theta_grads, bias_grad


class DenseLayer:
    """Plain affine layer used for the classical postprocessing stack."""

    def __init__(self, d_in, d_out, rng=None):
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        if rng is None:
            self.W = np.zeros((d_out, d_in))
        else:
            lim = SQRT6 / np.sqrt(d_in + d_out)
            self.W = rng.uniform(-lim, lim, size=(d_out, d_in))
        self.bias = np.zeros(d_out)

    def n_params(self):
        return self.W.size + self.bias.size

    def forward_jets(self, hv, h1, h2, activation="tanh"):
        zv = hv @ self.W.T + self.bias
        z1 = h1 @ self.W.T
        z2 = h2 @ self.W.T
        if activation == "tanh":
            av, a1, a2, act_cache = _tanh_jets(zv, z1, z2)
        else:
            av, a1, a2, act_cache = zv, z1, z2, None
        return av, a1, a2, (hv, h1, h2, act_cache, activation)

    def backward_jets(self, tape, dav, da1, da2):
        hv, h1, h2, act_cache, activation = tape
        if activation == "tanh":
            dzv, dz1, dz2 = _tanh_backward(act_cache, dav, da1, da2)
        else:
            dzv, dz1, dz2 = dav, da1, da2
        w_grad = dzv.T @ hv + dz1.T @ h1 + dz2.T @ h2
        bias_grad = np.sum(dzv, axis=0)
        return (dzv @ self.W, dz1 @ self.W, dz2 @ self.W), w_grad, bias_grad
