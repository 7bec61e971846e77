"""Separable models: per-axis subnets combined by a rank-r product sum.

Each subnet is an orthogonal-layer MLP over one scalar coordinate followed
by two plain dense layers (tanh between them, identity output). Axis inputs
are affinely normalized to [-1, 1] before the [sin, cos] entry encoding so
that arbitrary domain boxes stay inside the injective range of the encoding;
the normalization slope is folded into the jet seed, so all reported
derivatives are with respect to the physical coordinates.
"""

from dataclasses import dataclass, field

import numpy as np

from .jets import Jet2
from .layers import DenseLayer, PyramidLayer, ortho_backward_jets, ortho_forward_jets
from .validation import check_axes

_EINSUM_LETTERS = "ijkl"


class QoMlp:
    """Orthogonal MLP for one axis: scalar in, rank-sized vector out.

    ``widths`` lists every layer output size; the last two entries are the
    dense postprocessing layers and the final entry is the model rank.
    """

    def __init__(self, widths, rng):
        widths = [int(w) for w in widths]
        if len(widths) < 3:
            raise ValueError("subnet needs at least one orthogonal layer and two dense layers")
        ortho_w, dense_w = widths[:-2], widths[-2:]
        self.widths = widths
        self.ortho_layers = []
        d_prev = 1
        for li, w in enumerate(ortho_w):
            lift = "sincos" if li == 0 else "norm"
            self.ortho_layers.append(PyramidLayer(d_prev, w, lift=lift, rng=rng))
            d_prev = w
        self.post_layers = [
            DenseLayer(d_prev, dense_w[0], rng=rng),
            DenseLayer(dense_w[0], dense_w[1], rng=rng),
        ]
        self.rank = dense_w[1]

    def param_items(self, prefix):
        items = []
        for li, layer in enumerate(self.ortho_layers):
            items.append((f"{prefix}.ortho{li}.thetas", layer.thetas))
            items.append((f"{prefix}.ortho{li}.bias", layer.bias))
        for li, layer in enumerate(self.post_layers):
            items.append((f"{prefix}.post{li}.W", layer.W))
            items.append((f"{prefix}.post{li}.bias", layer.bias))
        return items

    def n_params(self):
        return sum(l.n_params() for l in self.ortho_layers) + \
            sum(l.n_params() for l in self.post_layers)

    def forward_jets(self, x, seed_scale=1.0):
        """Jet lanes (value, d1, d2) of shape (B, rank) plus the backward tape."""
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        hv = x
        h1 = np.full_like(x, float(seed_scale))
        h2 = np.zeros_like(x)
        tapes = []
        for layer in self.ortho_layers:
            hv, h1, h2, tape = ortho_forward_jets(layer, hv, h1, h2, activation="tanh")
            tapes.append(("ortho", layer, tape))
        acts = ["tanh", "identity"]
        for layer, act in zip(self.post_layers, acts):
            hv, h1, h2, tape = layer.forward_jets(hv, h1, h2, activation=act)
            tapes.append(("post", layer, tape))
        return hv, h1, h2, tapes

    def backward_jets(self, tapes, dv, d1, d2, grads, prefix):
        """Accumulate parameter gradients for the lane adjoints into ``grads``."""
        n_ortho = len(self.ortho_layers)
        for rev_i, (kind, layer, tape) in enumerate(reversed(tapes)):
            li = len(tapes) - 1 - rev_i
            if kind == "post":
                (dv, d1, d2), w_grad, b_grad = layer.backward_jets(tape, dv, d1, d2)
                grads[f"{prefix}.post{li - n_ortho}.W"] += w_grad
                grads[f"{prefix}.post{li - n_ortho}.bias"] += b_grad
            else:
                (dv, d1, d2), th_grad, b_grad = ortho_backward_jets(layer, tape, dv, d1, d2)
                grads[f"{prefix}.ortho{li}.thetas"] += th_grad
                grads[f"{prefix}.ortho{li}.bias"] += b_grad

    def forward_values(self, x, seed_scale=1.0):
        hv, _, _, _ = self.forward_jets(x, seed_scale)
        return hv


def subnet_forward_jet(subnet, x):
    """Run a subnet on scalar input(s) entirely in order-2 jet arithmetic.

    Returns a list of ``rank`` :class:`Jet2` objects, one per output
    component; their fields are arrays when ``x`` is an array.
    """
    x = np.asarray(x, dtype=float)
    hv, h1, h2, _ = subnet.forward_jets(np.ravel(x), seed_scale=1.0)
    out = []
    for r in range(subnet.rank):
        out.append(Jet2(hv[:, r].reshape(x.shape), h1[:, r].reshape(x.shape),
                        h2[:, r].reshape(x.shape)))
    return out


@dataclass
class FieldBatch:
    """Factorized-grid tensors of the field and its per-axis derivatives."""

    axes: list
    u: np.ndarray
    du: dict = field(default_factory=dict)   # axis index -> d u / d x_axis
    d2u: dict = field(default_factory=dict)  # axis index -> d2 u / d x_axis^2

    @property
    def shape(self):
        return self.u.shape


def _grid_contract(tables):
    """einsum of per-axis (N_j, r) tables into the N_1 x ... x N_K tensor."""
    k = len(tables)
    if k == 1:
        return tables[0].sum(axis=1)
    subs = ",".join(f"{_EINSUM_LETTERS[m]}r" for m in range(k))
    return np.einsum(subs + "->" + _EINSUM_LETTERS[:k], *tables)


def _grid_contract_backward(tbar, tables, m):
    """Adjoint of :func:`_grid_contract` w.r.t. table ``m``."""
    k = len(tables)
    if k == 1:
        return np.repeat(tbar[:, None], tables[0].shape[1], axis=1)
    out_sub = _EINSUM_LETTERS[:k]
    in_subs = [f"{_EINSUM_LETTERS[j]}r" for j in range(k) if j != m]
    operands = [tables[j] for j in range(k) if j != m]
    subs = out_sub + "," + ",".join(in_subs) + "->" + f"{_EINSUM_LETTERS[m]}r"
    return np.einsum(subs, tbar, *operands)


def cp_combine(per_axis_jets, derivatives=None):
    """Combine per-axis jet tables into grid tensors of u and its derivatives.

    ``per_axis_jets[j]`` is either a :class:`Jet2` whose fields are
    (N_j, r) arrays or a plain (v, d1, d2) triple. ``derivatives`` maps axis
    index to the highest derivative order wanted (default: 2 for every
    axis). The rank-r product-sum gives

        u = sum_r prod_j v_j[:, r]
        du/dx_m = sum_r d1_m[:, r] * prod_{j != m} v_j[:, r]

    and analogously with d2 for the second derivatives.
    """
    lanes = []
    for t in per_axis_jets:
        if isinstance(t, Jet2):
            lanes.append((np.asarray(t.v), np.asarray(t.d1), np.asarray(t.d2)))
        else:
            lanes.append(tuple(np.asarray(a) for a in t))
    k = len(lanes)
    if k > len(_EINSUM_LETTERS):
        raise ValueError(f"at most {len(_EINSUM_LETTERS)} axes supported, got {k}")
    ranks = {l[0].shape[1] for l in lanes}
    if len(ranks) != 1:
        raise ValueError(f"inconsistent ranks across axes: {sorted(ranks)}")
    if derivatives is None:
        derivatives = {m: 2 for m in range(k)}
    values = [l[0] for l in lanes]
    fb = FieldBatch(axes=[l[0] for l in lanes], u=_grid_contract(values))
    for m, order in derivatives.items():
        if order >= 1:
            tabs = list(values)
            tabs[m] = lanes[m][1]
            fb.du[m] = _grid_contract(tabs)
        if order >= 2:
            tabs = list(values)
            tabs[m] = lanes[m][2]
            fb.d2u[m] = _grid_contract(tabs)
    return fb


class SpinnModel:
    """K per-axis subnets plus the rank-r product-sum combiner."""

    def __init__(self, subnets, axis_ranges, combiner="product_sum"):
        ranks = {s.rank for s in subnets}
        if len(ranks) != 1:
            raise ValueError("all subnets must share one output rank")
        self.subnets = list(subnets)
        self.rank = ranks.pop()
        self.combiner = combiner
        self.axis_ranges = [(float(lo), float(hi)) for lo, hi in axis_ranges]
        if len(self.axis_ranges) != len(self.subnets):
            raise ValueError("one axis range per subnet required")
        self.forward_count = 0  # counts per-point subnet evaluations

    @property
    def n_axes(self):
        return len(self.subnets)

    def axis_scale(self, j):
        lo, hi = self.axis_ranges[j]
        return 2.0 / (hi - lo)

    def normalize_axis(self, j, x):
        lo, hi = self.axis_ranges[j]
        return (2.0 * np.asarray(x, dtype=float) - (lo + hi)) / (hi - lo)

    def reset_forward_count(self):
        self.forward_count = 0

    def axis_jets(self, j, x):
        """Jet lanes of subnet j at physical coordinates ``x`` (with tape)."""
        x = np.asarray(x, dtype=float)
        self.forward_count += x.size
        return self.subnets[j].forward_jets(self.normalize_axis(j, x),
                                            seed_scale=self.axis_scale(j))

    def axis_values(self, j, x):
        x = np.asarray(x, dtype=float)
        self.forward_count += x.size
        return self.subnets[j].forward_values(self.normalize_axis(j, x),
                                              seed_scale=self.axis_scale(j))

    def param_dict(self):
        items = []
        for k, sub in enumerate(self.subnets):
            items.extend(sub.param_items(f"sub{k}"))
        return dict(items)

    def n_params(self):
        return sum(s.n_params() for s in self.subnets)

    def predict_grid(self, axes):
        """Value tensor over the factorized grid: one subnet pass per axis."""
        axes = check_axes(axes, self.n_axes)
        tables = [self.axis_values(j, axes[j]) for j in range(self.n_axes)]
        return _grid_contract(tables)

    def predict_points(self, X):
        """Values at scattered points, shape (n_points, n_axes) -> (n_points,)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.n_axes)
        prod = None
        for j in range(self.n_axes):
            tab = self.axis_values(j, X[:, j])
            prod = tab if prod is None else prod * tab
        return prod.sum(axis=1)


def model_predict(model, axes):
    """Grid prediction of a separable model (value tensor only)."""
    return model.predict_grid(axes)


def build_spinn(n_subnets, widths, axis_ranges, seed=0):
    """Construct a separable model with ``n_subnets`` identical-width subnets."""
    if n_subnets != len(axis_ranges):
        raise ValueError(f"{n_subnets} subnets but {len(axis_ranges)} axis ranges")
    rng = np.random.default_rng(seed)
    subnets = [QoMlp(widths, rng) for _ in range(n_subnets)]
    return SpinnModel(subnets, axis_ranges)
