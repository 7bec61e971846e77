"""Physics-informed training: loss assembly on factorized collocation sets,
Adam over mixed parameter kinds, and the forward/inverse training loop.

Per epoch each subnet runs exactly once on the concatenation of its axis's
collocation, initial, boundary, and observation coordinates; every loss term
reads rows out of the resulting (value, d1, d2) tables and scatters its
adjoints back, so one backward pass per subnet collects all gradients.
Angles are the trainable quantities of the orthogonal layers, which keeps
every transform exactly orthogonal throughout training.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .model import _grid_contract, _grid_contract_backward
from .validation import check_positive


@dataclass
class TrainConfig:
    lr: float = 5e-3
    epochs: int = 20000
    lambda_res: float = 1.0
    lambda_ic: float = 10.0
    lambda_bc: float = 10.0
    lambda_data: float = 10.0
    collocation: int = 250        # total across axes, split evenly
    colloc_per_axis: tuple = None  # explicit per-axis override
    resample_every: int = 100
    seed: int = 0
    mode: str = "matrix"          # circuit modes are inference/validation paths
    shots: int = None
    log_every: int = 100
    eval_every: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        check_positive(self.lr, "lr")
        check_positive(self.epochs, "epochs")
        check_positive(self.collocation, "collocation")
        if self.mode not in ("matrix", "circuit_exact", "circuit_sampled"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def axis_counts(self, n_axes):
        if self.colloc_per_axis is not None:
            counts = [int(c) for c in self.colloc_per_axis]
            if len(counts) != n_axes:
                raise ValueError("colloc_per_axis length must match the axis count")
            return counts
        per = max(2, self.collocation // n_axes)
        return [per] * n_axes


@dataclass
class ParamEstimate:
    value: float
    trace: list = field(default_factory=list)


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_params(params, beta1=0.9, beta2=0.999, eps=1e-8):
        return AdamState(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, in place on the parameter arrays."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {key}")
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# Collocation plans
# ---------------------------------------------------------------------------


class _Plan:
    """Per-axis point batches plus row slices for every loss term."""

    def __init__(self, problem, counts, rng):
        k = problem.n_axes
        segments = [[] for _ in range(k)]
        offsets = [0] * k

        def push(j, pts):
            segments[j].append(np.asarray(pts, dtype=float))
            start = offsets[j]
            offsets[j] += len(pts)
            return slice(start, offsets[j])

        self.colloc_slices = []
        self.colloc_points = []
        for j in range(k):
            lo, hi = problem.axis_ranges[j]
            pts = rng.uniform(lo, hi, size=counts[j])
            self.colloc_points.append(pts)
            self.colloc_slices.append(push(j, pts))
        grid_size = int(np.prod([counts[j] for j in range(k)]))
        if grid_size > problem.colloc_tensor_cap:
            raise ValueError(
                f"residual grid would hold {grid_size} points; lower the per-axis "
                f"collocation counts (cap {problem.colloc_tensor_cap})")

        self.block_slices = []
        self.block_coords = []
        for block in problem.conditions:
            slices = []
            coords = []
            for j, spec in enumerate(block.axis_spec):
                kind, arg = spec
                if kind == "sample":
                    lo, hi = problem.axis_ranges[j]
                    pts = rng.uniform(lo, hi, size=int(arg))
                elif kind in ("fixed", "data"):
                    pts = np.asarray(arg, dtype=float)
                else:
                    raise ValueError(f"unknown axis spec {kind!r}")
                coords.append(pts)
                slices.append(push(j, pts))
            self.block_slices.append(slices)
            self.block_coords.append(coords)
        self.axis_points = [np.concatenate(segments[j]) for j in range(k)]


# ---------------------------------------------------------------------------
# Loss assembly
# ---------------------------------------------------------------------------


def _weights(config):
    return {"ic": config.lambda_ic, "bc": config.lambda_bc, "data": config.lambda_data}


def assemble_loss(model, problem, plan, config, params):
    """Evaluate the composite loss and the gradients of every parameter.

    Returns (loss_terms dict, grads dict). ``params`` carries any learnable
    physical parameter (1-element array under its name); its gradient comes
    analytically out of the residual operator's backward rule.
    """
    k = problem.n_axes
    tables = []
    tapes = []
    adjoints = []
    for j in range(k):
        hv, h1, h2, tape = model.axis_jets(j, plan.axis_points[j])
        tables.append((hv, h1, h2))
        tapes.append(tape)
        adjoints.append([np.zeros_like(hv), np.zeros_like(h1), np.zeros_like(h2)])

    grads = {name: np.zeros_like(arr) for name, arr in model.param_dict().items()}
    res_params = {name: float(arr[0]) for name, arr in params.items()
                  if name not in grads}
    for name in res_params:
        grads[name] = np.zeros(1)

    terms = {"res": 0.0, "ic": 0.0, "bc": 0.0, "data": 0.0}

    # Residual over the collocation grid.
    residual = problem.residual
    colloc_tabs = {}
    for (axis, order) in residual.needs:
        sel = [tables[j][0][plan.colloc_slices[j]] for j in range(k)]
        sel[axis] = tables[axis][order][plan.colloc_slices[axis]]
        colloc_tabs[(axis, order)] = sel
    value_tabs = [tables[j][0][plan.colloc_slices[j]] for j in range(k)]
    fields = {key: _grid_contract(tabs) for key, tabs in colloc_tabs.items()}
    u = _grid_contract(value_tabs) if residual.uses_value else None
    r = residual.apply(u, fields, res_params)
    size = r.size
    terms["res"] = float(np.mean(r * r))
    rbar = (2.0 * config.lambda_res / size) * r
    ubar, field_adj, param_grad = residual.backward(u, fields, res_params, rbar)
    if param_grad is not None:
        grads[residual.param_name] += param_grad
    if ubar is not None:
        for j in range(k):
            adjoints[j][0][plan.colloc_slices[j]] += _grid_contract_backward(ubar, value_tabs, j)
    for key, abar in field_adj.items():
        tabs = colloc_tabs[key]
        axis, order = key
        for j in range(k):
            lane = order if j == axis else 0
            adjoints[j][lane][plan.colloc_slices[j]] += _grid_contract_backward(abar, tabs, j)

    # Initial / boundary / observation blocks.
    weights = _weights(config)
    for block, slices, coords in zip(problem.conditions, plan.block_slices, plan.block_coords):
        lam = weights[block.category]
        tabs = [tables[j][block.lanes[j]][slices[j]] for j in range(k)]
        target = block.target_tensor(coords)
        if block.kind == "zipped":
            prod = np.ones_like(tabs[0])
            for tab in tabs:
                prod = prod * tab
            value = prod.sum(axis=1)
            err = value - target
            terms[block.category] += float(np.mean(err * err))
            vbar = (2.0 * lam / err.size) * err
            for j in range(k):
                others = np.ones_like(tabs[0])
                for jj in range(k):
                    if jj != j:
                        others = others * tabs[jj]
                adjoints[j][block.lanes[j]][slices[j]] += vbar[:, None] * others
            continue
        pair = block.pair_axis
        work = list(tabs)
        if pair is not None:
            work[pair] = tabs[pair][0:1] - tabs[pair][1:2]
        value = _grid_contract(work)
        if pair is not None:
            value = np.squeeze(value, axis=pair)
            target = np.asarray(target)
        err = value - target
        terms[block.category] += float(np.mean(err * err))
        vbar = (2.0 * lam / err.size) * err
        if pair is not None:
            vbar = np.expand_dims(vbar, axis=pair)
        for j in range(k):
            abar = _grid_contract_backward(vbar, work, j)
            if j == pair:
                adjoints[j][block.lanes[j]][slices[j].start:slices[j].start + 1] += abar
                adjoints[j][block.lanes[j]][slices[j].start + 1:slices[j].stop] -= abar
            else:
                adjoints[j][block.lanes[j]][slices[j]] += abar

    for j in range(k):
        model.subnets[j].backward_jets(tapes[j], adjoints[j][0], adjoints[j][1],
                                       adjoints[j][2], grads, f"sub{j}")

    # per-term entries are raw means; the weights enter the total (and the adjoints above)
    terms["total"] = (config.lambda_res * terms["res"] + config.lambda_ic * terms["ic"]
                      + config.lambda_bc * terms["bc"] + config.lambda_data * terms["data"])
    return terms, grads


@dataclass
class TrainResult:
    model: object
    history: list
    eval_mse: float
    eval_max: float
    param_estimate: ParamEstimate = None
    wall_time: float = 0.0


def evaluate_model(model, problem, axes=None):
    """MSE and max error against the problem reference on a dense grid."""
    axes = problem.eval_axes if axes is None else axes
    pred = model.predict_grid(axes)
    ref = problem.reference_grid(axes)
    err = pred - ref
    return float(np.mean(err * err)), float(np.max(np.abs(err)))


def train(model, problem, config, callback=None):
    """Run the physics-informed loop; returns the model plus history/metrics.

    Training always executes the exact linear transform (matrix path); the
    sampled circuit modes are for inference-time validation. Loss history is
    logged every ``log_every`` epochs, the reference-grid MSE every
    ``eval_every``. NaN losses abort with diagnostics.
    """
    t_start = time.time()
    rng = np.random.default_rng(config.seed)
    counts = config.axis_counts(problem.n_axes)
    params = dict(model.param_dict())
    estimate = None
    if problem.learnable_param is not None:
        params[problem.learnable_param.name] = np.array([float(problem.learnable_param.init)])
        estimate = ParamEstimate(problem.learnable_param.init)
    state = AdamState.for_params(params, config.beta1, config.beta2, config.eps_adam)
    history = []
    plan = None
    for epoch in range(config.epochs):
        if plan is None or (config.resample_every > 0 and epoch % config.resample_every == 0):
            plan = _Plan(problem, counts, rng)
        terms, grads = assemble_loss(model, problem, plan, config, params)
        if not np.isfinite(terms["total"]):
            raise RuntimeError(
                f"loss became non-finite at epoch {epoch}: {terms} "
                f"(lr={config.lr}, collocation={counts})")
        adam_step(params, grads, state, config.lr)
        if estimate is not None:
            beta_val = float(params[problem.learnable_param.name][0])
            estimate.trace.append(beta_val)
            estimate.value = beta_val
        if epoch % config.log_every == 0 or epoch == config.epochs - 1:
            row = {
                "epoch": epoch,
                "loss_total": terms["total"],
                "loss_res": terms["res"],
                "loss_ic": terms["ic"],
                "loss_bc": terms["bc"],
            }
            if "data" in terms and terms["data"]:
                row["loss_data"] = terms["data"]
            if estimate is not None:
                row["beta_hat"] = estimate.value
            if config.eval_every > 0 and (epoch % config.eval_every == 0 or epoch == config.epochs - 1):
                row["eval_mse"], _ = evaluate_model(model, problem)
            history.append(row)
            if callback is not None:
                callback(row)
    eval_mse, eval_max = evaluate_model(model, problem)
    return TrainResult(model, history, eval_mse, eval_max, estimate, time.time() - t_start)


def history_to_csv(history, path):
    """Write the training history; columns are the union of all logged keys."""
    keys = ["epoch", "loss_total", "loss_res", "loss_ic", "loss_bc",
            "loss_data", "beta_hat", "eval_mse"]
    keys = [k for k in keys if any(k in row for row in history)]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=keys, restval="")
        writer.writeheader()
        for row in history:
            writer.writerow({k: row.get(k, "") for k in keys})
