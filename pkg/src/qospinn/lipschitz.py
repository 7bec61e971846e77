"""Lipschitz bounds for rank-r separable networks and their verification.

The product-sum of K per-axis subnets with Lipschitz constants L_k and
output sup-norms M_k is Lipschitz with constant at most

    r * (prod_i M_i) * sqrt(sum_k (L_k / M_k)^2)

For subnets whose nonlinear part is built from orthogonal layers with
1-Lipschitz activations, L_k can be replaced by the product of the final
dense layers' spectral norms (times the axis normalization slope), which is
what makes the architecture's uncertainty head work without any spectral
normalization step.
"""

from dataclasses import dataclass, field

import numpy as np

from .layers import angles_to_matrix


def spectral_norm(M, iters=100, seed=0):
    """Largest singular value by power iteration on M^T M from a seeded start."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    M = np.asarray(M, dtype=float)
    if not np.any(M):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.normal(size=M.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = M.T @ (M @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
    return float(np.linalg.norm(M @ v))


def estimate_bound_ingredients(subnet_fn, domain, samples, rng, fd_step=1e-4, margin=1.05):
    """Sampled sup-norm bound M and Lipschitz estimate L of a map R -> R^r.

    ``subnet_fn`` maps an array of scalars to an (n, r) table. M is the
    sampled sup of the output infinity norm, L the max difference quotient
    over random pairs plus finite-difference probes; both carry a 5% safety
    margin (they are sampled suprema, not certified bounds).
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise ValueError(f"degenerate domain [{lo}, {hi}]")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    xs = rng.uniform(lo, hi, size=samples)
    vals = subnet_fn(xs)
    M = float(np.max(np.abs(vals)))
    ys = rng.uniform(lo, hi, size=samples)
    vy = subnet_fn(ys)
    gaps = np.abs(xs - ys)
    mask = gaps > 1e-12
    ratios = np.linalg.norm(vals - vy, axis=1)[mask] / gaps[mask]
    probe = np.clip(xs, lo, hi - fd_step)
    slopes = np.linalg.norm(subnet_fn(probe + fd_step) - subnet_fn(probe), axis=1) / fd_step
    L = float(max(ratios.max(initial=0.0), slopes.max(initial=0.0)))
    return M * margin, L * margin


def theorem_bounds(r, M, L_or_specnorm):
    """r * prod(M_i) * sqrt(sum((L_k / M_k)^2)); Theorem-2 mode passes
    spectral-norm products in place of the sampled L_k."""
    M = np.asarray(M, dtype=float)
    L = np.asarray(L_or_specnorm, dtype=float)
    if M.shape != L.shape:
        raise ValueError("M and L must have matching lengths")
    if np.any(M <= 0):
        raise ValueError("all M_k must be positive")
    return float(r * np.prod(M) * np.sqrt(np.sum((L / M) ** 2)))


def empirical_lipschitz_check(predict_points, bound, axis_ranges, pairs, rng):
    """Max sampled difference quotient of the model over the domain box.

    Returns (max ratio, ratio <= bound). ``predict_points`` maps an
    (n, K) array to n values.
    """
    k = len(axis_ranges)
    lo = np.array([r[0] for r in axis_ranges])
    hi = np.array([r[1] for r in axis_ranges])
    X = rng.uniform(lo, hi, size=(pairs, k))
    Y = rng.uniform(lo, hi, size=(pairs, k))
    dist = np.linalg.norm(X - Y, axis=1)
    mask = dist > 1e-12
    ux = predict_points(X[mask])
    uy = predict_points(Y[mask])
    ratios = np.abs(ux - uy) / dist[mask]
    max_ratio = float(ratios.max(initial=0.0))
    return max_ratio, max_ratio <= bound


def stacking_bounds(m, M):
    """Global bi-Lipschitz constants of the axis-wise stacking map:
    (min_i m_i, max_i M_i)."""
    m = np.asarray(m, dtype=float)
    M = np.asarray(M, dtype=float)
    if m.shape != M.shape:
        raise ValueError("m and M must have matching lengths")
    if np.any(m > M):
        raise ValueError("each lower constant must not exceed its upper constant")
    return float(np.min(m)), float(np.max(M))


@dataclass
class BoundReport:
    M: list
    L: list
    spec_norms: list
    theorem1_bound: float
    theorem2_bound: float
    empirical_max_ratio: float
    bound_satisfied: bool
    samples: int
    pairs: int
    layer_ratio_max: float = None
    ortho_spectral_norms: list = field(default_factory=list)

    def to_text(self):
        lines = ["lipschitz bound report"]
        for i, (mi, li, si) in enumerate(zip(self.M, self.L, self.spec_norms)):
            lines.append(f"subnet {i}: M={mi:.6g} L_sampled={li:.6g} |W_final|={si:.6g}")
        lines.append(f"theorem1_bound={self.theorem1_bound:.6g}")
        lines.append(f"theorem2_bound={self.theorem2_bound:.6g}")
        lines.append(f"empirical_max_ratio={self.empirical_max_ratio:.6g}")
        lines.append(f"bound_satisfied={self.bound_satisfied}")
        if self.layer_ratio_max is not None:
            lines.append(f"per_layer_ratio_max={self.layer_ratio_max:.9f}")
        for i, s in enumerate(self.ortho_spectral_norms):
            lines.append(f"ortho_transform_{i}_spectral_norm={s:.12f}")
        lines.append(f"samples={self.samples} pairs={self.pairs}")
        return "\n".join(lines)


def subnet_spec_norm_product(subnet):
    """Product of the dense postprocessing layers' spectral norms.

    The tanh between them is 1-Lipschitz, so the composite final stage is
    bounded by the plain product.
    """
    prod = 1.0
    for layer in subnet.post_layers:
        prod *= spectral_norm(layer.W)
    return prod


def model_bound_report(model, samples=2000, pairs=100000, seed=0):
    """Theorem-1/2 bounds of a trained separable model plus the empirical check.

    The per-subnet Theorem-2 constant is the spectral-norm product of its
    dense layers times the axis normalization slope (the orthogonal stack
    with tanh is at most 1-Lipschitz w.r.t. its unit-sphere input).
    """
    rng = np.random.default_rng(seed)
    M, L, specs = [], [], []
    for j, subnet in enumerate(model.subnets):
        fn = lambda xs, j=j: model.axis_values(j, xs)
        m_j, l_j = estimate_bound_ingredients(fn, model.axis_ranges[j], samples, rng)
        M.append(m_j)
        L.append(l_j)
        specs.append(subnet_spec_norm_product(subnet) * model.axis_scale(j))
    t1 = theorem_bounds(model.rank, M, L)
    t2 = theorem_bounds(model.rank, M, specs)
    max_ratio, ok = empirical_lipschitz_check(model.predict_points, t2,
                                              model.axis_ranges, pairs, rng)
    ortho_norms = [spectral_norm(angles_to_matrix(layer))
                   for sub in model.subnets for layer in sub.ortho_layers]
    return BoundReport(M, L, specs, t1, t2, max_ratio, ok, samples, pairs,
                       ortho_spectral_norms=ortho_norms)
