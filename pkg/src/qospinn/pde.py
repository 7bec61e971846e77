"""PDE problem definitions: residual operators, initial/boundary blocks,
reference solutions, and independent numerical oracles.

Axis convention: spatial axes first, time last. Every residual operator
declares which derivative tensors it needs as (axis, order) keys and knows
how to push a residual adjoint back onto those tensors, so the trainer can
stay generic across problems.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .model import FieldBatch

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Advection-diffusion
# ---------------------------------------------------------------------------


def ad_reference(x, t, vel, D):
    """Closed-form advection-diffusion solution on [0,1]^k, zero boundary.

        T = exp(vel.x / 2D) * prod_i sin(pi x_i) * exp(-(k D pi^2 + |vel|^2/4D) t)

    ``x`` has shape (..., k); ``t`` broadcasts against the leading shape.
    """
    if D <= 0:
        raise ValueError(f"diffusivity must be positive, got {D}")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    vel = np.broadcast_to(np.asarray(vel, dtype=float), (x.shape[-1],))
    k = x.shape[-1]
    spatial = np.exp(x @ vel / (2.0 * D)) * np.prod(np.sin(np.pi * x), axis=-1)
    rate = k * D * np.pi**2 + float(vel @ vel) / (4.0 * D)
    return spatial * np.exp(-rate * np.asarray(t, dtype=float))


def ad_reference_grid(axes, vel, D):
    """Separable evaluation of :func:`ad_reference` on a factorized grid."""
    if D <= 0:
        raise ValueError(f"diffusivity must be positive, got {D}")
    k = len(axes) - 1
    vel = np.broadcast_to(np.asarray(vel, dtype=float), (k,))
    factors = [np.exp(vel[j] * np.asarray(axes[j]) / (2.0 * D)) * np.sin(np.pi * np.asarray(axes[j]))
               for j in range(k)]
    rate = k * D * np.pi**2 + float(vel @ vel) / (4.0 * D)
    factors.append(np.exp(-rate * np.asarray(axes[k])))
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def ad_residual(fields, vel, D):
    """dT/dt + vel . grad(T) - D laplace(T), elementwise over the grid."""
    k = len(fields.axes) - 1
    vel = np.broadcast_to(np.asarray(vel, dtype=float), (k,))
    try:
        r = fields.du[k].copy()
        for j in range(k):
            r += vel[j] * fields.du[j] - D * fields.d2u[j]
    except KeyError as exc:
        raise ValueError(f"field batch is missing derivative tensor {exc}") from exc
    return r


class AdvectionDiffusionResidual:
    def __init__(self, vel, D, k):
        self.vel = np.broadcast_to(np.asarray(vel, dtype=float), (k,))
        self.D = float(D)
        self.k = k
        self.needs = {(k, 1)} | {(j, 1) for j in range(k)} | {(j, 2) for j in range(k)}
        self.uses_value = False

    def apply(self, u, fields, params):
        fb = FieldBatch(axes=[None] * (self.k + 1), u=u)
        fb.du = {j: fields[(j, 1)] for j in range(self.k)}
        fb.du[self.k] = fields[(self.k, 1)]
        fb.d2u = {j: fields[(j, 2)] for j in range(self.k)}
        return ad_residual(fb, self.vel, self.D)

    def backward(self, u, fields, params, rbar):
        adj = {(self.k, 1): rbar}
        for j in range(self.k):
            adj[(j, 1)] = self.vel[j] * rbar
            adj[(j, 2)] = -self.D * rbar
        return None, adj, None


# ---------------------------------------------------------------------------
# Burgers
# ---------------------------------------------------------------------------


def bessel_i(n, x):
    """Modified Bessel function of the first kind by its power series.

    Terms are accumulated until one falls below 1e-16 of the running sum.
    Restricted to |x| <= 50 where the series is numerically trustworthy.
    """
    if n < 0 or n != int(n):
        raise ValueError(f"order must be a nonnegative integer, got {n}")
    x = float(x)
    if abs(x) > 50.0:
        raise ValueError(f"series evaluation restricted to |x| <= 50, got {x}")
    n = int(n)
    half = x / 2.0
    term = half**n / math.factorial(n)
    total = term
    k = 0
    while abs(term) > 1e-16 * max(abs(total), 1e-300):
        term *= half * half / ((k + 1) * (k + n + 1))
        total += term
        k += 1
        if k > 500:
            break
    return total


def burgers_reference(x, t, nu=0.05, n_terms=40):
    """Fourier-Bessel series solution of Burgers with IC sin(2 pi x).

    Ratio of the Cole-Hopf heat kernels with T0 = 1 and wavenumber k = 2 pi;
    1-periodic in x and decaying in t. The finite-difference oracle is the
    ground truth; this series cross-checks it.
    """
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    k = TWO_PI
    z = 1.0 / (2.0 * nu * k)  # T0 / (2 nu k) with T0 = 1
    num = np.zeros(np.broadcast_shapes(x.shape, t.shape))
    den = np.full_like(num, bessel_i(0, z))
    for n in range(1, n_terms + 1):
        coeff = bessel_i(n, z) * np.exp(-(n * k) ** 2 * nu * t)
        num = num + n * coeff * np.sin(n * k * x)
        den = den + 2.0 * coeff * np.cos(n * k * x)
    if np.any(np.abs(den) < 1e-14):
        raise FloatingPointError("series denominator vanished")
    return 4.0 * nu * k * num / den


class BurgersOracle:
    """Finite-difference Burgers solver: implicit diffusion, explicit advection.

    Conservative (flux-form) midpoint advection with Strang-split
    Crank-Nicolson diffusion, solved exactly per step through the FFT of the
    periodic second-difference stencil. Stores the full space-time grid and
    samples it by bilinear interpolation (periodic in x).
    """

    def __init__(self, nu=0.05, nx=1024, nt=4096, t_max=1.0):
        if nx < 512 or nt < 2048:
            raise ValueError("oracle resolution too coarse: need nx >= 512, nt >= 2048")
        self.nu = float(nu)
        self.nx = int(nx)
        self.nt = int(nt)
        self.t_max = float(t_max)
        dx = 1.0 / nx
        dt = t_max / nt
        if dt / dx > 0.5:  # explicit advection CFL margin at |T| <= ~1
            raise ValueError(f"unstable resolution: dt/dx = {dt / dx:.3f} > 0.5")
        self.x = np.arange(nx) * dx
        self.t = np.linspace(0.0, t_max, nt + 1)
        modes = np.arange(nx)
        lam = (2.0 * np.cos(TWO_PI * modes / nx) - 2.0) / dx**2
        half_diff = 1.0 / (1.0 - 0.5 * dt * self.nu * lam)

        def advect(T):
            f = 0.5 * T * T
            return -(np.roll(f, -1) - np.roll(f, 1)) / (2.0 * dx)

        grid = np.empty((nt + 1, nx))
        T = np.sin(TWO_PI * self.x)
        grid[0] = T
        for step in range(1, nt + 1):
            T = np.real(np.fft.ifft(np.fft.fft(T) * half_diff))
            k1 = advect(T)
            k2 = advect(T + 0.5 * dt * k1)
            T = T + dt * k2
            T = np.real(np.fft.ifft(np.fft.fft(T) * half_diff))
            if np.max(np.abs(T)) > 10.0 or not np.all(np.isfinite(T)):
                raise RuntimeError(f"finite-difference solve blew up at step {step}")
            grid[step] = T
        self.grid = grid

    def sample(self, x, t):
        """Bilinear sample of the stored solution; x wraps periodically."""
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.t_max)
        fx = x * self.nx
        ix = np.floor(fx).astype(int) % self.nx
        wx = fx - np.floor(fx)
        ft = t / self.t_max * self.nt
        it = np.minimum(np.floor(ft).astype(int), self.nt - 1)
        wt = ft - it
        g = self.grid
        ixp = (ix + 1) % self.nx
        v00 = g[it, ix]
        v01 = g[it, ixp]
        v10 = g[it + 1, ix]
        v11 = g[it + 1, ixp]
        return (1 - wt) * ((1 - wx) * v00 + wx * v01) + wt * ((1 - wx) * v10 + wx * v11)

    def sample_grid(self, xs, ts):
        X, T = np.meshgrid(np.asarray(xs), np.asarray(ts), indexing="ij")
        return self.sample(X, T)


def burgers_fd_oracle(nu=0.05, nx=1024, nt=4096, t_max=1.0):
    return BurgersOracle(nu=nu, nx=nx, nt=nt, t_max=t_max)


class BurgersResidual:
    def __init__(self, nu):
        self.nu = float(nu)
        self.needs = {(0, 1), (0, 2), (1, 1)}
        self.uses_value = True

    def apply(self, u, fields, params):
        return fields[(1, 1)] + u * fields[(0, 1)] - self.nu * fields[(0, 2)]

    def backward(self, u, fields, params, rbar):
        adj = {
            (1, 1): rbar,
            (0, 1): rbar * u,
            (0, 2): -self.nu * rbar,
        }
        return rbar * fields[(0, 1)], adj, None


# ---------------------------------------------------------------------------
# Sine-Gordon
# ---------------------------------------------------------------------------


def sinegordon_kink(x, t, m=1.0, v=1.0, beta=0.25):
    """Traveling kink 4*arctan(exp(gamma (x - v t))) and its time derivative."""
    if beta * v * v >= 1.0:
        raise ValueError(f"requires beta v^2 < 1, got {beta * v * v}")
    gamma = m / np.sqrt(1.0 - beta * v * v)
    xi = gamma * (np.asarray(x, dtype=float) - v * np.asarray(t, dtype=float))
    e = np.exp(xi)
    value = 4.0 * np.arctan(e)
    t_deriv = -4.0 * v * gamma * e / (1.0 + e * e)
    return value, t_deriv


def sinegordon_residual(fields, m, beta):
    """beta * T_tt - T_xx + m^2 sin(T) on a FieldBatch carrying both tensors."""
    try:
        return beta * fields.d2u[1] - fields.d2u[0] + m * m * np.sin(fields.u)
    except KeyError as exc:
        raise ValueError(f"field batch is missing derivative tensor {exc}") from exc


class SineGordonResidual:
    def __init__(self, m):
        self.m = float(m)
        self.needs = {(0, 2), (1, 2)}
        self.uses_value = True
        self.param_name = "beta"

    def apply(self, u, fields, params):
        beta = params["beta"]
        return beta * fields[(1, 2)] - fields[(0, 2)] + self.m**2 * np.sin(u)

    def backward(self, u, fields, params, rbar):
        beta = params["beta"]
        adj = {
            (1, 2): beta * rbar,
            (0, 2): -rbar,
        }
        param_grad = float(np.sum(rbar * fields[(1, 2)]))
        return rbar * self.m**2 * np.cos(u), adj, param_grad


# ---------------------------------------------------------------------------
# Constraint blocks and problem container
# ---------------------------------------------------------------------------


@dataclass
class ConditionBlock:
    """One penalized equality over a factorized (or zipped) point set.

    axis_spec[j] is ("fixed", values), ("sample", count), or
    ("data", values) for zipped observation blocks. ``lanes[j]`` selects the
    table lane on axis j: 0 value, 1 first, 2 second derivative.
    ``pair_axis`` marks a periodic block: that axis holds exactly two fixed
    coordinates whose subnet rows are subtracted before combining.
    """

    name: str
    category: str  # "ic" | "bc" | "data"
    axis_spec: list
    lanes: tuple
    target: object  # callable(per-axis coordinate arrays) -> tensor, or const
    kind: str = "outer"  # "outer" | "zipped"
    pair_axis: int = None

    def target_tensor(self, coords):
        if callable(self.target):
            return np.asarray(self.target(*coords), dtype=float)
        shape = tuple(len(c) for c in coords) if self.kind == "outer" else (len(coords[0]),)
        if self.pair_axis is not None:
            shape = tuple(s for j, s in enumerate(shape) if j != self.pair_axis)
        return np.full(shape, float(self.target))


@dataclass
class LearnableParam:
    name: str
    init: float


@dataclass
class PdeProblem:
    """Everything the trainer needs to know about one PDE setup."""

    name: str
    axis_names: tuple
    axis_ranges: tuple
    residual: object
    conditions: list
    reference_grid: object  # callable(axes) -> tensor
    reference_points: object = None  # callable(X (n, K)) -> values
    learnable_param: LearnableParam = None
    eval_axes: list = None
    colloc_tensor_cap: int = 20_000_000  # guard against K>=3 outer-grid blowups

    @property
    def n_axes(self):
        return len(self.axis_names)


def field_to_csv(path, axes, axis_names, tensor, value_name="u", extra=None):
    """Write a grid field in long CSV form: one row per grid point."""
    tensor = np.asarray(tensor)
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.ravel() for m in mesh] + [tensor.ravel()]
    names = list(axis_names) + [value_name]
    if extra:
        for nm, arr in extra.items():
            names.append(nm)
            cols.append(np.asarray(arr).ravel())
    with open(path, "w") as f:
        f.write(",".join(names) + "\n")
        for row in zip(*cols):
            f.write(",".join(f"{v:.10g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# Problem factories
# ---------------------------------------------------------------------------


def advection_diffusion(k=1, D=0.1, vel=0.4, n_ic=64, n_bc=64):
    """k-dimensional advection-diffusion on [0,1]^k x [0,1] with zero boundary."""
    vel_vec = np.broadcast_to(np.asarray(vel, dtype=float), (k,)).copy()
    axis_names = tuple(f"x{j + 1}" for j in range(k)) + ("t",) if k > 1 else ("x", "t")
    axis_ranges = tuple([(0.0, 1.0)] * (k + 1))

    def ic_target(*coords):
        # coords: k spatial arrays + [0.0]; separable initial profile
        out = np.ones(tuple(len(c) for c in coords))
        for j in range(k):
            f = np.exp(vel_vec[j] * coords[j] / (2.0 * D)) * np.sin(np.pi * coords[j])
            shape = [1] * (k + 1)
            shape[j] = len(coords[j])
            out = out * f.reshape(shape)
        return out

    conditions = [
        ConditionBlock(
            name="initial",
            category="ic",
            axis_spec=[("sample", n_ic)] * k + [("fixed", np.array([0.0]))],
            lanes=(0,) * (k + 1),
            target=ic_target,
        )
    ]
    for j in range(k):
        spec = []
        for jj in range(k):
            spec.append(("fixed", np.array([0.0, 1.0])) if jj == j else ("sample", n_bc))
        spec.append(("sample", n_bc))
        conditions.append(
            ConditionBlock(
                name=f"boundary_x{j + 1}",
                category="bc",
                axis_spec=spec,
                lanes=(0,) * (k + 1),
                target=0.0,
            )
        )

    grid_pts = 101 if k == 1 else (41 if k == 2 else 21)
    eval_axes = [np.linspace(0.0, 1.0, grid_pts) for _ in range(k + 1)]
    return PdeProblem(
        name=f"advection_diffusion_{k}d",
        axis_names=axis_names,
        axis_ranges=axis_ranges,
        residual=AdvectionDiffusionResidual(vel_vec, D, k),
        conditions=conditions,
        reference_grid=lambda axes: ad_reference_grid(axes, vel_vec, D),
        reference_points=lambda X: ad_reference(X[:, :k], X[:, k], vel_vec, D),
        eval_axes=eval_axes,
    )


def burgers(nu=0.05, n_ic=64, n_bc=64, oracle_nx=1024, oracle_nt=4096, t_max=1.0):
    """1d viscous Burgers with IC sin(2 pi x) and periodic boundary."""
    oracle_box = {}

    def get_oracle():
        if "o" not in oracle_box:
            oracle_box["o"] = BurgersOracle(nu=nu, nx=oracle_nx, nt=oracle_nt, t_max=t_max)
        return oracle_box["o"]

    conditions = [
        ConditionBlock(
            name="initial",
            category="ic",
            axis_spec=[("sample", n_ic), ("fixed", np.array([0.0]))],
            lanes=(0, 0),
            target=lambda x, t: np.sin(TWO_PI * x)[:, None],
        ),
        ConditionBlock(
            name="periodic_value",
            category="bc",
            axis_spec=[("fixed", np.array([0.0, 1.0])), ("sample", n_bc)],
            lanes=(0, 0),
            target=0.0,
            pair_axis=0,
        ),
        ConditionBlock(
            name="periodic_slope",
            category="bc",
            axis_spec=[("fixed", np.array([0.0, 1.0])), ("sample", n_bc)],
            lanes=(1, 0),
            target=0.0,
            pair_axis=0,
        ),
    ]
    problem = PdeProblem(
        name="burgers_1d",
        axis_names=("x", "t"),
        axis_ranges=((0.0, 1.0), (0.0, 1.0)),
        residual=BurgersResidual(nu),
        conditions=conditions,
        reference_grid=lambda axes: get_oracle().sample_grid(axes[0], axes[1]),
        reference_points=lambda X: get_oracle().sample(X[:, 0], X[:, 1]),
        eval_axes=[np.linspace(0.0, 1.0, 101), np.linspace(0.0, 1.0, 101)],
    )
    problem.get_oracle = get_oracle
    return problem


def sine_gordon_inverse(m=1.0, v=1.0, true_beta=0.25, beta_init=1.0,
                        n_obs=200, obs_seed=1234, n_ic=96, n_bc=64):
    """Sine-Gordon kink with beta = 1/c^2 to be recovered from observations.

    The observation set samples the exact kink at ``n_obs`` uniformly random
    (x, t) locations, noise-free. The right Dirichlet value is the kink's
    asymptote 2 pi.
    """
    x_lo, x_hi, t_hi = -20.0, 20.0, 4.0
    rng = np.random.default_rng(obs_seed)
    obs_x = rng.uniform(x_lo, x_hi, size=n_obs)
    obs_t = rng.uniform(0.0, t_hi, size=n_obs)
    obs_u, _ = sinegordon_kink(obs_x, obs_t, m, v, true_beta)

    def ic_value(x, t):
        val, _ = sinegordon_kink(x, 0.0, m, v, true_beta)
        return val[:, None]

    def ic_velocity(x, t):
        _, vel = sinegordon_kink(x, 0.0, m, v, true_beta)
        return vel[:, None]

    conditions = [
        ConditionBlock(
            name="initial_value",
            category="ic",
            axis_spec=[("sample", n_ic), ("fixed", np.array([0.0]))],
            lanes=(0, 0),
            target=ic_value,
        ),
        ConditionBlock(
            name="initial_velocity",
            category="ic",
            axis_spec=[("sample", n_ic), ("fixed", np.array([0.0]))],
            lanes=(0, 1),
            target=ic_velocity,
        ),
        ConditionBlock(
            name="left_dirichlet",
            category="bc",
            axis_spec=[("fixed", np.array([x_lo])), ("sample", n_bc)],
            lanes=(0, 0),
            target=0.0,
        ),
        ConditionBlock(
            name="right_dirichlet",
            category="bc",
            axis_spec=[("fixed", np.array([x_hi])), ("sample", n_bc)],
            lanes=(0, 0),
            target=TWO_PI,
        ),
        ConditionBlock(
            name="observations",
            category="data",
            axis_spec=[("data", obs_x), ("data", obs_t)],
            lanes=(0, 0),
            target=lambda x, t: obs_u,
            kind="zipped",
        ),
    ]

    def ref_grid(axes):
        val, _ = sinegordon_kink(axes[0][:, None], axes[1][None, :], m, v, true_beta)
        return val

    problem = PdeProblem(
        name="sine_gordon_inverse",
        axis_names=("x", "t"),
        axis_ranges=((x_lo, x_hi), (0.0, t_hi)),
        residual=SineGordonResidual(m),
        conditions=conditions,
        reference_grid=ref_grid,
        reference_points=lambda X: sinegordon_kink(X[:, 0], X[:, 1], m, v, true_beta)[0],
        learnable_param=LearnableParam("beta", beta_init),
        eval_axes=[np.linspace(x_lo, x_hi, 101), np.linspace(0.0, t_hi, 101)],
    )
    problem.true_beta = true_beta
    return problem


PROBLEMS = {
    "advection_diffusion_1d": lambda **kw: advection_diffusion(k=1, **kw),
    "advection_diffusion_2d": lambda **kw: advection_diffusion(k=2, **kw),
    "advection_diffusion_3d": lambda **kw: advection_diffusion(k=3, **kw),
    "burgers_1d": burgers,
    "sine_gordon_inverse": sine_gordon_inverse,
}


def make_problem(name, **kwargs):
    if name not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; available: {sorted(PROBLEMS)}")
    return PROBLEMS[name](**kwargs)
