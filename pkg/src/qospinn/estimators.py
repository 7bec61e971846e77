"""Scikit-learn style estimators wrapping the solvers.

``QoSpinnSolver`` is fit/predict shaped: ``fit`` trains the separable model
against the PDE's physics (optionally with observation data for inverse
problems), ``predict`` evaluates the learned field at arbitrary points.
``QoSpinnUncertainty`` mirrors ``GaussianProcessRegressor.predict`` with
``return_std`` for the distance-aware head.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .cliparse import parse_architecture
from .model import build_spinn
from .pde import make_problem
from .training import TrainConfig, evaluate_model, train
from .uq import DropoutSpinn, UqSpinn, UqTrainConfig, train_mc_baseline, train_uq
from .validation import check_points


class QoSpinnSolver(BaseEstimator):
    """Separable physics-informed solver with orthogonal circuit layers.

    Parameters mirror the experiment tables: an architecture string like
    ``"2 x [16, 16, 16, 20]"``, the Adam step size, the total collocation
    budget (split evenly over axes), and the loss weights. ``fit`` accepts
    optional scattered observations ``(X, y)``, which add a data term (used
    by inverse problems to identify the physical parameter).
    """

    def __init__(self, problem="advection_diffusion_1d", architecture="2 x [16, 16, 16, 20]",
                 lr=5e-3, epochs=20000, collocation=250, lambda_res=1.0, lambda_ic=10.0,
                 lambda_bc=10.0, lambda_data=10.0, resample_every=100, seed=0,
                 log_every=100, eval_every=2000, problem_options=None):
        self.problem = problem
        self.architecture = architecture
        self.lr = lr
        self.epochs = epochs
        self.collocation = collocation
        self.lambda_res = lambda_res
        self.lambda_ic = lambda_ic
        self.lambda_bc = lambda_bc
        self.lambda_data = lambda_data
        self.resample_every = resample_every
        self.seed = seed
        self.log_every = log_every
        self.eval_every = eval_every
        self.problem_options = problem_options

    def _build(self):
        problem = make_problem(self.problem, **(self.problem_options or {}))
        n_sub, widths, trunk = parse_architecture(self.architecture)
        if trunk is not None:
            raise ValueError("trunk architectures belong to QoSpinnUncertainty")
        if n_sub != problem.n_axes:
            raise ValueError(
                f"architecture declares {n_sub} subnets but problem "
                f"{problem.name} has {problem.n_axes} axes")
        model = build_spinn(n_sub, widths, problem.axis_ranges, seed=self.seed)
        return problem, model

    def fit(self, X=None, y=None, callback=None):
        problem, model = self._build()
        if X is not None:
            from .pde import ConditionBlock
            X = check_points(X, problem.n_axes, "X")
            y = np.asarray(y, dtype=float).ravel()
            if len(y) != len(X):
                raise ValueError("X and y must have matching lengths")
            problem.conditions.append(ConditionBlock(
                name="user_observations",
                category="data",
                axis_spec=[("data", X[:, j]) for j in range(problem.n_axes)],
                lanes=(0,) * problem.n_axes,
                target=lambda *coords: y,
                kind="zipped",
            ))
        config = TrainConfig(
            lr=self.lr, epochs=self.epochs, collocation=self.collocation,
            lambda_res=self.lambda_res, lambda_ic=self.lambda_ic,
            lambda_bc=self.lambda_bc, lambda_data=self.lambda_data,
            resample_every=self.resample_every, seed=self.seed,
            log_every=self.log_every, eval_every=self.eval_every)
        result = train(model, problem, config, callback=callback)
        self.problem_ = problem
        self.model_ = result.model
        self.history_ = result.history
        self.eval_mse_ = result.eval_mse
        self.eval_max_ = result.eval_max
        self.param_estimate_ = result.param_estimate
        return self

    def predict(self, X):
        X = check_points(X, self.model_.n_axes, "X")
        return self.model_.predict_points(X)

    def predict_grid(self, axes):
        return self.model_.predict_grid(axes)

    def score(self, X=None, y=None):
        """R^2 against the problem reference (or against supplied y)."""
        if X is None:
            pred = self.model_.predict_grid(self.problem_.eval_axes).ravel()
            truth = self.problem_.reference_grid(self.problem_.eval_axes).ravel()
        else:
            X = check_points(X, self.model_.n_axes, "X")
            pred = self.predict(X)
            truth = np.asarray(y, dtype=float).ravel()
        ss_res = float(np.sum((truth - pred) ** 2))
        ss_tot = float(np.sum((truth - truth.mean()) ** 2))
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0

    def evaluate(self, axes=None):
        return evaluate_model(self.model_, self.problem_, axes)


class QoSpinnUncertainty(BaseEstimator):
    """Distance-aware solver: residual subnets + trunk + GP readout.

    ``predict(X, return_std=True)`` returns the physics-informed mean and
    the posterior predictive standard deviation; no spectral normalization
    step is needed because every inner transform is exactly orthogonal.
    Currently trained against the viscous Burgers setup.
    """

    def __init__(self, architecture="2x[35, 35] + [35, 35]", lr=5e-4, epochs=6000,
                 collocation_pairs=1024, n_ic=128, n_bc=64, gamma=0.05,
                 feature_count=128, ridge=1.0, lambda_res=1.0, lambda_ic=10.0,
                 lambda_bc=10.0, beta_l2=1e-6, resample_every=200, nu=0.05, seed=0,
                 log_every=500):
        self.architecture = architecture
        self.lr = lr
        self.epochs = epochs
        self.collocation_pairs = collocation_pairs
        self.n_ic = n_ic
        self.n_bc = n_bc
        self.gamma = gamma
        self.feature_count = feature_count
        self.ridge = ridge
        self.lambda_res = lambda_res
        self.lambda_ic = lambda_ic
        self.lambda_bc = lambda_bc
        self.beta_l2 = beta_l2
        self.resample_every = resample_every
        self.nu = nu
        self.seed = seed
        self.log_every = log_every

    def _config(self):
        return UqTrainConfig(
            lr=self.lr, epochs=self.epochs, n_colloc=self.collocation_pairs,
            n_ic=self.n_ic, n_bc=self.n_bc, lambda_res=self.lambda_res,
            lambda_ic=self.lambda_ic, lambda_bc=self.lambda_bc,
            beta_l2=self.beta_l2, resample_every=self.resample_every,
            seed=self.seed, log_every=self.log_every, nu=self.nu)

    def fit(self, X=None, y=None, callback=None):
        n_sub, widths, trunk = parse_architecture(self.architecture)
        if trunk is None:
            raise ValueError("uncertainty architectures need a '+ [trunk]' segment")
        axis_ranges = [(0.0, 1.0)] * n_sub
        self.model_ = UqSpinn(widths, trunk, axis_ranges, feature_count=self.feature_count,
                              gamma=self.gamma, ridge=self.ridge, seed=self.seed)
        self.history_ = train_uq(self.model_, self._config(), callback=callback)
        return self

    def predict(self, X, return_std=False):
        X = check_points(X, self.model_.n_axes, "X")
        return self.model_.predict(X, return_std=return_std)


class McDropoutBaseline(BaseEstimator):
    """Dense separable net with Monte-Carlo dropout, for UQ comparison."""

    def __init__(self, architecture="2x[100, 100] + [100, 100]", lr=5e-4, epochs=4000,
                 collocation_pairs=1024, n_ic=128, n_bc=64, p_drop=0.05, passes=100,
                 nu=0.05, seed=0, log_every=500, resample_every=200):
        self.architecture = architecture
        self.lr = lr
        self.epochs = epochs
        self.collocation_pairs = collocation_pairs
        self.n_ic = n_ic
        self.n_bc = n_bc
        self.p_drop = p_drop
        self.passes = passes
        self.nu = nu
        self.seed = seed
        self.log_every = log_every
        self.resample_every = resample_every

    def fit(self, X=None, y=None, callback=None):
        n_sub, widths, trunk = parse_architecture(self.architecture)
        if trunk is None:
            raise ValueError("baseline architectures need a '+ [trunk]' segment")
        self.model_ = DropoutSpinn(widths, trunk, [(0.0, 1.0)] * n_sub,
                                   p_drop=self.p_drop, seed=self.seed)
        cfg = UqTrainConfig(lr=self.lr, epochs=self.epochs, n_colloc=self.collocation_pairs,
                            n_ic=self.n_ic, n_bc=self.n_bc, seed=self.seed,
                            log_every=self.log_every, resample_every=self.resample_every,
                            nu=self.nu)
        self.history_ = train_mc_baseline(self.model_, cfg, callback=callback)
        return self

    def predict(self, X, return_std=False):
        from .uq import mc_dropout_predict
        X = check_points(X, self.model_.n_axes, "X")
        rng = np.random.default_rng(self.seed + 1)
        mu, sd = mc_dropout_predict(self.model_, X, passes=self.passes, rng=rng)
        return (mu, sd) if return_std else mu
