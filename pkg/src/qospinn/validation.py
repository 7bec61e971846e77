"""Input validation helpers shared across the package."""

import numpy as np

UNIT_TOL = 1e-9
ORTHO_TOL = 1e-8


def as_float_array(x, name="array", ndim=None):
    """Coerce to a float64 ndarray, optionally enforcing dimensionality."""
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_unit_vector(h, name="h", tol=UNIT_TOL):
    """Validate that ``h`` is a unit vector within ``tol`` of the 2-norm."""
    h = as_float_array(h, name, ndim=1)
    nrm = float(np.linalg.norm(h))
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"{name} must have unit norm, got ||{name}|| = {nrm:.12g}")
    return h


def check_orthogonal(W, name="W", tol=ORTHO_TOL):
    """Validate that ``W`` is square and orthogonal within ``tol`` (max deviation of W^T W from I)."""
    W = as_float_array(W, name, ndim=2)
    n, m = W.shape
    if n != m:
        raise ValueError(f"{name} must be square, got shape {W.shape}")
    dev = float(np.max(np.abs(W.T @ W - np.eye(n))))
    if dev > tol:
        raise ValueError(f"{name} is not orthogonal: max |W^T W - I| = {dev:.3g} > {tol:g}")
    return W


def check_points(X, k, name="X"):
    """Validate a (n_points, k) array of evaluation points."""
    X = as_float_array(X, name)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != k:
        raise ValueError(f"{name} must have shape (n_points, {k}), got {X.shape}")
    return X


def check_axes(axes, k, name="axes"):
    """Validate per-axis 1d point lists for a k-axis factorized grid."""
    if len(axes) != k:
        raise ValueError(f"{name} must supply {k} per-axis point lists, got {len(axes)}")
    return [as_float_array(a, f"{name}[{j}]", ndim=1) for j, a in enumerate(axes)]


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
