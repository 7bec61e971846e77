"""Order-2 scalar Taylor jets: (value, d/dx, d2/dx2) w.r.t. one active input.

``d2`` stores the raw second derivative, not the halved Taylor coefficient,
because PDE residuals consume f'' directly. Components may be floats or
numpy arrays of matching shape, so a jet can carry a whole batch of points.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Jet2:
    v: object
    d1: object
    d2: object

    @staticmethod
    def seed(x, scale=1.0):
        """Jet of the active variable itself: d1 = scale (chain-rule seed), d2 = 0."""
        x = np.asarray(x, dtype=float)
        return Jet2(x, np.full_like(x, float(scale)), np.zeros_like(x))

    @staticmethod
    def const(c, like=None):
        c = np.asarray(c, dtype=float)
        if like is not None:
            c = np.broadcast_to(c, np.shape(like.v)).copy()
        return Jet2(c, np.zeros_like(c), np.zeros_like(c))

    def __add__(self, other):
        return jet_binary(self, _as_jet(other), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return jet_binary(self, _as_jet(other), "sub")

    def __rsub__(self, other):
        return jet_binary(_as_jet(other), self, "sub")

    def __mul__(self, other):
        return jet_binary(self, _as_jet(other), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return jet_binary(self, _as_jet(other), "div")

    def __rtruediv__(self, other):
        return jet_binary(_as_jet(other), self, "div")

    def __neg__(self):
        return jet_unary(self, "neg")


def _as_jet(x):
    if isinstance(x, Jet2):
        return x
    c = np.asarray(x, dtype=float)
    return Jet2(c, np.zeros_like(c), np.zeros_like(c))


def jet_binary(a, b, op):
    """Combine two jets: add / sub / mul / div with order-2 Taylor arithmetic."""
    if op == "add":
        return Jet2(a.v + b.v, a.d1 + b.d1, a.d2 + b.d2)
    if op == "sub":
        return Jet2(a.v - b.v, a.d1 - b.d1, a.d2 - b.d2)
    if op == "mul":
        return Jet2(
            a.v * b.v,
            a.v * b.d1 + a.d1 * b.v,
            a.v * b.d2 + 2.0 * a.d1 * b.d1 + a.d2 * b.v,
        )
    if op == "div":
        if np.any(np.asarray(b.v) == 0.0):
            raise ZeroDivisionError("jet division by a zero value")
        w = a.v / b.v
        w1 = (a.d1 - w * b.d1) / b.v
        w2 = (a.d2 - 2.0 * w1 * b.d1 - w * b.d2) / b.v
        return Jet2(w, w1, w2)
    raise ValueError(f"unknown binary op {op!r}")


# (f, f', f'') tables; `scale` is handled separately since it carries a constant.
_UNARY = {
    "tanh": lambda v: _tanh_derivs(v),
    "sin": lambda v: (np.sin(v), np.cos(v), -np.sin(v)),
    "cos": lambda v: (np.cos(v), -np.sin(v), -np.cos(v)),
    "exp": lambda v: _exp_derivs(v),
    "neg": lambda v: (-v, -np.ones_like(v), np.zeros_like(v)),
    "sqrt": lambda v: _sqrt_derivs(v),
    "arctan": lambda v: _arctan_derivs(v),
}


def _tanh_derivs(v):
    t = np.tanh(v)
    u = 1.0 - t * t
    return t, u, -2.0 * t * u


def _exp_derivs(v):
    e = np.exp(v)
    return e, e, e


def _sqrt_derivs(v):
    r = np.sqrt(v)
    return r, 0.5 / r, -0.25 / (r * v)


def _arctan_derivs(v):
    den = 1.0 + v * v
    return np.arctan(v), 1.0 / den, -2.0 * v / den**2


def jet_unary(a, f, c=None):
    """Apply an elementwise function: (f(v), f'(v) d1, f''(v) d1^2 + f'(v) d2)."""
    if f == "scale":
        return Jet2(c * a.v, c * a.d1, c * a.d2)
    fv, f1, f2 = _UNARY[f](np.asarray(a.v, dtype=float))
    return Jet2(fv, f1 * a.d1, f2 * a.d1 * a.d1 + f1 * a.d2)
