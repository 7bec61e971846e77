import numpy as np
import pytest

from qospinn.jets import Jet2, jet_binary, jet_unary


def test_product_rule():
    out = jet_binary(Jet2(1.0, 2.0, 3.0), Jet2(4.0, 5.0, 6.0), "mul")
    assert (out.v, out.d1, out.d2) == (4.0, 13.0, 38.0)


def test_add_zero_identity():
    a = Jet2(0.3, -1.2, 0.7)
    z = Jet2.const(0.0)
    out = a + z
    assert (out.v, out.d1, out.d2) == (a.v, a.d1, a.d2)


def test_square_of_seed():
    x = Jet2.seed(3.0)
    sq = x * x
    assert (sq.v, sq.d1, sq.d2) == (9.0, 6.0, 2.0)


def test_division_against_fd():
    def f(x):
        return (1 + 2 * x + 1.5 * x * x) / (4 + 5 * x + 3 * x * x)

    a = Jet2(1.0, 2.0, 3.0)
    b = Jet2(4.0, 5.0, 6.0)
    q = jet_binary(a, b, "div")
    eps = 1e-5
    assert abs(q.v - f(0.0)) < 1e-14
    assert abs(q.d1 - (f(eps) - f(-eps)) / (2 * eps)) < 1e-8
    assert abs(q.d2 - (f(eps) - 2 * f(0) + f(-eps)) / eps**2) < 1e-4


def test_division_by_zero_value():
    with pytest.raises(ZeroDivisionError):
        jet_binary(Jet2(1.0, 0.0, 0.0), Jet2(0.0, 1.0, 0.0), "div")


def test_unary_at_origin():
    t = jet_unary(Jet2.seed(0.0), "tanh")
    assert (t.v, t.d1, t.d2) == (0.0, 1.0, 0.0)
    s = jet_unary(Jet2.seed(0.0), "sin")
    assert (s.v, s.d1, s.d2) == (0.0, 1.0, 0.0)
    e = jet_unary(Jet2(0.0, 1.0, 0.0), "exp")
    assert (e.v, e.d1, e.d2) == (1.0, 1.0, 1.0)


def test_unary_against_fd():
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1.2, 1.2, size=7)
    eps = 1e-5
    for name, fn in (("tanh", np.tanh), ("sin", np.sin), ("cos", np.cos),
                     ("exp", np.exp), ("arctan", np.arctan)):
        out = jet_unary(Jet2.seed(xs), name)
        d1 = (fn(xs + eps) - fn(xs - eps)) / (2 * eps)
        d2 = (fn(xs + eps) - 2 * fn(xs) + fn(xs - eps)) / eps**2
        assert np.max(np.abs(out.d1 - d1)) < 1e-9
        assert np.max(np.abs(out.d2 - d2)) < 1e-4


def test_sqrt_positive_domain():
    xs = np.array([0.25, 1.0, 4.0])
    out = jet_unary(Jet2.seed(xs), "sqrt")
    assert np.allclose(out.v, np.sqrt(xs))
    assert np.allclose(out.d1, 0.5 / np.sqrt(xs))
    assert np.allclose(out.d2, -0.25 * xs**-1.5)


def test_linearity():
    rng = np.random.default_rng(1)
    xs = rng.normal(size=5)
    f = jet_unary(Jet2.seed(xs), "sin")
    g = jet_unary(Jet2.seed(xs), "exp")
    combo = jet_unary(f, "scale", 2.5) + jet_unary(g, "scale", -0.5)
    assert np.allclose(combo.v, 2.5 * f.v - 0.5 * g.v)
    assert np.allclose(combo.d1, 2.5 * f.d1 - 0.5 * g.d1)
    assert np.allclose(combo.d2, 2.5 * f.d2 - 0.5 * g.d2)


def test_chain_consistency_composite():
    # sin(exp(x)): f' = cos(e^x) e^x, f'' = -sin(e^x) e^{2x} + cos(e^x) e^x
    xs = np.linspace(-0.8, 0.8, 9)
    out = jet_unary(jet_unary(Jet2.seed(xs), "exp"), "sin")
    e = np.exp(xs)
    assert np.max(np.abs(out.v - np.sin(e))) < 1e-10
    assert np.max(np.abs(out.d1 - np.cos(e) * e)) < 1e-10
    assert np.max(np.abs(out.d2 - (-np.sin(e) * e * e + np.cos(e) * e))) < 1e-10


def test_neg_and_scale():
    a = Jet2(2.0, -1.0, 0.5)
    n = -a
    assert (n.v, n.d1, n.d2) == (-2.0, 1.0, -0.5)
    s = jet_unary(a, "scale", 3.0)
    assert (s.v, s.d1, s.d2) == (6.0, -3.0, 1.5)
