import numpy as np
import pytest

from qospinn.layers import angles_to_matrix
from qospinn.lipschitz import (
    empirical_lipschitz_check,
    estimate_bound_ingredients,
    model_bound_report,
    spectral_norm,
    stacking_bounds,
    subnet_spec_norm_product,
    theorem_bounds,
)
from qospinn.model import build_spinn


class TestSpectralNorm:
    def test_identity(self):
        assert abs(spectral_norm(np.eye(7)) - 1.0) < 1e-12

    def test_diagonal(self):
        assert abs(spectral_norm(np.diag([3.0, 1.0])) - 3.0) < 1e-9

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((4, 4))) == 0.0

    def test_against_dense_eigensolve(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            M = rng.normal(size=(20, 20))
            truth = float(np.sqrt(np.max(np.linalg.eigvalsh(M.T @ M))))
            assert abs(spectral_norm(M, iters=500) - truth) < 1e-6

    def test_orthogonal_transform_has_unit_norm(self):
        rng = np.random.default_rng(1)
        from qospinn.layers import PyramidLayer
        for _ in range(10):
            layer = PyramidLayer(int(rng.integers(2, 9)), int(rng.integers(2, 9)), rng=rng)
            layer.thetas[:] = rng.normal(size=layer.thetas.size)
            assert abs(spectral_norm(angles_to_matrix(layer)) - 1.0) < 1e-9

    def test_iters_validation(self):
        with pytest.raises(ValueError):
            spectral_norm(np.eye(2), iters=0)


class TestIngredients:
    def test_constant_subnet(self):
        fn = lambda xs: np.full((len(xs), 3), 1.4)
        rng = np.random.default_rng(2)
        M, L = estimate_bound_ingredients(fn, (0.0, 1.0), 500, rng)
        assert abs(M - 1.4 * 1.05) < 1e-12
        assert L == 0.0

    def test_linear_map(self):
        fn = lambda xs: 2.0 * np.stack([xs, xs], axis=1)
        rng = np.random.default_rng(3)
        M, L = estimate_bound_ingredients(fn, (0.0, 1.0), 2000, rng)
        # true Lipschitz constant is 2 sqrt(2); sampled value within the margin
        truth = 2.0 * np.sqrt(2.0)
        assert truth * 0.99 <= L <= truth * 1.06

    def test_monotone_in_samples(self):
        fn = lambda xs: np.stack([np.sin(5 * xs)], axis=1)
        prev_m, prev_l = 0.0, 0.0
        for n in (10, 100, 1000):
            M, L = estimate_bound_ingredients(fn, (0.0, 1.0), n, np.random.default_rng(4))
            assert M >= prev_m - 1e-12 and L >= prev_l - 1e-12
            prev_m, prev_l = M, L

    def test_degenerate_domain(self):
        with pytest.raises(ValueError):
            estimate_bound_ingredients(lambda x: x[:, None], (1.0, 1.0), 10,
                                       np.random.default_rng(0))


class TestTheoremBounds:
    def test_single_axis(self):
        assert theorem_bounds(3, [2.0], [5.0]) == pytest.approx(15.0)

    def test_arithmetic_case(self):
        assert theorem_bounds(2, [1.0, 1.0], [3.0, 4.0]) == pytest.approx(10.0)

    def test_rescaling_consistency(self):
        rng = np.random.default_rng(5)
        M = rng.uniform(0.5, 2.0, size=4)
        L = rng.uniform(0.5, 2.0, size=4)
        c = 1.7
        direct = theorem_bounds(3, c * M, c * L)
        again = theorem_bounds(3, list(c * M), list(c * L))
        assert direct == pytest.approx(again)
        # scaling both M and L by c multiplies the bound by c^d
        assert direct == pytest.approx(c**4 * theorem_bounds(3, M, L))

    def test_zero_m_rejected(self):
        with pytest.raises(ValueError):
            theorem_bounds(2, [0.0, 1.0], [1.0, 1.0])


class TestEmpiricalCheck:
    def test_constant_model(self):
        fn = lambda X: np.zeros(len(X))
        ratio, ok = empirical_lipschitz_check(fn, 0.5, [(0, 1), (0, 1)], 1000,
                                              np.random.default_rng(6))
        assert ratio == 0.0 and ok

    def test_random_model_within_theorem2(self):
        model = build_spinn(2, [5, 5, 4, 4], [(0, 1), (0, 1)], seed=7)
        rng = np.random.default_rng(8)
        for s in model.subnets:
            for L in s.post_layers:
                L.W[:] = rng.normal(size=L.W.shape) * 0.5
        report = model_bound_report(model, samples=1500, pairs=10000, seed=9)
        assert report.bound_satisfied
        assert report.empirical_max_ratio <= report.theorem2_bound

    def test_ingredient_bound_never_violated_across_models(self):
        rng = np.random.default_rng(10)
        for trial in range(50):
            model = build_spinn(2, [4, 4, 4, 3], [(0, 1), (0, 1)], seed=trial)
            for s in model.subnets:
                for L in s.post_layers:
                    L.W[:] = rng.normal(size=L.W.shape) * 0.6
            M, Ls = [], []
            sample_rng = np.random.default_rng(1000 + trial)
            for j in range(2):
                m_j, l_j = estimate_bound_ingredients(
                    lambda xs, j=j: model.axis_values(j, xs), (0.0, 1.0), 800, sample_rng)
                M.append(m_j)
                Ls.append(l_j)
            bound = theorem_bounds(model.rank, M, Ls)
            ratio, ok = empirical_lipschitz_check(
                model.predict_points, bound, model.axis_ranges, 1000,
                np.random.default_rng(2000 + trial))
            assert ok, (trial, ratio, bound)


class TestStacking:
    def test_single_subnet(self):
        assert stacking_bounds([0.7], [1.3]) == (0.7, 1.3)

    def test_min_max(self):
        assert stacking_bounds([0.5, 0.9], [1.0, 2.0]) == (0.5, 2.0)

    def test_ordering_violation(self):
        with pytest.raises(ValueError):
            stacking_bounds([1.5], [1.0])


class TestBoundReport:
    def test_report_fields_and_text(self):
        model = build_spinn(2, [4, 4, 4, 2], [(0, 1), (0, 1)], seed=11)
        report = model_bound_report(model, samples=300, pairs=2000, seed=12)
        assert len(report.M) == 2
        assert report.theorem1_bound > 0
        assert report.theorem2_bound > 0
        for s in report.ortho_spectral_norms:
            assert abs(s - 1.0) < 1e-9
        text = report.to_text()
        assert "theorem2_bound" in text

    def test_spec_norm_product(self):
        model = build_spinn(2, [4, 4, 4, 2], [(0, 1), (0, 1)], seed=13)
        sub = model.subnets[0]
        prod = subnet_spec_norm_product(sub)
        expect = spectral_norm(sub.post_layers[0].W) * spectral_norm(sub.post_layers[1].W)
        assert prod == pytest.approx(expect)
