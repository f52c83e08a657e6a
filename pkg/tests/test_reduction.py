import numpy as np
import pytest

from flowsentry.reduction import fit_pca, transform

from oracles import pca_eig


class TestFitPca:
    def test_collinear_data_explains_everything_with_one_component(self):
        t = np.linspace(-3, 3, 40)
        data = np.column_stack([t, t])
        model = fit_pca(data, 1)
        assert model.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)
        want = np.array([1.0, 1.0]) / np.sqrt(2)
        np.testing.assert_allclose(model.components[0], want, atol=1e-12)

    def test_matches_covariance_eigendecomposition_oracle(self):
        data = np.array(
            [[2.5, 2.4, 1.0], [0.5, 0.7, 2.0], [2.2, 2.9, 0.5], [1.9, 2.2, 1.1]]
        )
        model = fit_pca(data, 2)
        comps, ratio = pca_eig(data, 2)
        np.testing.assert_allclose(model.components, comps, atol=1e-8)
        np.testing.assert_allclose(model.explained_variance_ratio, ratio, atol=1e-8)
        got = transform(model, data)
        want = (data - data.mean(axis=0)) @ comps.T
        np.testing.assert_allclose(got, want, atol=1e-8)

    def test_random_data_projections_match_oracle(self):
        rng = np.random.default_rng(17)
        data = rng.normal(size=(60, 8)) @ rng.normal(size=(8, 8))
        k = 5
        model = fit_pca(data, k)
        comps, ratio = pca_eig(data, k)
        np.testing.assert_allclose(np.abs(model.components), np.abs(comps), atol=1e-8)
        np.testing.assert_allclose(model.components, comps, atol=1e-8)
        np.testing.assert_allclose(model.explained_variance_ratio, ratio, atol=1e-8)

    def test_orthonormal_components(self):
        rng = np.random.default_rng(0)
        model = fit_pca(rng.normal(size=(50, 10)), 6)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)

    def test_explained_variance_ratio_well_formed(self):
        rng = np.random.default_rng(1)
        model = fit_pca(rng.normal(size=(80, 12)), 12)
        evr = model.explained_variance_ratio
        assert np.all(evr >= 0)
        assert np.all(np.diff(evr) <= 1e-12)
        assert evr.sum() <= 1.0 + 1e-8

    def test_fit_invariant_to_row_order(self):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(40, 5))
        a = fit_pca(data, 3)
        b = fit_pca(data[rng.permutation(40)], 3)
        np.testing.assert_allclose(a.components, b.components, atol=1e-9)

    def test_projection_variance_equals_explained_variance(self):
        rng = np.random.default_rng(4)
        data = rng.normal(size=(100, 6)) * np.array([5, 3, 2, 1, 0.5, 0.1])
        model = fit_pca(data, 4)
        proj = transform(model, data)
        total_var = ((data - data.mean(axis=0)) ** 2).sum() / (len(data) - 1)
        for i in range(4):
            var_i = proj[:, i].var(ddof=1)
            assert var_i / total_var == pytest.approx(
                model.explained_variance_ratio[i], rel=1e-6
            )

    def test_rank_deficient_trailing_components_allowed(self):
        rng = np.random.default_rng(6)
        base = rng.normal(size=(30, 2))
        data = np.column_stack([base, base @ rng.normal(size=(2, 3))])  # rank 2
        model = fit_pca(data, 4)
        assert model.explained_variance_ratio[2] == pytest.approx(0.0, abs=1e-12)

    def test_bad_component_count_rejected(self):
        data = np.random.default_rng(0).normal(size=(10, 4))
        for bad in (0, 5, 11):
            with pytest.raises(ValueError):
                fit_pca(data, bad)


class TestTransform:
    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(8)
        data = rng.normal(size=(30, 5)) + 3
        model = fit_pca(data, 3)
        np.testing.assert_allclose(transform(model, data.mean(axis=0)), 0.0, atol=1e-10)

    def test_full_rank_round_trip(self):
        rng = np.random.default_rng(9)
        data = rng.normal(size=(25, 6))
        model = fit_pca(data, 6)
        proj = transform(model, data)
        back = proj @ model.components + model.mean
        np.testing.assert_allclose(back, data, atol=1e-6)

    def test_row_count_preserved(self):
        rng = np.random.default_rng(10)
        model = fit_pca(rng.normal(size=(20, 4)), 2)
        assert transform(model, rng.normal(size=(7, 4))).shape == (7, 2)

    def test_dimension_mismatch_rejected(self):
        model = fit_pca(np.random.default_rng(0).normal(size=(10, 4)), 2)
        with pytest.raises(ValueError):
            transform(model, np.zeros((3, 5)))
