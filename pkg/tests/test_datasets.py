import numpy as np
import pytest
from scipy.stats import f_oneway

from gmmdr.datasets import (
    EEE_COVARIANCE,
    REDUNDANT_CORRELATIONS,
    VVV_COVARIANCES,
    LabeledDataset,
    ScenarioSpec,
    chang_covariance,
    chang_shift_vector,
    gen_chang,
    gen_model,
    gen_synthetic_vvv,
    generate,
    load_wine,
)


class TestChang:
    def test_shift_vector_endpoints(self):
        d = chang_shift_vector()
        assert d[0] == pytest.approx(0.90)
        assert d[14] == pytest.approx(0.20)
        assert len(d) == 15

    def test_covariance_blocks(self):
        cov = chang_covariance()
        assert cov[0, 1] == pytest.approx(-0.13 * 0.81)
        assert cov[0, 8] == pytest.approx(-0.13 * (-0.9) * 0.5)
        assert cov[9, 10] == pytest.approx(-0.13 * 0.25)
        assert np.all(np.diag(cov) == 1.0)
        assert np.linalg.eigvalsh(cov).min() > 0

    def test_bernoulli_rate(self):
        n = 5000
        ds = gen_chang(n, seed=0)
        rate = np.mean(ds.labels == 2)
        assert abs(rate - 0.2) <= 3 * np.sqrt(0.16 / n)

    def test_sample_covariance_entry(self):
        n = 20000
        ds = gen_chang(n, seed=1)
        d = chang_shift_vector()
        y = (ds.labels - 1).astype(float)
        z = ds.data - 0.5 * d[None, :] - np.outer(y, d)
        sample = np.cov(z[:, 0], z[:, 1])[0, 1]
        assert sample == pytest.approx(-0.1053, abs=0.02)

    def test_dimensions_and_labels(self):
        ds = gen_chang(50, seed=2)
        assert ds.data.shape == (50, 15)
        assert set(np.unique(ds.labels)) <= {1, 2}
        assert ds.clustering_columns == tuple(range(15))


class TestSyntheticVvv:
    def test_third_cluster_spherical_parameter(self):
        np.testing.assert_array_equal(VVV_COVARIANCES[2], 0.5 * np.eye(3))

    def test_all_parameters_positive_definite(self):
        for cov in VVV_COVARIANCES:
            assert np.linalg.eigvalsh(cov).min() > 0

    def test_cluster_means_clt(self):
        n_g = 10000
        ds = gen_synthetic_vvv(n_g, "none", seed=3)
        true_means = np.array([[0.0, 0.0, 0.0], [4.0, -2.0, 6.0], [-2.0, -4.0, 2.0]])
        for g in range(3):
            block = ds.data[ds.labels == g + 1]
            sd = np.sqrt(np.diag(VVV_COVARIANCES[g]))
            assert np.all(np.abs(block.mean(axis=0) - true_means[g]) <= 3 * sd / np.sqrt(n_g))

    def test_noise_layout(self):
        ds = gen_synthetic_vvv(50, "noise", seed=0)
        assert ds.data.shape == (150, 10)
        assert ds.clustering_columns == (0, 1, 2)

    def test_noise_columns_independent_of_labels(self):
        significant = 0
        total = 0
        for seed in range(20):
            ds = gen_synthetic_vvv(50, "noise", seed=seed)
            groups = [ds.data[ds.labels == g + 1] for g in range(3)]
            for j in range(3, 10):
                _, pval = f_oneway(*[g[:, j] for g in groups])
                significant += pval < 0.01
                total += 1
        assert significant / total <= 0.05


class TestModelScenarios:
    def test_model1_covariance_entry(self):
        assert EEE_COVARIANCE[0, 2] == pytest.approx(0.8)
        assert np.linalg.eigvalsh(EEE_COVARIANCE).min() > 0

    def test_redundant_correlations(self):
        spec = ScenarioSpec(
            base="model1_eee", n_total=1000, augmentation="noise+redundant", seed=7
        )
        ds = gen_model(spec)
        assert ds.data.shape == (1000, 10)
        for j, r in enumerate(REDUNDANT_CORRELATIONS):
            got = np.corrcoef(ds.data[:, j], ds.data[:, 3 + j])[0, 1]
            assert got == pytest.approx(r, abs=0.05), f"column {j}"

    def test_highdim_layout(self):
        spec = ScenarioSpec(
            base="model2_vev",
            n_total=100,
            augmentation="noise+redundant",
            highdim_k=3,
            seed=1,
        )
        ds = gen_model(spec)
        assert ds.data.shape == (100, 30)
        assert ds.clustering_columns == tuple(range(9))
        # 9 clustering + 9 redundant + 12 noise
        for j in range(9):
            r = REDUNDANT_CORRELATIONS[j % 3]
            got = np.corrcoef(ds.data[:, j], ds.data[:, 9 + j])[0, 1]
            assert got == pytest.approx(r, abs=0.2)

    def test_unequal_priors(self):
        spec = ScenarioSpec(
            base="model3_vvv", n_total=5000, priors=(0.1, 0.3, 0.6), seed=2
        )
        ds = gen_model(spec)
        shares = np.bincount(ds.labels, minlength=4)[1:] / 5000
        np.testing.assert_allclose(shares, [0.1, 0.3, 0.6], atol=0.03)

    def test_exact_per_cluster_counts(self):
        spec = ScenarioSpec(base="model2_vev", n_per_cluster=40, seed=0)
        ds = gen_model(spec)
        np.testing.assert_array_equal(np.bincount(ds.labels)[1:], [40, 40, 40])

    def test_label_conditional_cov_converges(self):
        spec = ScenarioSpec(base="model2_vev", n_per_cluster=10000, seed=5)
        ds = gen_model(spec)
        from gmmdr.datasets import _vev_covariances

        for g, cov in enumerate(_vev_covariances()):
            block = ds.data[ds.labels == g + 1]
            sample = np.cov(block.T, bias=True)
            scale = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
            assert np.abs((sample - cov) / scale).max() < 3 * 2 / np.sqrt(10000)


class TestSpecValidation:
    def test_reproducibility_bit_identical(self):
        spec = ScenarioSpec(base="model1_eee", n_total=200, augmentation="noise", seed=11)
        a = generate(spec)
        b = generate(spec)
        np.testing.assert_array_equal(a.data, b.data)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_chang_requires_total_n(self):
        with pytest.raises(ValueError):
            ScenarioSpec(base="chang15", n_per_cluster=10)

    def test_exactly_one_size_field(self):
        with pytest.raises(ValueError):
            ScenarioSpec(base="model1_eee", n_total=10, n_per_cluster=10)
        with pytest.raises(ValueError):
            ScenarioSpec(base="model1_eee")

    def test_priors_must_be_simplex(self):
        with pytest.raises(ValueError):
            ScenarioSpec(base="model1_eee", n_total=10, priors=(0.5, 0.2))

    def test_highdim_only_for_model2(self):
        with pytest.raises(ValueError):
            ScenarioSpec(
                base="model1_eee", n_total=10, augmentation="noise+redundant", highdim_k=2
            )

    def test_unknown_base(self):
        with pytest.raises(ValueError):
            ScenarioSpec(base="model9", n_total=10)


class TestBundled:
    def test_wine_shape_and_classes(self):
        data, labels, names = load_wine()
        assert data.shape == (178, 13)
        np.testing.assert_array_equal(np.bincount(labels)[1:], [59, 71, 48])
        assert len(names) == 13
