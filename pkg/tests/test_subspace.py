import numpy as np
import pytest
from scipy.linalg import subspace_angles
from scipy.stats import multivariate_normal, norm

from gmmdr import (
    GMMDR,
    FitConfig,
    MixtureFit,
    SingularCovarianceError,
    between_cluster_cov,
    build_kernels,
    combined_kernel,
    covariance_variation,
    density_grid,
    em_fit,
    estimate_directions,
    generalized_eigendecomp,
    project_data,
    project_params,
    total_covariance,
)
from gmmdr.datasets import VVV_COVARIANCES, VVV_MEANS, gen_chang, gen_synthetic_vvv
from gmmdr.metrics import adjusted_rand_index
from gmmdr.mixture import map_classify


def params(model, weights, means, covs):
    return MixtureFit.from_parameters(model, weights, means, covs)


@pytest.fixture(scope="module")
def toy_two_cluster():
    """Two unit-covariance clusters at -/+ e1 (the population view)."""
    fit = params("EEE", [0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [np.eye(2)] * 2)
    sigma = np.array([[2.0, 0.0], [0.0, 1.0]])  # between + pooled
    return fit, sigma


@pytest.fixture(scope="module")
def synthetic_population():
    """Population parameters of the three-cluster unconstrained example."""
    w = np.full(3, 1 / 3)
    fit = params("VVV", w, VVV_MEANS, VVV_COVARIANCES)
    grand = w @ VVV_MEANS
    centered = VVV_MEANS - grand
    sigma_b = (centered * w[:, None]).T @ centered
    pooled = np.einsum("g,gij->ij", w, VVV_COVARIANCES)
    return fit, sigma_b + pooled


class TestBetweenClusterCov:
    def test_equal_means_vanish(self):
        out = between_cluster_cov([0.3, 0.7], [[1.0, 2.0], [1.0, 2.0]])
        np.testing.assert_array_equal(out, np.zeros((2, 2)))

    def test_two_cluster_toy(self):
        out = between_cluster_cov([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]])
        np.testing.assert_allclose(out, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)

    def test_brute_force_oracle(self, rng):
        w = rng.dirichlet(np.ones(3))
        means = rng.normal(size=(3, 4))
        grand = w @ means
        expected = np.zeros((4, 4))
        for g in range(3):
            diff = (means[g] - grand)[:, None]
            expected += w[g] * diff @ diff.T
        np.testing.assert_allclose(between_cluster_cov(w, means), expected, atol=1e-14)


class TestCovarianceVariation:
    def test_equal_covariances_vanish(self):
        covs = np.broadcast_to(np.eye(2) * 1.7, (3, 2, 2)).copy()
        out = covariance_variation([0.2, 0.5, 0.3], covs, np.eye(2))
        np.testing.assert_array_equal(out, np.zeros((2, 2)))

    def test_scalar_matrices(self):
        covs = np.array([2 * np.eye(2), np.eye(2)])
        out = covariance_variation([0.5, 0.5], covs, np.eye(2))
        np.testing.assert_allclose(out, 0.25 * np.eye(2), atol=1e-14)

    def test_population_brute_force(self, synthetic_population):
        fit, sigma = synthetic_population
        pooled = np.einsum("g,gij->ij", fit.weights, fit.covariances)
        inv = np.linalg.inv(sigma)
        expected = np.zeros((3, 3))
        for g in range(3):
            dev = fit.covariances[g] - pooled
            expected += fit.weights[g] * dev @ inv @ dev.T
        out = covariance_variation(fit.weights, fit.covariances, sigma)
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestCombinedKernel:
    def test_zero_covar_part_identity_sigma(self, rng):
        m1 = rng.normal(size=(3, 3))
        m1 = m1 @ m1.T
        out = combined_kernel(m1, np.zeros((3, 3)), np.eye(3))
        np.testing.assert_allclose(out, m1 @ m1, atol=1e-12)

    def test_zero_means_part(self, rng):
        m2 = rng.normal(size=(3, 3))
        m2 = m2 @ m2.T
        out = combined_kernel(np.zeros((3, 3)), m2, np.eye(3) * 2)
        np.testing.assert_allclose(out, m2, atol=1e-14)

    def test_toy_leading_direction(self, toy_two_cluster):
        fit, sigma = toy_two_cluster
        kernels = build_kernels(fit, total_cov=sigma)
        np.testing.assert_array_equal(kernels.covar_kernel, np.zeros((2, 2)))
        values, vectors = generalized_eigendecomp(kernels.combined, sigma)
        lead = vectors[:, 0] / np.linalg.norm(vectors[:, 0])
        np.testing.assert_allclose(lead, [1.0, 0.0], atol=1e-12)


class TestGeneralizedEigendecomp:
    def test_kernel_equals_sigma(self, rng):
        A = rng.normal(size=(4, 4))
        sigma = A @ A.T + 4 * np.eye(4)
        values, V = generalized_eigendecomp(sigma, sigma)
        np.testing.assert_allclose(values, np.ones(4), atol=1e-10)
        np.testing.assert_allclose(V.T @ sigma @ V, np.eye(4), atol=1e-10)

    def test_diagonal_case(self):
        values, V = generalized_eigendecomp(np.diag([4.0, 1.0]), np.eye(2))
        np.testing.assert_allclose(values, [4.0, 1.0], atol=1e-13)
        beta = V / np.linalg.norm(V, axis=0)
        np.testing.assert_allclose(np.abs(beta), np.eye(2), atol=1e-13)

    def test_random_pair_against_symmetric_reduction_oracle(self, rng):
        from scipy.linalg import fractional_matrix_power

        A = rng.normal(size=(5, 5))
        M = A @ A.T
        B = rng.normal(size=(5, 5))
        sigma = B @ B.T + 5 * np.eye(5)
        values, V = generalized_eigendecomp(M, sigma, eig_threshold=0.0)
        # residual of the generalized problem
        resid = M @ V - sigma @ V @ np.diag(values)
        assert np.abs(resid).max() < 1e-10 * max(np.abs(M).max(), 1)
        # independent reduction through the inverse square root
        S = np.real(fractional_matrix_power(sigma, -0.5))
        oracle = np.sort(np.linalg.eigvalsh(S @ M @ S))[::-1]
        np.testing.assert_allclose(values, oracle[: len(values)], atol=1e-9)

    def test_sign_convention(self, rng):
        M = np.diag([3.0, 1.0])
        _, V = generalized_eigendecomp(M, np.eye(2))
        for j in range(V.shape[1]):
            assert V[np.abs(V[:, j]).argmax(), j] > 0

    def test_singular_sigma_rejected(self):
        sigma = np.diag([1.0, 0.0])
        with pytest.raises(SingularCovarianceError):
            generalized_eigendecomp(np.eye(2), sigma)

    def test_ill_conditioned_rejected(self):
        sigma = np.diag([1.0, 1e-14])
        with pytest.raises(SingularCovarianceError):
            generalized_eigendecomp(np.eye(2), sigma)


class TestEigenvalueSplit:
    def test_equal_covariance_fit_has_no_variance_part(self, rng):
        X = np.vstack([rng.normal(-3, 1, (60, 3)), rng.normal(3, 1, (60, 3))])
        fit = em_fit(X, 2, "EEE", FitConfig(seed=1))
        basis = estimate_directions(fit, X)
        assert np.abs(basis.var_contrib).max() < 1e-10
        assert basis.d <= 1  # capped at G - 1 for equal-covariance models

    def test_equal_means_fit_has_no_mean_part(self):
        covs = np.array([np.diag([4.0, 1.0]), np.diag([1.0, 1.0])])
        fit = params("VVV", [0.5, 0.5], np.zeros((2, 2)), covs)
        sigma = np.einsum("g,gij->ij", fit.weights, covs)
        basis = estimate_directions(fit, total_cov=sigma)
        assert np.abs(basis.mean_contrib).max() < 1e-12

    def test_population_split(self, synthetic_population):
        fit, sigma = synthetic_population
        basis = estimate_directions(fit, total_cov=sigma)
        li = basis.eigenvalues
        np.testing.assert_allclose(
            li, basis.mean_contrib + basis.var_contrib, atol=1e-10
        )
        # first direction carries substantial mean and variance information;
        # the second is dominated by mean differences
        assert basis.var_contrib[0] > 0.05 * li[0]
        assert basis.mean_contrib[0] > 0.05 * li[0]
        assert basis.mean_contrib[1] > 0.9 * li[1]


class TestProjections:
    def test_identity_basis(self, rng):
        X = rng.normal(size=(30, 3))
        fit = params("VVV", [1.0], np.zeros((1, 3)), np.eye(3)[None] * 2)
        basis = estimate_directions(fit, X)
        # replace with an identity-like basis by projecting on all directions
        Z = project_data(X, basis, basis.d)
        assert Z.shape == (30, basis.d)

    def test_projected_variables_uncorrelated(self, rng):
        ds = gen_synthetic_vvv(60, "noise", seed=5)
        fit = em_fit(ds.data, 3, "VVV", FitConfig(seed=1))
        basis = estimate_directions(fit, ds.data)
        Z = project_data(ds.data, basis)
        cov = total_covariance(Z)
        off = np.abs(cov - np.diag(np.diag(cov))).max()
        assert off < 1e-10
        norms = np.linalg.norm(basis.raw_vectors, axis=0)
        np.testing.assert_allclose(np.diag(cov), 1.0 / norms**2, atol=1e-10)

    def test_chang_single_direction_recovers_groups(self):
        # agglomerative seeding; random-center starts can miss this optimum
        ds = gen_chang(300, seed=6)
        fit = em_fit(ds.data, 2, "EEE", FitConfig(seed=0, init="hierarchical"))
        basis = estimate_directions(fit, ds.data)
        z = project_data(ds.data, basis, 1)
        refit = em_fit(z, 2, "V", FitConfig(seed=0))
        pred, _ = map_classify(refit, z)
        assert adjusted_rand_index(ds.labels, pred) >= 0.9

    def test_project_params_first_axis(self, toy_two_cluster):
        fit, sigma = toy_two_cluster
        basis = estimate_directions(fit, total_cov=sigma)
        means, covs = project_params(fit, basis, 1)
        np.testing.assert_allclose(np.sort(means.ravel()), [-1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(covs.ravel(), [1.0, 1.0], atol=1e-12)

    def test_project_params_congruence_oracle(self, rng):
        means = rng.normal(size=(3, 4))
        covs = np.array([np.diag(rng.uniform(0.5, 2, 4)) for _ in range(3)])
        fit = params("VVV", np.full(3, 1 / 3), means, covs)
        X = rng.normal(size=(50, 4))
        basis = estimate_directions(fit, X)
        mu_p, cov_p = project_params(fit, basis)
        beta = basis.directions
        np.testing.assert_allclose(mu_p, means @ beta, atol=1e-14)
        for g in range(3):
            np.testing.assert_allclose(cov_p[g], beta.T @ covs[g] @ beta, atol=1e-14)

    def test_dimension_checks(self, rng):
        X = rng.normal(size=(40, 3))
        fit = em_fit(X, 1, "VVV")
        basis = estimate_directions(
            params("VVV", [0.5, 0.5], rng.normal(size=(2, 3)), fit.covariances.repeat(2, 0)),
            X,
        )
        with pytest.raises(ValueError):
            project_data(X, basis, basis.d + 1)
        with pytest.raises(ValueError):
            project_data(X[:, :2], basis)


class TestDensityGrid:
    def test_standard_normal_origin(self):
        grid = density_grid([1.0], np.zeros((1, 2)), np.eye(2)[None], [0.0], [0.0])
        assert grid.density[0, 0] == pytest.approx(1 / (2 * np.pi), abs=1e-15)

    def test_symmetric_boundary(self):
        x = np.linspace(-3, 3, 7)
        grid = density_grid(
            [0.5, 0.5],
            np.array([[-1.0, 0.0], [1.0, 0.0]]),
            np.array([np.eye(2), np.eye(2)]),
            x,
            [0.0],
        )
        labels = grid.labels[0]
        assert np.all(labels[x < 0] == 1)
        assert np.all(labels[x > 0] == 2)
        assert labels[x == 0][0] == 1  # tie toward the first component

    def test_refinement_consistency(self):
        means = np.array([[-1.0, 0.0], [1.0, 0.5]])
        covs = np.array([np.eye(2), 0.5 * np.eye(2)])
        coarse_x = np.linspace(-2, 2, 5)
        fine_x = np.linspace(-2, 2, 9)  # halving the spacing keeps old points
        coarse = density_grid([0.4, 0.6], means, covs, coarse_x, [0.0, 1.0])
        fine = density_grid([0.4, 0.6], means, covs, fine_x, [0.0, 1.0])
        np.testing.assert_array_equal(coarse.density, fine.density[:, ::2])

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            density_grid([1.0], np.zeros((1, 2)), np.eye(2)[None], [], [0.0])


class TestAffineInvariance:
    """Parameter-level invariance: transformed directions are the back-mapped
    originals, eigenvalues unchanged, projected variates only shifted."""

    @staticmethod
    def random_population(rng, p=4, G=3):
        w = rng.dirichlet(np.ones(G) * 5)
        means = rng.normal(size=(G, p)) * 2
        covs = []
        for _ in range(G):
            A = rng.normal(size=(p, p))
            covs.append(A @ A.T + p * np.eye(p))
        covs = np.array(covs)
        fit = params("VVV", w, means, covs)
        grand = w @ means
        centered = means - grand
        sigma = (centered * w[:, None]).T @ centered + np.einsum("g,gij->ij", w, covs)
        return fit, sigma

    def test_direction_invariance(self, rng):
        for _ in range(5):
            fit, sigma = self.random_population(rng)
            basis = estimate_directions(fit, total_cov=sigma)
            p = sigma.shape[0]
            C = rng.normal(size=(p, p)) + np.eye(p)
            a = rng.normal(size=p)
            # row convention X* = X C + 1 a', i.e. x* = C' x + a
            means_t = fit.means @ C + a
            covs_t = np.einsum("ji,gjk,kl->gil", C, fit.covariances, C)
            sigma_t = C.T @ sigma @ C
            fit_t = params("VVV", fit.weights, means_t, covs_t)
            basis_t = estimate_directions(fit_t, total_cov=sigma_t)
            expected = np.linalg.solve(C, basis.raw_vectors)
            expected /= np.linalg.norm(expected, axis=0)
            got = basis_t.directions
            signs = np.sign((expected * got).sum(axis=0))
            np.testing.assert_allclose(got * signs, expected, atol=1e-8)
            np.testing.assert_allclose(basis_t.eigenvalues, basis.eigenvalues, atol=1e-8)

    def test_shifted_variates(self, rng):
        fit, sigma = self.random_population(rng)
        basis = estimate_directions(fit, total_cov=sigma)
        p = sigma.shape[0]
        C = rng.normal(size=(p, p)) + np.eye(p)
        a = rng.normal(size=p)
        X = rng.normal(size=(40, p))
        X_t = X @ C + a
        means_t = fit.means @ C + a
        covs_t = np.einsum("ji,gjk,kl->gil", C, fit.covariances, C)
        fit_t = params("VVV", fit.weights, means_t, covs_t)
        basis_t = estimate_directions(fit_t, total_cov=C.T @ sigma @ C)
        # raw (sigma-orthonormal) projections differ by a constant row shift
        Z = X @ basis.raw_vectors
        Z_t = X_t @ basis_t.raw_vectors
        signs = np.sign(
            (np.linalg.solve(C, basis.raw_vectors) * basis_t.raw_vectors).sum(axis=0)
        )
        Z_t = Z_t * signs
        shift = Z_t - Z
        assert np.abs(shift - shift[0]).max() < 1e-8


class TestKernelReduction:
    def test_equal_covariance_spans_match(self, rng):
        X = np.vstack(
            [
                rng.multivariate_normal([0, 0, 0], np.eye(3), 50),
                rng.multivariate_normal([4, 0, 2], np.eye(3), 50),
                rng.multivariate_normal([0, 4, -2], np.eye(3), 50),
            ]
        )
        fit = em_fit(X, 3, "EEE", FitConfig(seed=3))
        kernels = build_kernels(fit, X)
        d = fit.n_components - 1
        _, v_comb = generalized_eigendecomp(kernels.combined, kernels.total_cov, max_dim=d)
        _, v_means = generalized_eigendecomp(kernels.means_kernel, kernels.total_cov, max_dim=d)
        angles = subspace_angles(v_comb, v_means)
        assert np.abs(angles).max() < 1e-6


class TestDensityRatioIdentity:
    """Projecting on the informative direction preserves density ratios."""

    def test_toy_example(self, rng):
        mu1, mu2 = np.array([-1.0, 0.0]), np.array([1.0, 0.0])
        beta = np.array([1.0, 0.0])
        pts = rng.normal(size=(20, 2))
        full_ratio = multivariate_normal.pdf(pts, mu1, np.eye(2)) / multivariate_normal.pdf(
            pts, mu2, np.eye(2)
        )
        np.testing.assert_allclose(full_ratio, np.exp(-2 * pts[:, 0]), atol=1e-12)
        proj = pts @ beta
        proj_ratio = norm.pdf(proj, mu1 @ beta, 1.0) / norm.pdf(proj, mu2 @ beta, 1.0)
        np.testing.assert_allclose(proj_ratio, full_ratio, atol=1e-12)


class TestTransformerEstimator:
    def test_fit_transform_surface(self):
        ds = gen_synthetic_vvv(40, "noise", seed=3)
        est = GMMDR(n_components=(1, 4), random_state=0)
        Z = est.fit_transform(ds.data)
        assert Z.shape == (120, est.n_directions_)
        assert est.eigenvalues_.shape == (est.n_directions_,)
        assert np.all(np.diff(est.eigenvalues_) <= 1e-12)
        # prefit reuse skips the search
        est2 = GMMDR(mixture=est.mixture_)
        Z2 = est2.fit_transform(ds.data)
        np.testing.assert_allclose(Z, Z2, atol=1e-12)
