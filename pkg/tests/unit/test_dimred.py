import numpy as np

import pytest

from stacksense.dimred import (
    ReductionConfig,
    ReductionPipeline,
    correlation_matrix,
    eliminate_dependent,
    fit_pipeline,
    normalize_fit,
    pca_fit,
    project,
    reconstruct,
    reconstruction_error,
    select_components,
    standardize,
)
from stacksense.exceptions import DimensionMismatch, EmptyInput


def dependent_data(seed: int) -> tuple:
    """
    Returns ``(x, k)``: ``k`` independent columns plus random combinations of
    them, shuffled.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(30, 80))
    k = int(rng.integers(1, 6))
    base = rng.normal(size=(n, k))
    combos = base @ rng.normal(size=(k, int(rng.integers(1, 5))))
    x = np.hstack((base, combos))
    return x[:, rng.permutation(x.shape[1])], k


class Test:
    @pytest.mark.parametrize("seed", range(20))  # type: ignore
    def test_reconstruction_error_is_discarded_variance(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        n = int(rng.integers(20, 101))
        d = int(rng.integers(2, 13))
        x = rng.normal(size=(n, d)) @ rng.normal(size=(d, d))
        for retain in (0.5, 0.9, 0.99):
            pipeline = fit_pipeline(x, retain)
            p = pipeline.output_dim
            lam = pipeline.eigenvalues
            error = reconstruction_error(pipeline, x)
            assert 2 * error / n == pytest.approx(float(np.sum(lam[p:])), abs=1e-8)
            assert np.sum(lam[:p]) >= retain * np.sum(lam) - 1e-9
            if p > 1:
                assert np.sum(lam[: p - 1]) < retain * np.sum(lam)

    def test_scatter_matrix(self) -> None:
        x = np.random.default_rng(0).normal(size=(40, 5))
        means, stds, constant = normalize_fit(x)
        assert not constant.any()
        z = standardize(x, means, stds)
        assert np.allclose(x.shape[0] * correlation_matrix(z), z.T @ z)
        assert np.allclose(np.diag(correlation_matrix(z)), 1.0)

    def test_coin_flips_uncorrelated(self) -> None:
        x = np.random.default_rng(9).choice([-1.0, 1.0], size=(10000, 6))
        r = correlation_matrix(standardize(x, *normalize_fit(x)[:2]))
        assert np.allclose(np.diag(r), 1.0)
        assert np.max(np.abs(r - np.diag(np.diag(r)))) < 0.05

    @pytest.mark.parametrize("seed", range(100))  # type: ignore
    def test_eliminate_dependent(self, seed: int) -> None:
        x, k = dependent_data(seed)
        z = standardize(x, *normalize_fit(x)[:2])
        kept = eliminate_dependent(correlation_matrix(z))
        assert len(kept) == k
        assert np.linalg.matrix_rank(x[:, kept]) == k
        assert kept == sorted(kept)

    def test_eliminate_keeps_first(self) -> None:
        a = np.arange(10.0)
        b = np.sin(a)
        x = np.column_stack((a, 2 * a + 1, b, a - b))
        z = standardize(x, *normalize_fit(x)[:2])
        assert eliminate_dependent(correlation_matrix(z)) == [0, 2]

    def test_eliminate_near_collinear(self) -> None:
        # Cholesky pivot 1 - a^2 ~ 1.4e-8 passes, the kept block's eigenvalue 1 - a doesn't
        a = 1 - 0.7e-8
        r = np.array([[1.0, a], [a, 1.0]])
        assert eliminate_dependent(r, 1e-8) == [0]
        assert eliminate_dependent(r, 1e-9) == [0, 1]

    @pytest.mark.parametrize("seed", range(20))  # type: ignore
    def test_eliminate_kept_block(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        base = rng.normal(size=(60, 3))
        eps = 10.0 ** -float(rng.integers(3, 7))
        near = base @ rng.normal(size=(3, 2)) + eps * rng.normal(size=(60, 2))
        x = np.hstack((base, near))
        r = correlation_matrix(standardize(x, *normalize_fit(x)[:2]))
        for tol in (1e-8, 1e-6, 1e-4):
            kept = eliminate_dependent(r, tol)
            block = r[np.ix_(kept, kept)]
            assert min(np.linalg.eigvalsh(block)) > tol
            assert eliminate_dependent(block, tol) == list(range(len(kept)))

    @pytest.mark.parametrize("seed", range(10))  # type: ignore
    def test_projected_variance(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6))
        pipeline = fit_pipeline(x, 0.95)
        p = pipeline.output_dim
        y = project(pipeline, x)
        assert np.allclose(y.mean(axis=0), 0.0, atol=1e-10)
        cov = y.T @ y / x.shape[0]
        assert np.allclose(cov, np.diag(pipeline.eigenvalues[:p]), atol=1e-8)

    def test_pca_fit(self) -> None:
        rng = np.random.default_rng(4)
        x = rng.normal(size=(80, 5)) @ rng.normal(size=(5, 5))
        pipeline = fit_pipeline(x, 0.9)
        z = standardize(x, pipeline.means, pipeline.stds)
        basis, eigenvalues, p = pca_fit(z[:, pipeline.kept], 0.9)
        assert p == pipeline.output_dim
        assert np.allclose(eigenvalues, pipeline.eigenvalues)
        assert np.allclose(basis, pipeline.basis)

    def test_constant_columns(self) -> None:
        rng = np.random.default_rng(1)
        x = np.column_stack((rng.normal(size=30), np.full(30, 7.0), rng.normal(size=30)))
        pipeline = fit_pipeline(x, 1.0)
        assert pipeline.kept == [0, 2]
        assert pipeline.output_dim == 2
        back = reconstruct(pipeline, x)
        assert np.allclose(back, x)

    def test_select_components(self) -> None:
        lam = np.array([5.0, 3.0, 1.5, 0.5])
        assert select_components(lam, 0.5) == 1
        assert select_components(lam, 0.8) == 2
        assert select_components(lam, 0.95) == 3
        assert select_components(lam, 1.0) == 4
        assert select_components(np.zeros(3), 0.9) == 0
        with pytest.raises(ValueError):
            select_components(lam, 0.0)

    def test_project(self) -> None:
        x = np.random.default_rng(2).normal(size=(50, 4))
        pipeline = fit_pipeline(x, 0.9)
        y = project(pipeline, x)
        assert y.shape == (50, pipeline.output_dim)
        assert np.allclose(project(pipeline, x[3]), y[3])
        assert np.allclose(pipeline.basis @ pipeline.basis.T, np.eye(pipeline.output_dim))
        with pytest.raises(DimensionMismatch):
            project(pipeline, np.zeros(3))

    def test_serialize(self) -> None:
        x = np.random.default_rng(3).normal(size=(30, 3))
        pipeline = fit_pipeline(x, 0.9)
        again = ReductionPipeline.from_dict(pipeline.serialize())
        assert again.kept == pipeline.kept
        assert np.array_equal(project(again, x), project(pipeline, x))

    def test_all_constant(self) -> None:
        pipeline = fit_pipeline(np.ones((5, 3)))
        assert pipeline.kept == []
        assert pipeline.output_dim == 0
        assert project(pipeline, np.ones(3)).shape == (0,)

    def test_invalid_input(self) -> None:
        with pytest.raises(EmptyInput):
            normalize_fit(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            normalize_fit(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            ReductionConfig(retain=1.5).validate()
        with pytest.raises(ValueError):
            ReductionConfig(tolerance=0.0).validate()
