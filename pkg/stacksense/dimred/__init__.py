"""
Dimension reduction applied to encoded responses before they reach a net.

A :obj:`ReductionPipeline` standardizes every column, drops the constant columns and
the ones linearly dependent on others, and projects what is left onto the leading
eigenvectors of the correlation matrix (Karhunen-Loeve transform). Eigenvalues are
those of the correlation matrix ``R = X^T X / N``; the scatter matrix of the
standardized data is ``N R``.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from stacksense.dimred.eigen import eig_sym
from stacksense.exceptions import DimensionMismatch, EmptyInput


logger = logging.getLogger(__name__)

CONSTANT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ReductionConfig:
    """
    Attributes:
        retain: fraction of the total variance the kept components must explain
        tolerance: a column is dropped when its residual variance, once regressed on
            the columns already kept, is at most this
    """

    retain: float = 0.98
    tolerance: float = 1e-8

    def validate(self) -> None:
        if not 0.0 < self.retain <= 1.0:
            raise ValueError(f"retain must be in (0, 1], got {self.retain}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


@dataclass(eq=False)
class ReductionPipeline:
    """
    Attributes:
        means: mean of every original column
        stds: population standard deviation of every original column
        kept: original indices of the columns that survive, in order
        basis: ``p x len(kept)`` matrix with orthonormal rows
        eigenvalues: every eigenvalue of the kept columns' correlation matrix,
            descending
        retain: variance fraction the basis was chosen for
    """

    means: np.ndarray
    stds: np.ndarray
    kept: List[int]
    basis: np.ndarray
    eigenvalues: np.ndarray
    retain: float

    @property
    def input_dim(self) -> int:
        return int(self.means.size)

    @property
    def output_dim(self) -> int:
        return int(self.basis.shape[0])

    def serialize(self) -> Dict[str, Any]:
        return {
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "kept": list(self.kept),
            "basis": self.basis.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "retain": self.retain,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReductionPipeline":
        kept = [int(k) for k in data["kept"]]
        rows = data["basis"]
        basis = np.array(rows, dtype=float).reshape(len(rows), len(kept))
        return cls(
            means=np.array(data["means"], dtype=float),
            stds=np.array(data["stds"], dtype=float),
            kept=kept,
            basis=basis,
            eigenvalues=np.array(data["eigenvalues"], dtype=float),
            retain=float(data["retain"]),
        )


def normalize_fit(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Column means, population standard deviations and the mask of constant columns
    (std below ``1e-12``).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.size == 0:
        raise EmptyInput("can't normalize an empty data set")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 patterns to normalize")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    constant = stds < CONSTANT_TOLERANCE
    return means, stds, constant


def standardize(x: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    """
    ``(x - means) / stds``, constant columns are only centered.
    """
    safe = np.where(stds < CONSTANT_TOLERANCE, 1.0, stds)
    return (np.asarray(x, dtype=float) - means) / safe


def correlation_matrix(x: np.ndarray) -> np.ndarray:
    """
    ``R_ij = E[X_i X_j]`` over the rows of the standardized matrix ``x``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = x.T @ x / x.shape[0]
    return (r + r.T) / 2.0


def _eliminate(r: np.ndarray, tol: float) -> Tuple[List[int], np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=float)
    d = r.shape[0]
    kept: List[int] = []
    chol = np.zeros((d, d))
    for j in range(d):
        k = len(kept)
        if k:
            y = np.linalg.solve(chol[:k, :k], r[kept, j])
            residual = r[j, j] - float(y @ y)
        else:
            y = np.empty(0)
            residual = r[j, j]
        if residual > tol:
            chol[k, :k] = y
            chol[k, k] = np.sqrt(residual)
            kept.append(j)
        else:
            logger.debug("column %d is dependent (residual %g)", j, residual)

    # pivots above tol still allow a near singular block, e.g. two columns with
    # correlation 1 - tol / 2
    while kept:
        values, vectors = eig_sym(r[np.ix_(kept, kept)])
        if values[-1] > tol:
            return kept, values, vectors
        weight = np.abs(vectors[:, -1])
        drop = int(np.flatnonzero(weight > 1e-3 * weight.max())[-1])
        logger.debug("column %d is dependent (eigenvalue %g)", kept[drop], values[-1])
        del kept[drop]
    return kept, np.zeros(0), np.zeros((0, 0))


def eliminate_dependent(r: np.ndarray, tol: float = 1e-8) -> List[int]:
    """
    Greedy scan over the columns of ``r`` keeping those that are not a linear
    combination of the columns kept before them.

    The test is the Schur complement of the candidate against the kept block, i.e.,
    the variance left after regressing the column on the kept ones, computed with an
    incremental Cholesky factor of the kept block. Afterwards, while the smallest
    eigenvalue of the kept submatrix is at most ``tol``, the last column taking part
    in its eigenvector is dropped too. Every eigenvalue of the returned submatrix is
    above ``tol``.
    """
    return _eliminate(r, tol)[0]


def select_components(eigenvalues: np.ndarray, retain: float) -> int:
    """
    Smallest ``p`` such that the ``p`` largest eigenvalues add up to at least
    ``retain`` of the total.
    """
    if not 0.0 < retain <= 1.0:
        raise ValueError(f"retain must be in (0, 1], got {retain}")
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = float(lam.sum())
    if total == 0.0:
        return 0
    cumulative = np.cumsum(lam)
    goal = retain * total - 1e-10 * total
    return int(np.argmax(cumulative >= goal)) + 1


def pca_fit(x: np.ndarray, retain: float) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Karhunen-Loeve transform of standardized, rank reduced data.

    Returns:
        ``(basis, eigenvalues, p)``: the top ``p`` eigenvectors of the correlation
        matrix as rows of ``basis``, and all its eigenvalues in descending order
    """
    if not 0.0 < retain <= 1.0:
        raise ValueError(f"retain must be in (0, 1], got {retain}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] == 0:
        return np.zeros((0, 0)), np.zeros(0), 0
    values, vectors = eig_sym(correlation_matrix(x))
    p = select_components(values, retain)
    return vectors[:, :p].T.copy(), values, p


def fit_pipeline(
    x: np.ndarray, retain: float = 0.98, tol: float = 1e-8
) -> ReductionPipeline:
    """
    Fits the whole reduction on the training inputs ``x``: normalization, constant
    and dependent column removal, then PCA.
    """
    ReductionConfig(retain, tol).validate()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    means, stds, constant = normalize_fit(x)
    varying = np.flatnonzero(~constant)
    z = standardize(x[:, varying], means[varying], stds[varying])
    local: List[int] = []
    eigenvalues, vectors = np.zeros(0), np.zeros((0, 0))
    if varying.size:
        local, eigenvalues, vectors = _eliminate(correlation_matrix(z), tol)
    kept = [int(varying[i]) for i in local]
    # the kept block of R is the correlation matrix of the kept columns
    p = select_components(eigenvalues, retain)
    basis = vectors[:, :p].T.copy()
    logger.info(
        "reduction: %d columns, %d constant, %d kept, %d components",
        x.shape[1],
        int(constant.sum()),
        len(kept),
        p,
    )
    return ReductionPipeline(means, stds, kept, basis, eigenvalues, retain)


def _kept_standardized(pipeline: ReductionPipeline, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    got = x.shape[-1] if x.ndim else 1
    if got != pipeline.input_dim:
        raise DimensionMismatch("pipeline input", pipeline.input_dim, got)
    k = pipeline.kept
    return (x[..., k] - pipeline.means[k]) / pipeline.stds[k]


def project(pipeline: ReductionPipeline, x: np.ndarray) -> np.ndarray:
    """
    Reduces a raw encoded vector (or a matrix with one per row) to ``p`` dimensions.
    """
    return _kept_standardized(pipeline, x) @ pipeline.basis.T


def reconstruct(pipeline: ReductionPipeline, x: np.ndarray) -> np.ndarray:
    """
    Best approximation of ``x`` the pipeline can express, in raw units. Dropped
    columns come back as their means.
    """
    x = np.asarray(x, dtype=float)
    coords = project(pipeline, x) @ pipeline.basis
    out = np.broadcast_to(pipeline.means, x.shape).copy()
    k = pipeline.kept
    out[..., k] = pipeline.means[k] + coords * pipeline.stds[k]
    return out


def reconstruction_error(pipeline: ReductionPipeline, x: np.ndarray) -> float:
    """
    ``E_p = 1/2 sum_n ||z_n - U^T U z_n||^2`` over the standardized kept columns
    ``z_n`` of the rows of ``x``. On the fitting set this is ``N/2`` times the sum of
    the discarded eigenvalues.
    """
    z = np.atleast_2d(_kept_standardized(pipeline, x))
    residual = z - (z @ pipeline.basis.T) @ pipeline.basis
    return 0.5 * float(np.sum(residual * residual))


__all__ = (
    "ReductionConfig",
    "ReductionPipeline",
    "correlation_matrix",
    "eig_sym",
    "eliminate_dependent",
    "fit_pipeline",
    "normalize_fit",
    "pca_fit",
    "project",
    "reconstruct",
    "reconstruction_error",
    "select_components",
    "standardize",
)
