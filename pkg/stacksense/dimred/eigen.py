"""
Symmetric eigendecomposition by cyclic Jacobi rotations.
"""
import logging
from typing import Tuple

import numpy as np

from stacksense.exceptions import EigenError


logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-9
OFF_DIAGONAL_TOLERANCE = 1e-12


def _off_norm(a: np.ndarray) -> float:
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = a[q, p] = 0.0

    vec_p = v[:, p].copy()
    vec_q = v[:, q].copy()
    v[:, p] = c * vec_p - s * vec_q
    v[:, q] = s * vec_p + c * vec_q


def eig_sym(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues and eigenvectors of the symmetric matrix ``m``.

    Returns:
        ``(values, vectors)`` where ``values`` is sorted in descending order and
        ``vectors[:, i]`` is the unit eigenvector of ``values[i]``. Each eigenvector
        is signed so that its entry of largest magnitude is positive.

    Raises:
        EigenError: ``m`` is not square and symmetric within ``1e-9``, or the
            off-diagonal norm didn't fall below ``1e-12 * ||m||`` within
            ``100 * d^2`` rotations
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise EigenError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) >= SYMMETRY_TOLERANCE:
        raise EigenError("matrix is not symmetric")
    d = a.shape[0]
    a = (a + a.T) / 2.0
    v = np.eye(d)

    scale = float(np.linalg.norm(a))
    target = OFF_DIAGONAL_TOLERANCE * max(scale, 1.0)
    cap = 100 * d * d
    rotations = 0
    sweeps = 0
    while _off_norm(a) > target:
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                if a[p, q] == 0.0:
                    continue
                if rotations >= cap:
                    raise EigenError(f"no convergence after {rotations} rotations")
                _rotate(a, v, p, q)
                rotations += 1
    logger.debug("eig_sym: d=%d, %d sweeps, %d rotations", d, sweeps, rotations)

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    for i in range(d):
        if v[np.argmax(np.abs(v[:, i])), i] < 0:
            v[:, i] = -v[:, i]
    return values, v
