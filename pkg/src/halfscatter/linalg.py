"""Small dense linear-algebra helpers shared by the spectral routines."""

from __future__ import annotations

import numpy as np

# singular values below KERNEL_RTOL * sigma_max count as zero
KERNEL_RTOL = 1e-8


def kernel_basis(matrix: np.ndarray, rtol: float = KERNEL_RTOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel of ``matrix``.

    ``scale`` overrides the reference magnitude ``sigma_max``.
    """
    matrix = np.atleast_2d(matrix)
    ncols = matrix.shape[1]
    _, sv, vh = np.linalg.svd(matrix)
    ref = sv[0] if scale is None else scale
    if ref == 0.0:
        return np.eye(ncols, dtype=complex)
    full = np.zeros(ncols)
    full[: len(sv)] = sv
    mask = full < rtol * ref
    return vh.conj().T[:, mask]


def numerical_kernel_projection(matrix: np.ndarray, rtol: float = KERNEL_RTOL) -> np.ndarray:
    """Orthogonal projection onto the numerical kernel of ``matrix``.

    Examples
    --------
    >>> numerical_kernel_projection(np.diag([1.0, 1e-14])).real
    array([[0., 0.],
           [0., 1.]])
    """
    q = kernel_basis(matrix, rtol)
    proj = q @ q.conj().T
    return 0.5 * (proj + proj.conj().T)


def range_basis(projection: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the range of an orthogonal projection."""
    w, vecs = np.linalg.eigh(0.5 * (projection + projection.conj().T))
    return vecs[:, w > 0.5]


def restricted_inverse(matrix: np.ndarray, projection: np.ndarray | None = None) -> np.ndarray:
    """Inverse of ``matrix`` on ``Ran(projection)``, extended by zero.

    With ``projection=None`` this is the ordinary inverse.
    """
    if projection is None:
        return np.linalg.inv(matrix)
    q = range_basis(projection)
    if q.shape[1] == 0:
        return np.zeros_like(matrix, dtype=complex)
    return q @ np.linalg.solve(q.conj().T @ matrix @ q, q.conj().T)


def rank_of_projection(projection: np.ndarray) -> int:
    return int(round(float(np.real(np.trace(projection)))))
