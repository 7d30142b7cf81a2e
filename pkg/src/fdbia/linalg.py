"""Complex-matrix primitives the transmission schemes are assembled from.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Column indices in
:func:`submatrix_columns` are 1-based and inclusive, matching the way the
schemes describe precoder blocks ("columns 1 through n_d of the IDFT matrix").
"""

from __future__ import annotations

from collections.abc import Sequence
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import InvalidDimensionError, InvalidRangeError, SingularMatrixError

__all__ = [
    "as_complex_matrix",
    "idft_matrix",
    "submatrix_columns",
    "numerical_rank",
    "right_pseudoinverse",
    "right_pseudoinverse_stack",
    "kron",
    "block_diag",
]


def as_complex_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex128 array.

    Raises:
        InvalidDimensionError: if ``m`` is not 2-D or holds NaN/Inf.
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise InvalidDimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidDimensionError("matrix has non-finite entries")
    return arr


def idft_matrix(n: int) -> np.ndarray:
    """Unitary n-point IDFT matrix, entry (a, b) = exp(2j*pi*a*b/n)/sqrt(n) (0-based a, b).

    The exponent is reduced modulo ``n`` before evaluation so large products
    do not lose phase accuracy.
    """
    if n < 1:
        raise InvalidDimensionError(f"IDFT size must be >= 1, got {n}")
    return _idft(int(n)).copy()


@lru_cache(maxsize=64)
def _idft(n: int) -> np.ndarray:
    idx = np.arange(n)
    phase = np.outer(idx, idx) % n
    return np.exp(2j * np.pi * phase / n) / np.sqrt(n)


def submatrix_columns(m, first: int, last: int) -> np.ndarray:
    """Columns ``first..last`` (1-based, inclusive) of ``m``, order preserved."""
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise InvalidDimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not 1 <= first <= last <= arr.shape[1]:
        raise InvalidRangeError(
            f"column range [{first}, {last}] outside [1, {arr.shape[1]}]"
        )
    return arr[:, first - 1 : last].copy()


def numerical_rank(m, tol: float | None = None) -> int:
    """Number of singular values strictly above ``tol``.

    The default threshold is ``max(rows, cols) * sigma_max * eps``, which is
    scale invariant. An empty or all-zero matrix has rank 0.
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2:
        raise InvalidDimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.size == 0:
        return 0
    sv = np.linalg.svd(arr, compute_uv=False)
    if tol is None:
        tol = max(arr.shape) * sv[0] * np.finfo(np.float64).eps
    elif tol < 0:
        raise InvalidRangeError(f"rank tolerance must be nonnegative, got {tol}")
    return int(np.count_nonzero(sv > tol))


def right_pseudoinverse_stack(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right inverses of a stack ``(..., rows, cols)`` plus a full-row-rank mask.

    Computed from the thin SVD ``m = U S V^H`` as ``V S^{-1} U^H``; the same
    singular values give the rank test, so the Gram matrix ``m m^H`` is
    never formed. Entries flagged False in the mask are not meaningful.
    """
    arr = np.asarray(m, dtype=np.complex128)
    rows, cols = arr.shape[-2:]
    if rows > cols:
        raise InvalidDimensionError(f"right inverse needs rows <= cols, got {rows}x{cols}")
    if rows == 0:
        return np.zeros(arr.shape[:-2] + (cols, 0), dtype=np.complex128), np.ones(arr.shape[:-2], bool)
    u, sv, vh = np.linalg.svd(arr, full_matrices=False)
    tol = cols * sv[..., :1] * np.finfo(np.float64).eps
    ok = np.count_nonzero(sv > tol, axis=-1) == rows
    safe = np.where(sv > tol, sv, 1.0)
    inv = (vh.conj().swapaxes(-1, -2) / safe[..., None, :]) @ u.conj().swapaxes(-1, -2)
    return inv, ok


def right_pseudoinverse(m) -> np.ndarray:
    """Right inverse ``m^H (m m^H)^{-1}`` of a full-row-rank matrix.

    Raises:
        InvalidDimensionError: if ``m`` has more rows than columns.
        SingularMatrixError: if ``m`` is row-rank deficient.
    """
    arr = as_complex_matrix(m)
    inv, ok = right_pseudoinverse_stack(arr)
    if not ok:
        raise SingularMatrixError(f"{arr.shape[0]}x{arr.shape[1]} matrix is not full row rank")
    return inv


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def block_diag(blocks: Sequence) -> np.ndarray:
    """Block-diagonal assembly; an empty sequence gives a 0x0 matrix."""
    if len(blocks) == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=np.complex128) for b in blocks])
