"""Dense complex matrix kernel.

Matrices are small (n up to 8) dense complex128 numpy arrays. All routines
accept either a single (n, n) matrix or a stack (..., n, n) and are pure:
inputs are never mutated.
"""

from __future__ import annotations

import numpy as np

from .errors import HermiticityError, SingularMatrixError

__all__ = [
    "as_matrix",
    "adjoint",
    "matmul",
    "det",
    "inverse",
    "matrix_exp",
    "eig_hermitian",
    "smallest_singular_value",
    "frobenius_norm",
]

_PIVOT_RTOL = 1e-13
_HERM_RTOL = 1e-10


def as_matrix(entries, dim: int | None = None) -> np.ndarray:
    """Validate and return a square complex matrix with finite entries."""
    a = np.asarray(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}.")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {a.shape[0]}.")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix entries must be finite.")
    return a


def adjoint(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose, batched over leading axes."""
    return np.conj(np.swapaxes(np.asarray(a), -1, -2))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.matmul(a, b)


def frobenius_norm(a: np.ndarray) -> np.ndarray | float:
    a = np.asarray(a)
    out = np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def _eliminate(a: np.ndarray, want_inverse: bool):
    """Partial-pivot Gauss-Jordan over a stack. Returns (inverse|None, det)."""
    a = np.asarray(a, dtype=np.complex128)
    single = a.ndim == 2
    stack = a.reshape((-1,) + a.shape[-2:]).copy()
    nb, n, _ = stack.shape
    norms = np.sqrt(np.sum(np.abs(stack) ** 2, axis=(1, 2)))
    thresholds = _PIVOT_RTOL * norms

    work = (
        np.concatenate([stack, np.broadcast_to(np.eye(n, dtype=np.complex128), stack.shape)], axis=2)
        if want_inverse
        else stack
    )
    dets = np.ones(nb, dtype=np.complex128)
    batch = np.arange(nb)
    for col in range(n):
        piv_rows = col + np.argmax(np.abs(work[:, col:, col]), axis=1)
        swapped = piv_rows != col
        if np.any(swapped):
            rows_a = work[batch, piv_rows].copy()
            work[batch, piv_rows] = work[:, col]
            work[:, col] = rows_a
            dets[swapped] = -dets[swapped]
        pivots = work[:, col, col].copy()
        bad = (np.abs(pivots) < thresholds) | (pivots == 0)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise SingularMatrixError(
                f"matrix is numerically singular: pivot magnitude {abs(pivots[idx]):.3e} "
                f"below {_PIVOT_RTOL:g} * norm ({thresholds[idx]:.3e}) at elimination step {col}."
            )
        dets *= pivots
        work[:, col, :] /= pivots[:, None]
        factors = work[:, :, col].copy()
        factors[:, col] = 0.0
        work -= factors[:, :, None] * work[:, col, None, :]

    inv = None
    if want_inverse:
        inv = work[:, :, n:]
        inv = inv[0] if single else inv.reshape(a.shape)
    dets = dets[0] if single else dets.reshape(a.shape[:-2])
    return inv, dets


def inverse(a: np.ndarray) -> np.ndarray:
    """Matrix inverse by partial-pivot elimination.

    Raises SingularMatrixError when any pivot magnitude drops below
    1e-13 times the Frobenius norm of the input.
    """
    inv, _ = _eliminate(a, want_inverse=True)
    return inv


def det(a: np.ndarray):
    """Determinant from the pivoted elimination (product of pivots, swap-signed)."""
    a = np.asarray(a, dtype=np.complex128)
    try:
        _, d = _eliminate(a, want_inverse=False)
    except SingularMatrixError:
        shape = a.shape[:-2]
        zero = np.zeros(shape, dtype=np.complex128)
        return complex(zero) if not shape else zero
    return complex(d) if np.ndim(d) == 0 else d


def matrix_exp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a Taylor sum.

    Accurate to about 1e-12 (absolute, entrywise) for norms up to 10.
    """
    a = np.asarray(a, dtype=np.complex128)
    single = a.ndim == 2
    stack = a.reshape((-1,) + a.shape[-2:])
    norm = float(np.max(np.sqrt(np.sum(np.abs(stack) ** 2, axis=(1, 2))), initial=0.0))
    squarings = max(0, int(np.ceil(np.log2(norm / 0.25)))) if norm > 0.25 else 0
    scaled = stack / (2.0**squarings)

    n = stack.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=np.complex128), stack.shape)
    result = eye.copy()
    term = eye.copy()
    for order in range(1, 30):
        term = term @ scaled / order
        result += term
        if float(np.max(np.abs(term))) < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result[0] if single else result.reshape(a.shape)


def eig_hermitian(a: np.ndarray):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending real, eigenvectors as orthonormal columns).
    The input must satisfy ||a - a*|| < 1e-10 * ||a||.
    """
    a = np.asarray(a, dtype=np.complex128)
    defect = frobenius_norm(a - adjoint(a))
    scale = max(float(np.max(np.atleast_1d(frobenius_norm(a)))), 1e-300)
    if float(np.max(np.atleast_1d(defect))) >= _HERM_RTOL * scale:
        raise HermiticityError(
            f"matrix is not Hermitian: ||a - a*|| = {float(np.max(np.atleast_1d(defect))):.3e} "
            f"exceeds {_HERM_RTOL:g} * ||a|| = {_HERM_RTOL * scale:.3e}."
        )
    values, vectors = np.linalg.eigh(a)
    return values, vectors


def smallest_singular_value(a: np.ndarray):
    """Smallest singular value, batched over leading axes."""
    s = np.linalg.svd(np.asarray(a, dtype=np.complex128), compute_uv=False)
    out = s[..., -1]
    return float(out) if out.ndim == 0 else out
