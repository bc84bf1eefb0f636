"""Dense linear-algebra substrate shared by the rest of the package.

Matrices are plain numpy arrays: ``complex128`` for unitaries and Hermitian
operators, ``float64`` for transfer matrices and Gram matrices.  Everything
here is pure and deterministic; reductions that back averaged quantities go
through :func:`chunked_sum`, which fixes the accumulation order so results do
not depend on how the caller parallelizes.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-10


def _require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def _require_finite(a: np.ndarray, name: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the row-major index convention.

    With this convention ``kron(A, B) @ vec(X) == vec(A @ X @ B.T)`` where
    ``vec`` is row-major flattening (`numpy` ``reshape(-1)``).
    """
    return _require_finite(np.kron(np.asarray(a), np.asarray(b)), "kron")


def matexp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential e^A via scaling-and-squaring with Pade approximant."""
    a = _require_square(a)
    return _require_finite(scipy.linalg.expm(a), "matexp")


def eig_hermitian(a: np.ndarray, herm_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(vals, vecs)`` with eigenvalues ascending and orthonormal
    eigenvector columns.  Raises if ``a`` deviates from Hermiticity by more
    than ``herm_tol`` in Frobenius norm.
    """
    a = _require_square(a)
    dev = np.linalg.norm(a - a.conj().T)
    if dev > herm_tol:
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    vals, vecs = np.linalg.eigh(a)
    return _require_finite(vals, "eigenvalues"), _require_finite(vecs, "eigenvectors")


def pinv_psd(g: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix, with its rank.

    Rank counts singular values above ``rank_tol`` times the largest one.
    Returns ``(pinv, rank)``; an all-zero input gives ``(zeros, 0)``.
    """
    g = _require_square(g)
    if np.linalg.norm(g - g.conj().T) > 1e-8 * max(1.0, np.linalg.norm(g)):
        raise ValueError("pinv_psd expects a (conjugate-)symmetric matrix")
    vals, vecs = np.linalg.eigh(g)
    svals = np.abs(vals)
    smax = svals.max(initial=0.0)
    if smax == 0.0:
        return np.zeros_like(g), 0
    keep = svals > rank_tol * smax
    rank = int(np.count_nonzero(keep))
    inv_vals = np.zeros_like(vals)
    inv_vals[keep] = 1.0 / vals[keep]
    pinv = (vecs * inv_vals) @ vecs.conj().T
    return _require_finite(pinv, "pinv"), rank


def chunked_sum(stack: np.ndarray, axis: int = 0, chunk: int = 4096) -> np.ndarray:
    """Sum along ``axis`` in fixed-size chunks accumulated in index order.

    The chunk boundaries depend only on the array shape, so the floating
    point result is identical no matter how many threads the BLAS uses.
    """
    stack = np.asarray(stack)
    n = stack.shape[axis]
    if n == 0:
        return np.zeros(stack.shape[:axis] + stack.shape[axis + 1:], dtype=stack.dtype)
    moved = np.moveaxis(stack, axis, 0)
    total = np.zeros(moved.shape[1:], dtype=moved.dtype)
    for start in range(0, n, chunk):
        total += moved[start:start + chunk].sum(axis=0)
    return total


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a Haar-distributed unitary from QR of a complex Ginibre matrix.

    The R-diagonal phase correction makes the distribution exactly Haar
    rather than merely unitary-valued.
    """
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    return q


def haar_unitaries(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batched :func:`haar_unitary`: returns an ``(n, d, d)`` stack."""
    z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[:, None, :]
