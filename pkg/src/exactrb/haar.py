"""Haar moment operators from permutation-operator Gram pseudoinverses.

Every Haar average here reduces to linear algebra over the span of
permutation operators acting on tensor copies: no Weingarten tables, no
irrep bookkeeping.  For the t-th moment on U(d) the operator

    M = E_Haar[ U^(x t) (x) conj(U)^(x t) ]

is the orthogonal projector onto span{vec(P_sigma) : sigma in S_t}, obtained
from the Gram matrix G[s, t] = d^(cycles(s^-1 t)) as
M = sum_{s,t} pinv(G)[s,t] |vec(P_t)><vec(P_s)|.  The same Gram trick with
partially transposed permutation operators gives the two-copy twirl of
transfer matrices used by the irrep-projector construction.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from . import numerics
from .paulis import vec_basis_matrix

MAX_T = 12


@dataclass(frozen=True)
class MomentOperator:
    """Dense t-th Haar moment operator on U(d).

    ``matrix`` acts on vec'd operators over (C^d)^(x t); it is a Hermitian
    idempotent whose rank equals the Haar frame potential.
    """

    d: int
    t: int
    matrix: np.ndarray


def perm_operator(sigma: tuple[int, ...], d: int) -> np.ndarray:
    """Permutation operator P_sigma on (C^d)^(x t).

    ``sigma`` maps slot a to slot sigma[a] (0-based), i.e. P_sigma sends
    e_{i_0} (x) ... (x) e_{i_{t-1}} to the product with factor a moved to
    slot sigma[a].  tr P_sigma = d^(number of cycles of sigma).
    """
    t = len(sigma)
    if sorted(sigma) != list(range(t)):
        raise ValueError(f"not a permutation of 0..{t - 1}: {sigma}")
    if d < 1:
        raise ValueError("d must be >= 1")
    eye = np.eye(d ** t, dtype=complex).reshape((d,) * (2 * t))
    inverse = [0] * t
    for a, b in enumerate(sigma):
        inverse[b] = a
    axes = inverse + list(range(t, 2 * t))
    return eye.transpose(axes).reshape(d ** t, d ** t)


@functools.lru_cache(maxsize=None)
def _permutations(t: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.permutations(range(t)))


@functools.lru_cache(maxsize=None)
def _gram(d: int, t: int) -> np.ndarray:
    """Gram matrix G[s,r] = tr(P_s^dag P_r) = d^cycles(s^-1 r) over S_t."""
    perms = np.array(_permutations(t))
    inv = np.empty_like(perms)
    rows = np.arange(len(perms))[:, None]
    inv[rows, perms] = np.arange(t)[None, :]
    # comp[i, j] = inv(perms[i]) o perms[j], for every ordered pair at once
    comp = inv[:, perms]
    # cycles of each pair: an index is a cycle leader when it equals the
    # minimum of its forward orbit; t applications close every cycle
    orbit = comp
    low = np.minimum(np.arange(t), orbit)
    pair_rows = np.arange(len(perms))[:, None, None]
    for _ in range(t - 1):
        orbit = comp[pair_rows, np.arange(len(perms))[None, :, None], orbit]
        low = np.minimum(low, orbit)
    cycles = (low == np.arange(t)).sum(axis=2)
    return float(d) ** cycles


@functools.lru_cache(maxsize=None)
def _gram_pinv(d: int, t: int) -> tuple[np.ndarray, int]:
    return numerics.pinv_psd(_gram(d, t))


def haar_moment_projector(d: int, t: int, cap: int = 2 ** 20) -> MomentOperator:
    """Exact t-th Haar moment operator on U(d) as a dense matrix.

    The matrix has side d^(2t); the cap bounds that side, and memory grows
    as its square, so large (d, t) cells are better served by
    :func:`haar_frame_potential` alone.
    """
    if t < 1 or t > MAX_T:
        raise ValueError(f"t must be in 1..{MAX_T}")
    dim = d ** (2 * t)
    if dim > cap:
        raise ValueError(f"vector dimension d^(2t) = {dim} exceeds cap {cap}")
    perms = _permutations(t)
    vecs = np.array([perm_operator(s, d).reshape(-1) for s in perms])
    gram_pinv, _ = _gram_pinv(d, t)
    # M = V^T pinv(G) conj(V); P_sigma is real so conj is a formality.
    m = vecs.T @ gram_pinv @ vecs.conj()
    return MomentOperator(d=d, t=t, matrix=m)


def haar_frame_potential(d: int, t: int) -> int:
    """Haar frame potential E|tr(U^dag V)|^(2t), exactly rank of the Gram.

    Equals t! for d >= t and, e.g., 14 for d = 2, t = 4.
    """
    if t < 1 or t > MAX_T:
        raise ValueError(f"t must be in 1..{MAX_T}")
    return _gram_pinv(d, t)[1]


def _partial_transpose_conj_slots(p: np.ndarray, d: int) -> np.ndarray:
    """Partial transpose of a 4-slot operator over slots 1 and 3 (0-based)."""
    a = p.reshape((d,) * 8)
    # axes: (o0 o1 o2 o3 | i0 i1 i2 i3) -> swap o1<->i1 and o3<->i3
    a = a.transpose(0, 5, 2, 7, 4, 1, 6, 3)
    return a.reshape(d ** 4, d ** 4)


@functools.lru_cache(maxsize=None)
def _twirl_machinery(d: int):
    perms = _permutations(4)
    qs = np.array([
        _partial_transpose_conj_slots(perm_operator(s, d), d) for s in perms
    ])
    gram = np.einsum("aij,bij->ab", qs.conj(), qs).real
    gram_pinv, _ = numerics.pinv_psd(gram)
    w = vec_basis_matrix(d)
    w2 = np.kron(w, w)
    return qs, gram_pinv, w2


def haar_twirl_ptm2(x: np.ndarray, d: int) -> np.ndarray:
    """Haar average E[L_U^(x 2) X L_U^(x 2)^dag] for transfer matrices.

    ``x`` acts on the two-copy operator-basis space, size (d^2)^2.  The
    average is the orthogonal projection of ``x`` onto the span of the 24
    partially transposed permutation operators commuting with
    U (x) conj(U) (x) U (x) conj(U), computed via the Gram pseudoinverse,
    then rotated back to the operator basis.
    """
    if d > 4:
        raise ValueError("haar_twirl_ptm2 supports d <= 4")
    x = np.asarray(x)
    dim = (d * d) ** 2
    if x.shape != (dim, dim):
        raise ValueError(f"expected shape {(dim, dim)}, got {x.shape}")
    qs, gram_pinv, w2 = _twirl_machinery(d)
    y = w2 @ x @ w2.conj().T
    coeffs = gram_pinv @ np.einsum("aij,ij->a", qs.conj(), y)
    twirled = np.einsum("a,aij->ij", coeffs, qs)
    out = w2.conj().T @ twirled @ w2
    if np.abs(out.imag).max() > 1e-9:
        raise ValueError("twirl output unexpectedly non-real in the operator basis")
    return out.real


def mixed_moment(stack: np.ndarray, r: int, s: int, chunk: int = 2048) -> np.ndarray:
    """Ensemble average of U^(x r) (x) conj(U)^(x s) over a stack of unitaries.

    Returns a d^(r+s) square matrix (a 1 x 1 matrix holding 1.0 when
    r = s = 0).  Accumulation order is fixed by ``chunk``.
    """
    stack = np.asarray(stack)
    n, d = stack.shape[0], stack.shape[1]
    if r == 0 and s == 0:
        return np.ones((1, 1), dtype=complex)
    out_dim = d ** (r + s)
    total = np.zeros((out_dim, out_dim), dtype=complex)
    for start in range(0, n, chunk):
        part = stack[start:start + chunk]
        kr = _kron_power(part, r)
        ks = _kron_power(part.conj(), s)
        total += np.einsum("nab,ncd->acbd", kr, ks).reshape(out_dim, out_dim)
    return total / n


def _kron_power(stack: np.ndarray, k: int) -> np.ndarray:
    """Batched k-fold Kronecker power of an (n, d, d) stack."""
    n, d = stack.shape[0], stack.shape[1]
    if k == 0:
        return np.ones((n, 1, 1), dtype=stack.dtype)
    out = stack
    dim = d
    for _ in range(k - 1):
        out = np.einsum("nab,ncd->nacbd", out, stack).reshape(n, dim * d, dim * d)
        dim *= d
    return out
