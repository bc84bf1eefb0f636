"""Zonal spherical functions for the rank-one symmetric pair and the angles
they prescribe.

For the pair (U(d), U(1) x U(d-1)) the spherical functions of the labels
(k, 0, ..., 0, -k) are polynomials in the single invariant x = cos^2(theta)
of the double coset, realized here through the Jacobi three-term recurrence
with parameters (d - 2, 0) in the variable 2x - 1 and normalized to 1 at
x = 1.  Their zeros supply the rotation angles of the inductive design
construction; the largest zero in (0, 1) is the one used.

A Monte Carlo estimator (:func:`zonal_value_mc`) provides an independent
definition that never touches the Jacobi recurrence: matrix coefficients of
inequivalent irreps are orthogonal over the group, so the degree-k polynomial
orthogonal to all lower monomials under the Haar distribution of x, scaled to
1 at x = 1, is the zonal function.  The estimator builds that polynomial from
sampled Haar moments of x and evaluates it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics

ROOT_TOL = 1e-13


@dataclass(frozen=True)
class SphericalLabel:
    """Nonzero spherical label: the positive partition half of (mu, 0, -mu~)."""

    positive_part: tuple[int, ...]
    d1: int
    d: int

    def __post_init__(self):
        mu = self.positive_part
        if len(mu) == 0 or any(p < 1 for p in mu):
            raise ValueError("positive_part must be a nonempty positive partition")
        if any(mu[i] < mu[i + 1] for i in range(len(mu) - 1)):
            raise ValueError("positive_part must be non-increasing")
        if len(mu) > self.d1:
            raise ValueError("partition length exceeds d1")
        if self.d1 * 2 > self.d:
            raise ValueError("need d1 <= d/2")


@dataclass(frozen=True)
class ZonalPolynomial:
    """Rank-one zonal function as a polynomial in x = cos^2(theta).

    ``coefficients`` are monomial coefficients, ascending degree, scaled so
    the value at x = 1 is 1.
    """

    k: int
    d: int
    coefficients: np.ndarray = field(repr=False)

    def eval(self, x):
        """Evaluate at x via the recurrence (stable for all k used here)."""
        return _jacobi_shifted(self.k, self.d, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class AngleSolution:
    label: SphericalLabel
    thetas: np.ndarray


def enumerate_sph_labels(d1: int, d: int, t: int) -> list[SphericalLabel]:
    """All nonzero spherical labels with at most d1 parts summing to <= t.

    Deterministic lexicographic order.  For d1 = 1 these are (1), ..., (t).
    """
    if d1 < 1 or d1 * 2 > d:
        raise ValueError("need 1 <= d1 <= d/2")
    if t < 1:
        raise ValueError("t must be >= 1")
    out: list[tuple[int, ...]] = []

    def extend(prefix: tuple[int, ...], remaining: int, max_part: int):
        if prefix:
            out.append(prefix)
        if len(prefix) == d1:
            return
        for part in range(1, min(remaining, max_part) + 1):
            extend(prefix + (part,), remaining - part, part)

    extend((), t, t)
    out.sort()
    return [SphericalLabel(positive_part=mu, d1=d1, d=d) for mu in out]


def _jacobi_shifted(k: int, d: int, x):
    """P_k^(d-2, 0)(2x - 1) normalized to 1 at x = 1, by the recurrence."""
    alpha = d - 2
    u = 2.0 * np.asarray(x, dtype=float) - 1.0
    p_prev = np.ones_like(u)
    if k == 0:
        norm = 1.0
        return p_prev / norm
    p_cur = (alpha + 1.0) + (alpha + 2.0) * (u - 1.0) / 2.0
    for n in range(2, k + 1):
        a = 2.0 * n * (n + alpha) * (2.0 * n + alpha - 2.0)
        b = (2.0 * n + alpha - 1.0) * ((2.0 * n + alpha) * (2.0 * n + alpha - 2.0) * u + alpha ** 2)
        c = 2.0 * (n + alpha - 1.0) * (n - 1.0) * (2.0 * n + alpha)
        p_cur, p_prev = (b * p_cur - c * p_prev) / a, p_cur
    # value at u = 1 is binom(k + alpha, k)
    norm = 1.0
    for i in range(1, k + 1):
        norm *= (alpha + i) / i
    return p_cur / norm


def zonal_poly_rank1(k: int, d: int) -> ZonalPolynomial:
    """Zonal polynomial for label (k, 0, ..., 0, -k) on U(d), d1 = 1.

    Built by the Jacobi three-term recurrence; coefficients in the monomial
    basis of x, normalized to value 1 at x = 1.  All k zeros lie in (0, 1).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if d < 2:
        raise ValueError("d must be >= 2")
    # recurrence in coefficient space; u = 2x - 1
    u = np.polynomial.Polynomial([-1.0, 2.0])
    alpha = d - 2
    p_prev = np.polynomial.Polynomial([1.0])
    p_cur = (alpha + 1.0) + (alpha + 2.0) * (u - 1.0) / 2.0
    for n in range(2, k + 1):
        a = 2.0 * n * (n + alpha) * (2.0 * n + alpha - 2.0)
        b = (2.0 * n + alpha - 1.0) * ((2.0 * n + alpha) * (2.0 * n + alpha - 2.0) * u + alpha ** 2)
        c = 2.0 * (n + alpha - 1.0) * (n - 1.0) * (2.0 * n + alpha)
        p_cur, p_prev = (b * p_cur - c * p_prev) / a, p_cur
    norm = 1.0
    for i in range(1, k + 1):
        norm *= (alpha + i) / i
    coeffs = p_cur.coef / norm
    return ZonalPolynomial(k=k, d=d, coefficients=coeffs)


def _roots_in_unit_interval(k: int, d: int) -> np.ndarray:
    """All k zeros of the rank-one zonal polynomial, by bracketed bisection.

    Sign changes are located on a 10*k point grid (plus endpoints pushed
    slightly inside (0, 1)); each bracket is bisected until the normalized
    polynomial value drops below ROOT_TOL.
    """
    f = lambda x: _jacobi_shifted(k, d, x)
    n_grid = 10 * k
    grid = np.linspace(0.0, 1.0, n_grid + 2)
    grid[0] = 1e-12
    grid[-1] = 1.0 - 1e-12
    vals = f(grid)
    roots = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb > 0.0:
            continue
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = f(mid)
            if abs(fm) < ROOT_TOL or (b - a) < 1e-16:
                break
            if fa * fm <= 0.0:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        roots.append(0.5 * (a + b))
    roots = np.array(sorted(roots))
    if len(roots) != k:
        raise RuntimeError(f"expected {k} zeros in (0,1), found {len(roots)}")
    return roots


def find_angles(label: SphericalLabel) -> AngleSolution:
    """Rotation angle for a rank-one label: theta = arccos(sqrt(x*)) at the
    largest zero x* of the zonal polynomial.

    Only d1 = 1 labels are supported; multi-variable spherical functions are
    out of scope and their angle tables must be supplied externally.
    """
    if label.d1 != 1:
        raise ValueError("find_angles supports d1 = 1 only; supply external angle tables")
    k = label.positive_part[0]
    x_star = _roots_in_unit_interval(k, label.d)[-1]
    theta = float(np.arccos(np.sqrt(x_star)))
    return AngleSolution(label=label, thetas=np.array([theta]))


def zonal_value_mc(label: SphericalLabel, u: np.ndarray, samples: int = 200_000,
                   seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of the zonal function at a unitary, with stderr.

    Estimates the Haar moments of the double-coset invariant
    x(V) = |V[0,0]|^2, builds the degree-k polynomial orthogonal to all lower
    monomials under the sampled measure (the zonal function, by orthogonality
    of inequivalent matrix coefficients), normalizes it at x = 1 and
    evaluates at x(u).  Estimate and stderr come from 20 sample batches.
    """
    if label.d1 != 1:
        raise ValueError("zonal_value_mc supports d1 = 1 only")
    k = label.positive_part[0]
    d = label.d
    u = np.asarray(u)
    if u.shape != (d, d):
        raise ValueError(f"unitary must be {d} x {d}")
    if np.linalg.norm(u.conj().T @ u - np.eye(d)) > 1e-10:
        raise ValueError("input is not unitary")
    x_u = float(np.abs(u[0, 0]) ** 2)
    n_batches = 20
    per = max(samples // n_batches, 4 * (k + 1))
    rng = np.random.default_rng(seed)
    estimates = np.empty(n_batches)
    for b in range(n_batches):
        vs = numerics.haar_unitaries(d, per, rng)
        xs = np.abs(vs[:, 0, 0]) ** 2
        powers = xs[None, :] ** np.arange(2 * k + 1)[:, None]
        moments = powers.mean(axis=1)
        hankel = np.empty((k, k))
        for i in range(k):
            hankel[i] = moments[i:i + k]
        rhs = -moments[k:2 * k]
        lower = np.linalg.solve(hankel, rhs)
        coeffs = np.concatenate([lower, [1.0]])
        estimates[b] = np.polynomial.polynomial.polyval(x_u, coeffs) / coeffs.sum()
    value = float(estimates.mean())
    stderr = float(estimates.std(ddof=1) / np.sqrt(n_batches))
    return value, stderr


def gate_count_estimate(n_qubits: int, t: int) -> float:
    """Leading-order count of design layers for the qubit tower construction.

    Grows as exp(pi sqrt(2 t / 3) (N - 1)) with N the qubit count, the
    Hardy-Ramanujan growth of the partition numbers that label the layers.
    """
    if n_qubits < 1 or t < 1:
        raise ValueError("need n_qubits >= 1 and t >= 1")
    return float(np.exp(np.pi * np.sqrt(2.0 * t / 3.0) * (n_qubits - 1)))


def partition_count(n: int) -> int:
    """Number of integer partitions of n, by Euler's pentagonal recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    p = [1] + [0] * n
    for m in range(1, n + 1):
        total = 0
        j = 1
        while True:
            g1 = j * (3 * j - 1) // 2
            g2 = j * (3 * j + 1) // 2
            if g1 > m and g2 > m:
                break
            sign = -1 if j % 2 == 0 else 1
            if g1 <= m:
                total += sign * p[m - g1]
            if g2 <= m:
                total += sign * p[m - g2]
            j += 1
        p[m] = total
    return p[n]
