"""Randomized-benchmarking engine built on exact unitary designs.

The protocol: sample m unitaries from the design, apply them as noisy
channels G_i = E.U_i, append the exact inverse of the product as one more
noisy step, and measure.  Averaging the t-th power of the expectation
value over sequences produces a sum of exponential decays whose rates are
the irreducible-sector decay rates of the noise; fitting them recovers the
fidelity, unitarity and self-adjointness metrics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import channels, designs, irreps, paulis

HERM_TOL = 1e-10
TRACE_TOL = 1e-10

# fitter knobs: ten Nelder-Mead starts share a 1e4-evaluation budget, the
# coordinate refinement runs to xatol 1e-14, and rate gaps below 1e-4 are
# reported as ill-conditioned rather than trusted
FIT_BUDGET = 10 ** 4
N_STARTS = 10
GAP_TOL = 1e-4
_START_GRID = (0.05, 0.2, 0.4, 0.6, 0.75, 0.86, 0.93, 0.97, 0.99, 0.999)


@dataclass(frozen=True)
class SPAMModel:
    """State-preparation and readout bit-flip errors (single qubit).

    eta_prep mixes each prepared eigenstate with its bit-flipped partner.
    eta_meas holds the conditional readout flip probabilities; a scalar
    means a symmetric flip, a pair is (P(read 1 | true 0), P(read 0 |
    true 1)).  Readout bit k is the k-th measurement eigenvector, ordered
    by decreasing overlap with |0>.
    """

    eta_prep: float = 0.0
    eta_meas: float | tuple[float, float] = 0.0

    def __post_init__(self):
        probs = [self.eta_prep, *self.meas_pair()]
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError("SPAM probabilities must lie in [0, 1]")

    def meas_pair(self) -> tuple[float, float]:
        if isinstance(self.eta_meas, (int, float)):
            return (float(self.eta_meas), float(self.eta_meas))
        a, b = self.eta_meas
        return (float(a), float(b))

    def prep_matrix(self) -> np.ndarray:
        """Transfer matrix of the preparation bit-flip channel."""
        e = self.eta_prep
        return np.diag([1.0, 1.0, 1.0 - 2 * e, 1.0 - 2 * e])

    def readout_matrix(self) -> np.ndarray:
        """Column-stochastic confusion matrix acting on outcome bits."""
        a, b = self.meas_pair()
        return np.array([[1.0 - a, b], [a, 1.0 - b]])


@dataclass(frozen=True)
class RBConfig:
    design: designs.UnitaryEnsemble
    noise: channels.PTM
    t_order: int
    sequence_lengths: tuple
    n_sequences: int
    n_shots: int
    seed: int
    o_ini: np.ndarray
    o_meas: np.ndarray
    spam: SPAMModel | None = None
    verify_design: bool = False

    def __post_init__(self):
        if self.t_order not in (1, 2):
            raise ValueError("t_order must be 1 or 2")
        ms = tuple(int(m) for m in self.sequence_lengths)
        object.__setattr__(self, "sequence_lengths", ms)
        if any(m < 1 for m in ms) or list(ms) != sorted(set(ms)):
            raise ValueError("sequence lengths must be >= 1 and strictly increasing")
        if self.n_sequences < 2:
            raise ValueError("need at least two sequences for a jackknife")
        if self.n_shots < 0:
            raise ValueError("n_shots must be >= 0 (0 = exact expectation)")
        d = self.design.d
        if d & (d - 1) != 0:
            raise ValueError("RB runs on qubit systems (d must be a power of 2)")
        if self.noise.d != d:
            raise ValueError("noise dimension does not match the design")
        for name, op in (("o_ini", self.o_ini), ("o_meas", self.o_meas)):
            op = np.asarray(op, dtype=complex)
            if op.shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
            if np.abs(op - op.conj().T).max() > HERM_TOL:
                raise ValueError(f"{name} must be Hermitian")
            object.__setattr__(self, name, op)
        if self.t_order == 2 and abs(np.trace(self.o_ini)) > TRACE_TOL:
            raise ValueError("o_ini must be traceless for second-order RB")
        if self.spam is not None and d != 2:
            raise ValueError("the SPAM model is single-qubit only")
        if self.verify_design:
            report = designs.verify_strong_design(
                self.design, 2 * self.t_order, strong=False)
            if not report.passed:
                raise ValueError(
                    "design failed certification at t = %d" % (2 * self.t_order))


@dataclass(frozen=True)
class DecayCurve:
    """Decay data points (m, V, stderr, n_sequences, n_shots)."""

    points: tuple

    def __post_init__(self):
        pts = tuple((int(m), float(v), float(se), int(ns), int(sh))
                    for m, v, se, ns, sh in self.points)
        object.__setattr__(self, "points", pts)
        ms = [p[0] for p in pts]
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError("sequence lengths must be strictly increasing")
        if any(p[2] < 0 for p in pts):
            raise ValueError("stderr must be nonnegative")

    @property
    def ms(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "V", "stderr", "n_sequences", "n_shots"])
            for m, v, se, ns, sh in self.points:
                w.writerow([m, "%.17g" % v, "%.17g" % se, ns, sh])

    @classmethod
    def from_csv(cls, path: str) -> "DecayCurve":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh)
                    if r and not r[0].lstrip().startswith("#")]
        if not rows or rows[0] != ["m", "V", "stderr", "n_sequences", "n_shots"]:
            raise ValueError("not a decay-curve file: %s" % path)
        pts = [(int(r[0]), float(r[1]), float(r[2]), int(r[3]), int(r[4]))
               for r in rows[1:]]
        return cls(points=tuple(pts))

    def to_json_dict(self) -> dict:
        return {"points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class FitResult:
    """Exponential-sum fit.  amplitudes[k] pairs with rates[k]; the
    covariance is ordered (all amplitudes, then the free rates)."""

    amplitudes: tuple
    rates: tuple
    residual_norm: float
    covariance: np.ndarray
    flags: tuple = ()
    n_evaluations: int = 0

    def rate_stderr(self, k: int, n_known: int) -> float:
        """Stderr of rates[k] given that the first n_known were pinned."""
        if k < n_known:
            return 0.0
        idx = len(self.amplitudes) + (k - n_known)
        return math.sqrt(max(self.covariance[idx, idx], 0.0))


@dataclass(frozen=True)
class EstimatedMetrics:
    f: float
    F: float
    u: float
    h: float
    H: float
    stderr: dict
    rates: dict
    rate_stderr: dict
    flags: tuple
    alpha_norm_sq: float


def _batch_ptms(us: np.ndarray, q: int) -> np.ndarray:
    """Pauli transfer matrices of a stack of unitaries, in one pass."""
    basis = paulis.pauli_basis(q)
    t1 = np.einsum("uab,nbc,udc->unad", us, basis, us.conj())
    return np.einsum("mda,unad->umn", basis, t1).real


class _Runtime:
    """Per-config precomputation shared across sequences."""

    def __init__(self, config: RBConfig):
        d = config.design.d
        self.q = d.bit_length() - 1
        self.d = d
        self.noise_mat = config.noise.matrix

        # initial operator as a weighted sum of eigenstate preparations
        w, vecs = np.linalg.eigh(config.o_ini)
        keep = np.abs(w) > 1e-12
        self.prep_weights = w[keep]
        preps = []
        for j in np.nonzero(keep)[0]:
            rho = np.outer(vecs[:, j], vecs[:, j].conj())
            preps.append(paulis.to_basis_vec(rho).real)
        self.prep_vecs = np.array(preps).T  # (d^2, n_prep)
        if config.spam is not None:
            self.prep_vecs = config.spam.prep_matrix() @ self.prep_vecs

        # measurement eigenbasis; bit k = k-th eigenvector by decreasing
        # overlap with |0...0>
        ev, evec = np.linalg.eigh(config.o_meas)
        order = np.argsort(-np.abs(evec[0, :]) ** 2, kind="stable")
        self.outcome_values = ev[order]
        proj_rows = []
        for k in order:
            pk = np.outer(evec[:, k], evec[:, k].conj())
            proj_rows.append(paulis.to_basis_vec(pk).real)
        self.outcome_projs = np.array(proj_rows)  # (d, d^2)
        self.readout = None
        if config.spam is not None:
            self.readout = config.spam.readout_matrix()


def run_sequence(config: RBConfig, m: int, rng: np.random.Generator,
                 _rt: _Runtime | None = None) -> float:
    """One random sequence of length m plus its noisy inverse.

    Returns the measured expectation value of o_meas: the exact one when
    n_shots = 0, otherwise the mean of n_shots sampled eigenvalues.  For
    a multi-eigenstate o_ini the same sequence is run once per eigenstate
    and the expectation values are combined with the eigenvalue weights
    (the difference-before-squaring form when o_ini is a state pair).
    """
    if m < 1:
        raise ValueError("sequence length must be >= 1")
    rt = _rt if _rt is not None else _Runtime(config)
    us = config.design.sample(rng, m)
    ls = _batch_ptms(us, rt.q)
    prod = us[0]
    for i in range(1, m):
        prod = us[i] @ prod
    inv = prod.conj().T
    linv = _batch_ptms(inv[None, :, :], rt.q)[0]

    state = rt.prep_vecs.copy()
    for i in range(m):
        state = rt.noise_mat @ (ls[i] @ state)
    state = rt.noise_mat @ (linv @ state)

    probs = rt.outcome_projs @ state  # (d outcomes, n_prep)
    if rt.readout is not None:
        probs = rt.readout @ probs
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=0, keepdims=True)

    if config.n_shots == 0:
        means = rt.outcome_values @ probs
    else:
        means = np.empty(probs.shape[1])
        for j in range(probs.shape[1]):
            counts = rng.multinomial(config.n_shots, probs[:, j])
            means[j] = (rt.outcome_values @ counts) / config.n_shots
    return float(rt.prep_weights @ means)


def _jackknife_stderr(x: np.ndarray) -> float:
    n = x.size
    loo = (x.sum() - x) / (n - 1)
    return math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())


def v_t_monte_carlo(config: RBConfig) -> DecayCurve:
    """Estimate V^(t)(m) = E[<O>^t] over random sequences.

    Each (m, sequence index) pair gets its own counter-based stream, so
    results are bit-identical for a given seed regardless of evaluation
    order or thread count.
    """
    rt = _Runtime(config)
    pts = []
    for m in config.sequence_lengths:
        vals = np.empty(config.n_sequences)
        for i in range(config.n_sequences):
            ss = np.random.SeedSequence((config.seed, m, i))
            rng = np.random.Generator(np.random.Philox(ss))
            vals[i] = run_sequence(config, m, rng, rt)
        powered = vals ** config.t_order
        pts.append((m, powered.mean(), _jackknife_stderr(powered),
                    config.n_sequences, config.n_shots))
    return DecayCurve(points=tuple(pts))


def v2_exact(noise: channels.PTM, o_ini: np.ndarray, o_meas: np.ndarray,
             m_list, projector_set: irreps.IrrepProjectorSet,
             noisy_inverse: bool = True) -> DecayCurve:
    """Exact V^(2)(m) = sum_lambda A_lambda C_lambda^m.

    With noisy_inverse the coefficients carry the noise of the final
    inverse step applied to o_meas (the exact protocol).  Setting it
    False uses the bare o_meas instead, the high-fidelity approximation
    under which the tabulated rational coefficients are exact and curves
    collapse to their ideal term count.
    """
    if noisy_inverse:
        a = irreps.coefficients(o_ini, o_meas, noise, projector_set)
    else:
        ident = channels.identity_ptm(projector_set.q)
        a = irreps.coefficients(o_ini, o_meas, ident, projector_set)
    c = irreps.decay_rates(noise, projector_set)
    pts = []
    for m in m_list:
        v = sum(a[lab] * c[lab] ** m for lab in projector_set.labels)
        pts.append((int(m), v, 0.0, 0, 0))
    return DecayCurve(points=tuple(pts))


def v1_exact(noise: channels.PTM, o_ini: np.ndarray, o_meas: np.ndarray,
             m_list) -> DecayCurve:
    """Exact first-order decay A0 + A1 f^m.

    The boundary vector carries the noise applied to the measurement
    operator in the Heisenberg picture, <<O|L_E = <<E^dag(O)|.
    """
    ov = paulis.to_basis_vec(np.asarray(o_meas, dtype=complex))
    iv = paulis.to_basis_vec(np.asarray(o_ini, dtype=complex))
    if max(np.abs(ov.imag).max(), np.abs(iv.imag).max()) > 1e-12:
        raise ValueError("operators must be Hermitian")
    w = noise.matrix.T @ ov.real
    a0 = w[0] * iv.real[0]
    a1 = float(w[1:] @ iv.real[1:])
    f = channels.metrics(noise).f
    pts = [(int(m), a0 + a1 * f ** m, 0.0, 0, 0) for m in m_list]
    return DecayCurve(points=tuple(pts))


def v1_approx_design(noise: channels.PTM, o_ini: np.ndarray, o_meas: np.ndarray,
                     m_list, perturbation: np.ndarray, epsilon: float) -> DecayCurve:
    """First-order decay under a perturbed average channel.

    Evaluates <<E^dag(O)| (L_av + eps*P)^m |rho>> by exact matrix powers,
    where L_av is the exactly twirled noise (identity component plus f on
    the traceless block).  At eps = 0 this reproduces v1_exact; at finite
    eps the curve is no longer a single exponential.
    """
    d2 = noise.matrix.shape[0]
    p = np.asarray(perturbation, dtype=float)
    if p.shape != (d2, d2):
        raise ValueError("perturbation must be a %dx%d transfer matrix" % (d2, d2))
    ov = paulis.to_basis_vec(np.asarray(o_meas, dtype=complex))
    iv = paulis.to_basis_vec(np.asarray(o_ini, dtype=complex))
    if max(np.abs(ov.imag).max(), np.abs(iv.imag).max()) > 1e-12:
        raise ValueError("operators must be Hermitian")
    w = noise.matrix.T @ ov.real
    f = channels.metrics(noise).f
    l_av = np.eye(d2) * f
    l_av[0, 0] = 1.0
    gen = l_av + epsilon * p
    pts = []
    for m in m_list:
        v = float(w @ np.linalg.matrix_power(gen, int(m)) @ iv.real)
        pts.append((int(m), v, 0.0, 0, 0))
    return DecayCurve(points=tuple(pts))


def _weighted_amplitudes(ms, y, w, rates):
    x = rates[None, :] ** ms[:, None]
    xw = x * w[:, None]
    amps, *_ = np.linalg.lstsq(xw, y * w, rcond=None)
    resid = xw @ amps - y * w
    return amps, float(resid @ resid)


def _gauss_newton_polish(ms, y, w, known, free, amps):
    """Levenberg-damped joint refinement of amplitudes and free rates.

    Polishes the coordinate-descent optimum, which can stall in the
    narrow diagonal valley left by nearly equal rates.
    """
    n_terms = len(known) + free.size
    theta = np.concatenate([amps, free])

    def split(th):
        rates = np.concatenate([known, np.clip(th[n_terms:], 0.0, 1.0)])
        return th[:n_terms], rates

    def resid(th):
        a, rates = split(th)
        return (rates[None, :] ** ms[:, None] @ a - y) * w

    def jac(th):
        a, rates = split(th)
        j = np.empty((ms.size, theta.size))
        j[:, :n_terms] = rates[None, :] ** ms[:, None]
        for k in range(free.size):
            r = rates[len(known) + k]
            j[:, n_terms + k] = a[len(known) + k] * ms * r ** (ms - 1)
        return j * w[:, None]

    lam = 1e-10
    cost = float(resid(theta) @ resid(theta))
    for _ in range(100):
        r = resid(theta)
        j = jac(theta)
        g = j.T @ r
        h = j.T @ j
        try:
            step = np.linalg.solve(h + lam * np.diag(np.diag(h) + 1e-300), -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, -g, rcond=None)[0]
        trial = theta + step
        trial[n_terms:] = np.clip(trial[n_terms:], 0.0, 1.0)
        c_trial = float(resid(trial) @ resid(trial))
        if c_trial <= cost:
            moved = np.abs(trial - theta).max()
            theta, cost = trial, c_trial
            lam = max(lam * 0.3, 1e-14)
            if moved < 1e-15:
                break
        else:
            lam *= 10.0
            if lam > 1e8:
                break
    return theta[:n_terms], np.clip(theta[n_terms:], 0.0, 1.0)


def fit_exponentials(curve: DecayCurve, n_terms: int,
                     known_rates=None) -> FitResult:
    """Fit V(m) = sum_k A_k r_k^m with r_k in [0, 1].

    Variable projection: the amplitudes are solved linearly at every
    candidate rate vector, the free rates are optimized by bounded
    Nelder-Mead from ten graded starts, and a subtract-and-refit pass
    (coordinate-wise bounded scalar refinement against the residual of
    the other terms) polishes the optimum.  Pinned rates come first in
    the returned tuple; free rates follow, sorted in decreasing order.
    """
    known = [float(r) for r in (known_rates or [])]
    if any(not 0.0 <= r <= 1.0 for r in known):
        raise ValueError("rates must lie in [0, 1]")
    n_free = n_terms - len(known)
    if n_free < 0:
        raise ValueError("more pinned rates than terms")
    ms = curve.ms
    y = curve.values
    if ms.size < 2 * n_terms + 1:
        raise ValueError("need at least 2*n_terms + 1 points")
    se = curve.stderrs
    w = 1.0 / se if np.all(se > 0) else np.ones_like(y)
    weighted = bool(np.all(se > 0))

    flags = []
    nfev = 0

    def chi2(free):
        rates = np.concatenate([known, np.clip(free, 0.0, 1.0)])
        return _weighted_amplitudes(ms, y, w, rates)[1]

    free = np.empty(0)
    if n_free > 0:
        if n_free == 1:
            starts = [np.array([g]) for g in _START_GRID]
        else:
            perm_rng = np.random.default_rng(7)
            cols = [perm_rng.permutation(N_STARTS) for _ in range(n_free)]
            starts = [np.array([_START_GRID[cols[k][i]] for k in range(n_free)])
                      for i in range(N_STARTS)]
        best = None
        per_start = FIT_BUDGET // N_STARTS
        converged = False
        for x0 in starts:
            res = minimize(chi2, x0, method="Nelder-Mead",
                           bounds=[(0.0, 1.0)] * n_free,
                           options={"maxfev": per_start, "xatol": 1e-12,
                                    "fatol": 1e-16})
            nfev += res.nfev
            converged = converged or bool(res.success)
            if best is None or res.fun < best[1]:
                best = (np.clip(res.x, 0.0, 1.0), res.fun)
        free = best[0].copy()
        if not converged and nfev >= FIT_BUDGET:
            flags.append("non_converged")

        # subtract-and-refit: each rate is re-fitted alone against the
        # residual of the other terms, repeated until stationary
        for _ in range(60):
            moved = 0.0
            for k in range(n_free):
                def along(xk, k=k):
                    trial = free.copy()
                    trial[k] = xk
                    return chi2(trial)
                res = minimize_scalar(along, bounds=(0.0, 1.0), method="bounded",
                                      options={"xatol": 1e-14})
                nfev += res.nfev
                if res.fun <= chi2(free):
                    moved = max(moved, abs(res.x - free[k]))
                    free[k] = res.x
            if moved < 1e-13:
                break

        amps0, _ = _weighted_amplitudes(ms, y, w, np.concatenate([known, free]))
        amps0, free = _gauss_newton_polish(ms, y, w, known, free, amps0)
        order = np.argsort(free)[::-1]
        free = free[order]

    rates = np.concatenate([known, free])
    amps, rss = _weighted_amplitudes(ms, y, w, rates)

    gaps = [abs(a - b) for i, a in enumerate(rates) for b in rates[i + 1:]]
    if gaps and min(gaps) < GAP_TOL:
        flags.append("ill_conditioned")

    # Gauss-Newton covariance in (amplitudes, free rates) order
    n_par = n_terms + n_free
    jac = np.empty((ms.size, n_par))
    jac[:, :n_terms] = rates[None, :] ** ms[:, None]
    for j in range(n_free):
        k = len(known) + j
        r = rates[k]
        dr = amps[k] * ms * r ** (ms - 1) if r > 0 else np.zeros_like(ms)
        jac[:, n_terms + j] = dr
    jw = jac * w[:, None]
    hess = jw.T @ jw
    scale = 1.0 if weighted else (rss / (ms.size - n_par) if ms.size > n_par else 0.0)
    cov = np.linalg.pinv(hess) * scale

    return FitResult(amplitudes=tuple(float(a) for a in amps),
                     rates=tuple(float(r) for r in rates),
                     residual_norm=math.sqrt(rss),
                     covariance=cov,
                     flags=tuple(flags),
                     n_evaluations=nfev)


def estimate_metrics_1q(v1_curve: DecayCurve, v2_curve: DecayCurve,
                        alpha_norm_sq: float | None = None) -> EstimatedMetrics:
    """Single-qubit metric pipeline.

    f comes from the first-order curve (constant plus one exponential),
    (u, c2) from the free double-exponential fit of the second-order
    curve with the larger rate assigned to u, then
    h = (10/3)(c2 - (9/10) f^2 + (1/5) u) and H from the fidelity
    decomposition.  When alpha_norm_sq is not given the noise is assumed
    unital for H and a flag records that.
    """
    flags = []
    fit1 = fit_exponentials(v1_curve, 2, known_rates=[1.0])
    f = fit1.rates[1]
    f_se = fit1.rate_stderr(1, 1)
    fit2 = fit_exponentials(v2_curve, 2)
    u, c2 = fit2.rates[0], fit2.rates[1]
    u_se = fit2.rate_stderr(0, 0)
    c2_se = fit2.rate_stderr(1, 0)
    flags.extend(fit1.flags)
    flags.extend(fit2.flags)

    alpha2 = 0.0
    if alpha_norm_sq is None:
        flags.append("alpha_assumed_zero")
    else:
        alpha2 = float(alpha_norm_sq)

    h = (10.0 / 3.0) * (c2 - 0.9 * f ** 2 + 0.2 * u)
    h_se = (10.0 / 3.0) * math.sqrt(c2_se ** 2 + (1.8 * f * f_se) ** 2
                                    + (0.2 * u_se) ** 2)
    cap_f = (f + 1.0) / 2.0
    cap_h = 1.0 - 0.75 * (u - h) - 0.5 * alpha2
    cap_h_se = 0.75 * math.sqrt(u_se ** 2 + h_se ** 2)
    return EstimatedMetrics(
        f=f, F=cap_f, u=u, h=h, H=cap_h,
        stderr={"f": f_se, "F": f_se / 2.0, "u": u_se, "h": h_se, "H": cap_h_se},
        rates={"u": u, "c2": c2, "f": f},
        rate_stderr={"u": u_se, "c2": c2_se, "f": f_se},
        flags=tuple(flags),
        alpha_norm_sq=alpha2)


def estimate_metrics_2q(curves: dict, u_external: float | None = None,
                        alpha_norm_sq: float | None = None) -> EstimatedMetrics:
    """Two-qubit step-by-step pipeline over the three standard settings.

    curves must hold "zz_p00" (Delta = ZZ, O = |00><00|), "zz_zz"
    (Delta = O = ZZ) and "rm_rm" (Delta = O = |00><00| - |11><11|); an
    optional "v1" curve supplies f.  (u, C_I) come from a free two-term fit of the first
    curve; without u_external the rate with the smaller amplitude is
    taken as u (ideal amplitudes 1/5 vs 4/5).  C_II and C_III follow
    from one-free-rate fits with the earlier rates pinned.  h uses the
    dimension-weighted rate identity, H the fidelity decomposition.
    """
    for key in ("zz_p00", "zz_zz", "rm_rm"):
        if key not in curves:
            raise ValueError("missing curve %r" % key)
    flags = []
    fit1 = fit_exponentials(curves["zz_p00"], 2)
    r0, r1 = fit1.rates
    a0, a1 = fit1.amplitudes
    se0, se1 = fit1.rate_stderr(0, 0), fit1.rate_stderr(1, 0)
    if u_external is not None:
        if abs(r0 - u_external) <= abs(r1 - u_external):
            u, c_i, u_se, ci_se = r0, r1, se0, se1
        else:
            u, c_i, u_se, ci_se = r1, r0, se1, se0
        flags.append("u_from_external")
    else:
        if abs(a0) <= abs(a1):
            u, c_i, u_se, ci_se = r0, r1, se0, se1
        else:
            u, c_i, u_se, ci_se = r1, r0, se1, se0
        flags.append("u_from_amplitude_heuristic")
    flags.extend(fit1.flags)

    fit2 = fit_exponentials(curves["zz_zz"], 3, known_rates=[u, c_i])
    c_ii = fit2.rates[2]
    cii_se = fit2.rate_stderr(2, 2)
    flags.extend(fit2.flags)

    fit3 = fit_exponentials(curves["rm_rm"], 4, known_rates=[u, c_i, c_ii])
    c_iii = fit3.rates[3]
    ciii_se = fit3.rate_stderr(3, 3)
    flags.extend(fit3.flags)

    rates = {"u": u, "C_I": c_i, "C_II": c_ii, "C_III": c_iii}
    rate_se = {"u": u_se, "C_I": ci_se, "C_II": cii_se, "C_III": ciii_se}

    alpha2 = 0.0
    if alpha_norm_sq is None:
        flags.append("alpha_assumed_zero")
    else:
        alpha2 = float(alpha_norm_sq)

    if "v1" in curves:
        fitf = fit_exponentials(curves["v1"], 2, known_rates=[1.0])
        f = fitf.rates[1]
        f_se = fitf.rate_stderr(1, 1)
        flags.extend(fitf.flags)
        rates["f"] = f
        rate_se["f"] = f_se
        cap_f = (3.0 * f + 1.0) / 4.0
        h = (2.0 / 15.0) * (u + 84.0 * c_i + 20.0 * c_ii + 15.0 * c_iii) - 15.0 * f ** 2
        h_se = math.sqrt((2 / 15 * u_se) ** 2 + (168 / 15 * ci_se) ** 2
                         + (40 / 15 * cii_se) ** 2 + (2.0 * ciii_se) ** 2
                         + (30.0 * f * f_se) ** 2)
        cap_h = 1.0 - (15.0 / 16.0) * (u - h) - (3.0 / 16.0) * alpha2
        cap_h_se = (15.0 / 16.0) * math.sqrt(u_se ** 2 + h_se ** 2)
        stderr = {"f": f_se, "F": 0.75 * f_se, "u": u_se, "h": h_se, "H": cap_h_se}
    else:
        flags.append("no_v1_curve")
        f = cap_f = h = cap_h = float("nan")
        stderr = {"f": float("nan"), "F": float("nan"), "u": u_se,
                  "h": float("nan"), "H": float("nan")}

    return EstimatedMetrics(f=f, F=cap_f, u=u, h=h, H=cap_h,
                            stderr=stderr, rates=rates, rate_stderr=rate_se,
                            flags=tuple(flags), alpha_norm_sq=alpha2)
