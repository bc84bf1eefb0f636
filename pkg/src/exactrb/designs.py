"""Exact unitary design constructions and their verification.

Three families live here:

* the inductive qudit tower: scalar phase sets W1 lifted through direct sums
  and zonal-angle rotations, giving exact strong designs on U(d) whose
  explicit form multiplies out when small and degrades to a product sampler
  when not;
* finite groups obtained by closure (single/two-qubit Clifford groups, the
  binary icosahedral group), stored as projective representatives;
* the Clifford-interleaved two-qubit 4-design C * U_c * C.

Verification is moment based: ensemble averages of U^(x r) (x) conj(U)^(x s)
are compared against the exact Haar values from the ``haar`` module, either
exactly (explicit ensembles) or by seeded sampling with a 3 sigma criterion
(product ensembles).  Frame potentials provide the scalar cross-check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import haar, numerics, zonal

PHASE_TOL = 1e-8
ROUND_DECIMALS = 7


# ---------------------------------------------------------------------------
# ensemble container


@dataclass(frozen=True)
class FixedLayer:
    matrix: np.ndarray


@dataclass(frozen=True)
class EnsembleLayer:
    ensemble: "UnitaryEnsemble"


@dataclass(frozen=True)
class CtrlLayer:
    """Controlled layer: block diag(U0, U1) with U0, U1 drawn independently."""

    ensemble: "UnitaryEnsemble"


Layer = FixedLayer | EnsembleLayer | CtrlLayer


@dataclass(frozen=True)
class UnitaryEnsemble:
    """Uniformly weighted ensemble of d x d unitaries.

    ``kind`` is "explicit" (a dense (n, d, d) stack) or "product" (a list of
    layers sampled independently and multiplied left to right).
    """

    d: int
    kind: str
    elements: Optional[np.ndarray] = None
    layers: Optional[tuple[Layer, ...]] = None

    def __post_init__(self):
        if self.kind == "explicit":
            if self.elements is None or self.layers is not None:
                raise ValueError("explicit ensemble needs elements and no layers")
            elems = np.asarray(self.elements, dtype=complex)
            if elems.ndim != 3 or elems.shape[1:] != (self.d, self.d):
                raise ValueError(f"elements must be (n, {self.d}, {self.d})")
            dev = np.abs(np.einsum("nij,nik->njk", elems.conj(), elems)
                         - np.eye(self.d)).max()
            if dev > 1e-10:
                raise ValueError(f"non-unitary element (deviation {dev:.3e})")
            object.__setattr__(self, "elements", elems)
        elif self.kind == "product":
            if self.layers is None or self.elements is not None:
                raise ValueError("product ensemble needs layers and no elements")
            object.__setattr__(self, "layers", tuple(self.layers))
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def size(self) -> int:
        """Number of elements (product of layer sizes for product kind)."""
        if self.kind == "explicit":
            return self.elements.shape[0]
        n = 1
        for layer in self.layers:
            if isinstance(layer, FixedLayer):
                continue
            if isinstance(layer, EnsembleLayer):
                n *= layer.ensemble.size
            else:
                n *= layer.ensemble.size ** 2
        return n

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n elements uniformly as an (n, d, d) stack."""
        if self.kind == "explicit":
            idx = rng.integers(self.elements.shape[0], size=n)
            return self.elements[idx]
        out = np.broadcast_to(np.eye(self.d, dtype=complex), (n, self.d, self.d)).copy()
        for layer in self.layers:
            if isinstance(layer, FixedLayer):
                out = out @ layer.matrix
            elif isinstance(layer, EnsembleLayer):
                out = np.einsum("nab,nbc->nac", out, layer.ensemble.sample(rng, n))
            else:
                half = layer.ensemble.d
                u0 = layer.ensemble.sample(rng, n)
                u1 = layer.ensemble.sample(rng, n)
                blocks = np.zeros((n, 2 * half, 2 * half), dtype=complex)
                blocks[:, :half, :half] = u0
                blocks[:, half:, half:] = u1
                out = np.einsum("nab,nbc->nac", out, blocks)
        return out

    def dedup(self, mod_phase: bool = True) -> "UnitaryEnsemble":
        """Remove duplicate elements, optionally up to global phase.

        Canonical phase: the first entry above tolerance is made positive
        real.  First occurrence order is preserved.  Idempotent.
        """
        if self.kind != "explicit":
            raise ValueError("dedup applies to explicit ensembles")
        seen = {}
        keep = []
        for i, u in enumerate(self.elements):
            c = _canonical_phase(u) if mod_phase else u
            k = _round_key(c)
            if k not in seen:
                seen[k] = i
                keep.append(c if mod_phase else u)
        return UnitaryEnsemble(d=self.d, kind="explicit", elements=np.array(keep))


def _canonical_phase(u: np.ndarray) -> np.ndarray:
    flat = u.reshape(-1)
    idx = np.flatnonzero(np.abs(flat) > PHASE_TOL)
    if len(idx) == 0:
        return u.copy()
    phase = flat[idx[0]] / abs(flat[idx[0]])
    return u / phase


def _round_key(u: np.ndarray) -> bytes:
    re = np.round(u.real, ROUND_DECIMALS)
    im = np.round(u.imag, ROUND_DECIMALS)
    re[re == 0.0] = 0.0
    im[im == 0.0] = 0.0
    return re.tobytes() + im.tobytes()


# ---------------------------------------------------------------------------
# the inductive qudit tower


def w1(t: int) -> UnitaryEnsemble:
    """Exact strong t-design on U(1): the (t+1)-st roots of unity.

    All mixed moments E[z^r conj(z)^s] with r, s <= t equal delta_rs, which
    is the Haar value on U(1).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    omega = np.exp(2j * np.pi / (t + 1))
    elems = np.array([[[omega ** j]] for j in range(t + 1)])
    return UnitaryEnsemble(d=1, kind="explicit", elements=elems)


def direct_sum_ensemble(a: UnitaryEnsemble, b: UnitaryEnsemble) -> UnitaryEnsemble:
    """All block-diagonal sums u (+) v over the two ensembles."""
    d = a.d + b.d
    if a.kind != "explicit":
        raise ValueError("direct_sum_ensemble needs an explicit first factor")
    if b.kind == "explicit":
        na, nb = a.size, b.size
        out = np.zeros((na * nb, d, d), dtype=complex)
        k = 0
        for u in a.elements:
            for v in b.elements:
                out[k, :a.d, :a.d] = u
                out[k, a.d:, a.d:] = v
                k += 1
        return UnitaryEnsemble(d=d, kind="explicit", elements=out)
    # u (+) (L1 L2 ...) = (u (+) I) (I (+) L1) (I (+) L2) ...
    head = np.zeros((a.size, d, d), dtype=complex)
    head[:, :a.d, :a.d] = a.elements
    head[:, a.d:, a.d:] = np.eye(b.d)
    layers: list[Layer] = [EnsembleLayer(UnitaryEnsemble(d=d, kind="explicit", elements=head))]
    for layer in b.layers:
        layers.append(_lift_layer(layer, a.d))
    return UnitaryEnsemble(d=d, kind="product", layers=tuple(layers))


def _lift_layer(layer: Layer, pad: int) -> Layer:
    if isinstance(layer, FixedLayer):
        m = np.eye(pad + layer.matrix.shape[0], dtype=complex)
        m[pad:, pad:] = layer.matrix
        return FixedLayer(m)
    if isinstance(layer, EnsembleLayer):
        ens = layer.ensemble
        if ens.kind != "explicit":
            raise ValueError("cannot lift nested product layers")
        n = ens.size
        out = np.zeros((n, pad + ens.d, pad + ens.d), dtype=complex)
        out[:, :pad, :pad] = np.eye(pad)
        out[:, pad:, pad:] = ens.elements
        return EnsembleLayer(UnitaryEnsemble(d=pad + ens.d, kind="explicit", elements=out))
    raise ValueError("cannot lift controlled layers")


def rotation_unitary(thetas: Sequence[float], d1: int, d: int) -> np.ndarray:
    """Block rotation [[C, iS, 0], [iS, C, 0], [0, 0, I]] on C^d.

    C and S are diag(cos theta_i) and diag(sin theta_i) over the d1 angles.
    For d1 = 1, d = 2 this is exp(i theta X).
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape != (d1,):
        raise ValueError("need exactly d1 angles")
    if 2 * d1 > d:
        raise ValueError("need 2*d1 <= d")
    out = np.eye(d, dtype=complex)
    c = np.cos(thetas)
    s = np.sin(thetas)
    out[:d1, :d1] = np.diag(c)
    out[d1:2 * d1, d1:2 * d1] = np.diag(c)
    out[:d1, d1:2 * d1] = 1j * np.diag(s)
    out[d1:2 * d1, :d1] = 1j * np.diag(s)
    return out


def build_qudit_design(d: int, t: int, cap: int = 10 ** 7) -> UnitaryEnsemble:
    """Exact strong t-design on U(d) by the inductive tower construction.

    Recursion: a strong design on U(d-1) is direct-summed with W1, then
    interleaved with one zonal-angle rotation per nonzero spherical label of
    (U(d), U(1) x U(d-1)).  The result is multiplied out explicitly when its
    projected size stays within ``cap``, else returned as a product sampler.
    """
    if d < 1 or t < 1:
        raise ValueError("need d >= 1 and t >= 1")
    if d == 1:
        return w1(t)
    inner = build_qudit_design(d - 1, t, cap=cap)
    base = direct_sum_ensemble(w1(t), inner)
    labels = zonal.enumerate_sph_labels(1, d, t)
    rotations = [rotation_unitary(zonal.find_angles(lab).thetas, 1, d) for lab in labels]
    projected = base.size ** (len(labels) + 1)
    if base.kind == "explicit" and projected <= cap:
        cur = base.elements
        for rot in rotations:
            cur = np.einsum("iab,jbc->ijac", cur @ rot, base.elements)
            cur = cur.reshape(-1, d, d)
        return UnitaryEnsemble(d=d, kind="explicit", elements=cur)
    layers: list[Layer] = [EnsembleLayer(base)]
    for rot in rotations:
        layers.append(FixedLayer(rot))
        layers.append(EnsembleLayer(base))
    return UnitaryEnsemble(d=d, kind="product", layers=tuple(layers))


# ---------------------------------------------------------------------------
# finite groups by closure


def _closure(generators: Sequence[np.ndarray], d: int, max_products: int) -> np.ndarray:
    """Group closure under right multiplication, projective representatives.

    Elements are kept modulo global phase via canonical-phase hashing; the
    BFS order makes the output deterministic.
    """
    gens = [np.asarray(g, dtype=complex) for g in generators]
    first = _canonical_phase(np.eye(d, dtype=complex))
    elems = [first]
    seen = {_round_key(first): 0}
    frontier = [0]
    products = 0
    while frontier:
        nxt = []
        for i in frontier:
            for g in gens:
                products += 1
                if products > max_products:
                    raise RuntimeError(
                        f"group closure did not terminate within {max_products} products")
                cand = _canonical_phase(elems[i] @ g)
                key = _round_key(cand)
                if key not in seen:
                    seen[key] = len(elems)
                    elems.append(cand)
                    nxt.append(len(elems) - 1)
        frontier = nxt
    return np.array(elems)


def icosahedral_group() -> UnitaryEnsemble:
    """The 60 projective icosahedral rotations as SU(2) representatives.

    Generated by 2 pi / 5 rotations about two adjacent five-fold axes of the
    icosahedron; all generator entries are algebraic in the golden ratio.
    The group is an exact 4-design on U(2) (moments with r = s).
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    axes = np.array([[0.0, 1.0, phi], [0.0, -1.0, phi]]) / np.sqrt(1.0 + phi ** 2)
    gens = []
    c, s = np.cos(np.pi / 5.0), np.sin(np.pi / 5.0)
    paulis = [np.array([[0, 1], [1, 0]], dtype=complex),
              np.array([[0, -1j], [1j, 0]], dtype=complex),
              np.array([[1, 0], [0, -1]], dtype=complex)]
    for axis in axes:
        n_dot_sigma = sum(a * p for a, p in zip(axis, paulis))
        gens.append(c * np.eye(2, dtype=complex) - 1j * s * n_dot_sigma)
    elems = _closure(gens, 2, max_products=10_000)
    return UnitaryEnsemble(d=2, kind="explicit", elements=elems)


def clifford_group(q: int) -> UnitaryEnsemble:
    """Projective q-qubit Clifford group by closure of {H, S} (+ CNOT).

    Cardinalities modulo phase: 24 for q = 1, 11520 for q = 2, matching
    2^(q^2 + 2q) * prod_j (4^j - 1).
    """
    if q not in (1, 2):
        raise ValueError("clifford_group supports q in {1, 2}")
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
    s = np.diag([1.0, 1.0j])
    if q == 1:
        gens = [h, s]
        d = 2
    else:
        eye = np.eye(2, dtype=complex)
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                        dtype=complex)
        gens = [np.kron(h, eye), np.kron(eye, h), np.kron(s, eye), np.kron(eye, s), cnot]
        d = 4
    elems = _closure(gens, d, max_products=2_000_000)
    return UnitaryEnsemble(d=d, kind="explicit", elements=elems)


# ---------------------------------------------------------------------------
# the Clifford-interleaved two-qubit 4-design


_UC_ANGLES_A = (1.50097, 5.69898, 2.53181)
_UC_ANGLES_A2 = (1.25383, 0.01700, 6.21127)
_UC_PHIS = (0.376407, 0.368786, 3.69014)
_UC_ANGLES_B = (4.66335, 3.04854, 1.45524)
_UC_ANGLES_B2 = (0.337423, 3.38137, 3.82503)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(1j * theta), np.exp(-1j * theta)])


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    # exp(i theta Y)
    return np.array([[c, s], [-s, c]], dtype=complex)


def _r1(a: float, b: float, c: float) -> np.ndarray:
    return _rz(a) @ _ry(b) @ _rz(c)


def uc_unitary() -> np.ndarray:
    """The fixed two-qubit unitary that upgrades Clifford twirling to a
    4-design when sandwiched between uniform Clifford layers.

    Single-qubit factors are Z-Y-Z rotation products exp(i theta W); the
    entangling core is exp(-i (phi_x XX + phi_y YY + phi_z ZZ)).  The angles
    are fixed numerical constants.
    """
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    outer = np.kron(_r1(*_UC_ANGLES_A), _r1(*_UC_ANGLES_A2))
    inner = np.kron(_r1(*_UC_ANGLES_B), _r1(*_UC_ANGLES_B2))
    phi_x, phi_y, phi_z = _UC_PHIS
    core = numerics.matexp(
        -1j * (phi_x * np.kron(x, x) + phi_y * np.kron(y, y) + phi_z * np.kron(z, z)))
    return outer @ core @ inner


def interleaved_clifford_design() -> UnitaryEnsemble:
    """Product ensemble C(4) * U_c * C(4): an exact two-qubit 4-design to
    numerical precision (certified through its frame potential)."""
    cliffords = clifford_group(2)
    return UnitaryEnsemble(d=4, kind="product", layers=(
        EnsembleLayer(cliffords), FixedLayer(uc_unitary()), EnsembleLayer(cliffords)))


# ---------------------------------------------------------------------------
# qubit tower descriptor


@dataclass(frozen=True)
class CircuitDescriptor:
    """Layered description of the (N+1)-qubit design construction.

    Layers alternate controlled applications of an N-qubit design (control on
    the new qubit) with fixed controlled-X rotations whose angle tables come
    from multivariate zonal-function zeros and must be supplied externally.
    """

    n_qubits: int
    base: Optional[UnitaryEnsemble]
    rotation_layers: tuple[tuple[zonal.SphericalLabel, np.ndarray], ...]
    base_case: Optional[UnitaryEnsemble] = None

    @property
    def n_design_layers(self) -> int:
        return 1 if self.base_case is not None else len(self.rotation_layers) + 1

    def to_ensemble(self) -> UnitaryEnsemble:
        if self.base_case is not None:
            return self.base_case
        d = 2 ** self.n_qubits
        layers: list[Layer] = [CtrlLayer(self.base)]
        for _, angles in self.rotation_layers:
            layers.append(FixedLayer(_ctrl_x_rotation(angles)))
            layers.append(CtrlLayer(self.base))
        return UnitaryEnsemble(d=d, kind="product", layers=tuple(layers))


def _ctrl_x_rotation(angles: np.ndarray) -> np.ndarray:
    """sum_j exp(i theta_j X) (x) |j><j| on (C^2) (x) (C^(2^N))."""
    n = len(angles)
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for j, theta in enumerate(angles):
        rot = np.array([[np.cos(theta), 1j * np.sin(theta)],
                        [1j * np.sin(theta), np.cos(theta)]])
        out += np.kron(rot, np.eye(n)[j][:, None] * np.eye(n)[j][None, :])
    return out


def build_qubit_circuit_descriptor(
        n_plus_1: int, t: int,
        angle_tables: Optional[dict[tuple[int, tuple[int, ...]], np.ndarray]] = None,
) -> CircuitDescriptor:
    """Descriptor of the recursive (N+1)-qubit design circuit.

    ``angle_tables`` maps (qubit count, positive partition) to the 2^N
    rotation angles of that layer.  The single-qubit base case needs no
    table; every higher level does, and a missing entry raises.
    """
    if n_plus_1 < 1 or t < 1:
        raise ValueError("need n_plus_1 >= 1 and t >= 1")
    if n_plus_1 == 1:
        return CircuitDescriptor(n_qubits=1, base=None, rotation_layers=(),
                                 base_case=build_qudit_design(2, t))
    angle_tables = angle_tables or {}
    n = n_plus_1 - 1
    big_d = 2 ** n
    labels = zonal.enumerate_sph_labels(big_d, 2 * big_d, t)
    rot_layers = []
    missing = []
    for lab in labels:
        key = (n_plus_1, lab.positive_part)
        if key not in angle_tables:
            missing.append(key)
            continue
        angles = np.asarray(angle_tables[key], dtype=float)
        if angles.shape != (big_d,):
            raise ValueError(f"angle table for {key} must have {big_d} entries")
        rot_layers.append((lab, angles))
    if missing:
        raise ValueError(
            "missing external angle tables for labels: "
            + ", ".join(str(k) for k in missing))
    base = build_qubit_circuit_descriptor(n, t, angle_tables).to_ensemble()
    return CircuitDescriptor(n_qubits=n_plus_1, base=base,
                             rotation_layers=tuple(rot_layers))


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class DesignReport:
    """Outcome of a moment-based design test."""

    d: int
    t_checked: int
    strong: bool
    mode: str
    tol: float
    residuals: dict
    stderrs: Optional[dict]
    frame_potential: Optional[float]
    frame_potential_stderr: Optional[float]
    haar_frame_potential: Optional[int]
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "t_checked": self.t_checked,
            "strong": self.strong,
            "mode": self.mode,
            "tol": self.tol,
            "residuals": {f"{r},{s}": v for (r, s), v in self.residuals.items()},
            "stderrs": None if self.stderrs is None else {
                f"{r},{s}": v for (r, s), v in self.stderrs.items()},
            "frame_potential": self.frame_potential,
            "frame_potential_stderr": self.frame_potential_stderr,
            "haar_frame_potential": self.haar_frame_potential,
            "passed": self.passed,
        }


def _haar_reference(d: int, r: int, s: int) -> np.ndarray:
    if r != s:
        return np.zeros((d ** (r + s),) * 2, dtype=complex)
    if r == 0:
        return np.ones((1, 1), dtype=complex)
    return haar.haar_moment_projector(d, r).matrix


def verify_strong_design(e: UnitaryEnsemble, t: int, tol: float = 1e-10,
                         mc_samples: Optional[int] = None, strong: bool = True,
                         seed: int = 0,
                         frame_potential_mode: str = "auto") -> DesignReport:
    """Moment test of an ensemble against the exact Haar values.

    With ``strong`` all mixed moments 0 <= r, s <= t are checked (Haar value
    is zero for r != s); otherwise only the diagonal r = s moments that
    define an ordinary design, which is the right test for projective
    ensembles whose stored representatives carry no phases.  Explicit
    ensembles are averaged exactly and compared at ``tol``; product
    ensembles are sampled ``mc_samples`` times and compared at three
    standard errors.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    pairs = [(r, s) for r in range(t + 1) for s in range(t + 1)
             if strong or r == s]
    exact = e.kind == "explicit" and mc_samples is None
    if not exact and not mc_samples:
        raise ValueError("product ensembles require mc_samples")
    if exact:
        stack = e.elements
        residuals = {}
        for r, s in pairs:
            avg = haar.mixed_moment(stack, r, s)
            residuals[(r, s)] = float(np.linalg.norm(avg - _haar_reference(e.d, r, s)))
        stderrs = None
        passed = all(v <= tol for v in residuals.values())
        mode = "exact"
    else:
        rng = np.random.default_rng(seed)
        stack = e.sample(rng, mc_samples)
        residuals = {}
        stderrs = {}
        for r, s in pairs:
            avg = haar.mixed_moment(stack, r, s)
            ref = _haar_reference(e.d, r, s)
            residuals[(r, s)] = float(np.linalg.norm(avg - ref))
            stderrs[(r, s)] = _moment_stderr(stack, r, s, avg)
        passed = all(residuals[p] <= max(3.0 * stderrs[p], 1e-14) for p in residuals)
        mode = "mc"
    fp = fp_se = haar_fp = None
    if frame_potential_mode != "skip":
        haar_fp = haar.haar_frame_potential(e.d, t)
        if e.kind == "explicit" and e.size ** 2 <= 4_000_000:
            fp, fp_se = frame_potential(e, t, mode="exact-pairs")
        else:
            fp, fp_se = frame_potential(e, t, mode="mc", seed=seed + 1,
                                        samples=mc_samples or 10_000)
    return DesignReport(d=e.d, t_checked=t, strong=strong, mode=mode, tol=tol,
                        residuals=residuals, stderrs=stderrs, frame_potential=fp,
                        frame_potential_stderr=fp_se, haar_frame_potential=haar_fp,
                        passed=passed)


def _moment_stderr(stack: np.ndarray, r: int, s: int, mean: np.ndarray) -> float:
    """Aggregate standard error sqrt(sum_entries var / n) of a sampled moment.

    Uses a second pass over chunks to accumulate per-entry second moments.
    """
    n = stack.shape[0]
    if n < 2:
        return float("inf")
    sq = np.zeros(mean.shape, dtype=float)
    chunk = 2048
    for start in range(0, n, chunk):
        part = stack[start:start + chunk]
        kr = haar._kron_power(part, r)
        ks = haar._kron_power(part.conj(), s)
        prod = np.einsum("nab,ncd->nacbd", kr, ks).reshape(part.shape[0], *mean.shape)
        sq += (np.abs(prod) ** 2).sum(axis=0)
    var = sq / n - np.abs(mean) ** 2
    var = np.clip(var, 0.0, None)
    return float(np.sqrt(var.sum() / n))


def frame_potential(e: UnitaryEnsemble, t: int, mode: str = "exact-pairs",
                    seed: int = 0, samples: int = 10_000,
                    ) -> tuple[float, Optional[float]]:
    """Frame potential E |tr(U^dag V)|^(2t) of an ensemble.

    Modes: "exact-pairs" sums every ordered pair of an explicit ensemble
    (guarded at 1e9 pairs); "interleaved-reduced" evaluates the collapsed
    group average (1/|C|^2) sum |tr(Uc^dag C Uc C')|^(2t) of a three-layer
    product C * Uc * C; "mc" samples independent pairs and reports a
    standard error.  Always at least the Haar value.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if mode == "exact-pairs":
        if e.kind != "explicit":
            raise ValueError("exact-pairs needs an explicit ensemble")
        n = e.size
        if n * n > 1_000_000_000:
            raise ValueError("pair count exceeds 1e9; use mode='mc'")
        flat = e.elements.reshape(n, -1)
        total = 0.0
        chunk = max(1, 2 ** 22 // max(n, 1))
        for start in range(0, n, chunk):
            tr = flat[start:start + chunk].conj() @ flat.T
            total += (np.abs(tr) ** (2 * t)).sum()
        return total / (n * n), None
    if mode == "interleaved-reduced":
        layers = e.layers if e.kind == "product" else None
        ok = (layers is not None and len(layers) == 3
              and isinstance(layers[0], EnsembleLayer)
              and isinstance(layers[1], FixedLayer)
              and isinstance(layers[2], EnsembleLayer))
        if not ok:
            raise ValueError("interleaved-reduced needs layers [ensemble, fixed, ensemble]")
        group = layers[0].ensemble.elements
        uc = layers[1].matrix
        n = group.shape[0]
        conj_flat = np.einsum("ba,nbc,cd->nad", uc.conj().T, group, uc).reshape(n, -1)
        right_flat = group.transpose(0, 2, 1).reshape(n, -1)
        total = 0.0
        chunk = max(1, 2 ** 22 // max(n, 1))
        for start in range(0, n, chunk):
            tr = conj_flat[start:start + chunk] @ right_flat.T
            total += (np.abs(tr) ** (2 * t)).sum()
        return total / (n * n), None
    if mode == "mc":
        rng = np.random.default_rng(seed)
        u = e.sample(rng, samples)
        v = e.sample(rng, samples)
        vals = np.abs(np.einsum("nab,nab->n", u.conj(), v)) ** (2 * t)
        return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# file format


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def _ensemble_to_json(e: UnitaryEnsemble) -> dict:
    out: dict = {"d": e.d, "kind": e.kind}
    if e.kind == "explicit":
        out["elements"] = [_matrix_to_json(u) for u in e.elements]
    else:
        layers = []
        for layer in e.layers:
            if isinstance(layer, FixedLayer):
                layers.append({"kind": "fixed", "matrix": _matrix_to_json(layer.matrix)})
            elif isinstance(layer, EnsembleLayer):
                layers.append({"kind": "ensemble", "ensemble": _ensemble_to_json(layer.ensemble)})
            else:
                layers.append({"kind": "ctrl", "ensemble": _ensemble_to_json(layer.ensemble)})
        out["layers"] = layers
    return out


def _ensemble_from_json(doc: dict) -> UnitaryEnsemble:
    if doc["kind"] == "explicit":
        elems = np.array([_matrix_from_json(m) for m in doc["elements"]])
        return UnitaryEnsemble(d=doc["d"], kind="explicit", elements=elems)
    layers: list[Layer] = []
    for item in doc["layers"]:
        if item["kind"] == "fixed":
            layers.append(FixedLayer(_matrix_from_json(item["matrix"])))
        elif item["kind"] == "ensemble":
            layers.append(EnsembleLayer(_ensemble_from_json(item["ensemble"])))
        elif item["kind"] == "ctrl":
            layers.append(CtrlLayer(_ensemble_from_json(item["ensemble"])))
        else:
            raise ValueError(f"unknown layer kind {item['kind']!r}")
    return UnitaryEnsemble(d=doc["d"], kind="product", layers=tuple(layers))


def save_design(e: UnitaryEnsemble, path: str, extra: Optional[dict] = None) -> None:
    """Write an ensemble as JSON; floats round-trip exactly."""
    doc = {"format": "exactrb-design", "version": 1}
    doc.update(extra or {})
    doc.update(_ensemble_to_json(e))
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_design(path: str) -> UnitaryEnsemble:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "exactrb-design":
        raise ValueError("not a design file")
    return _ensemble_from_json(doc)
