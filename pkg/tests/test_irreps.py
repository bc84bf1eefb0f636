"""Two-copy sector projectors, decay rates, and overlap coefficients."""

import numpy as np
import pytest

from exactrb import channels, irreps, numerics, paulis

Z = paulis.Z
P0 = np.array([[1, 0], [0, 0]], dtype=complex)


def ptm_two_copy(l):
    return np.kron(l.matrix, l.matrix)


def unitary_two_copy(u, q):
    basis = paulis.pauli_basis(q)
    lv = np.einsum("mab,bc,ncd,ad->mn", basis, u, basis, u.conj()).real
    return np.kron(lv, lv)


def test_projector_dims():
    p1 = irreps.projector_set(1)
    assert p1.dims == {"0": 1, "I": 5}
    p2 = irreps.projector_set(2)
    assert p2.dims == {"0": 1, "I": 84, "II": 20, "III": 15}


@pytest.mark.parametrize("q", [1, 2])
def test_projector_algebra(q):
    p = irreps.projector_set(q)
    labels = p.labels
    for a in labels:
        pa = p.projectors[a]
        assert np.abs(pa - pa.T).max() < 1e-12
        assert np.abs(pa @ pa - pa).max() < 1e-10
        assert abs(np.trace(pa) - p.dims[a]) < 1e-8
        for b in labels:
            if b != a:
                assert np.abs(pa @ p.projectors[b]).max() < 1e-10


@pytest.mark.parametrize("q", [1, 2])
def test_projector_invariance(q):
    p = irreps.projector_set(q)
    rng = np.random.default_rng(41)
    lv2 = unitary_two_copy(numerics.haar_unitary(2 ** q, rng), q)
    for pa in p.projectors.values():
        assert np.abs(lv2 @ pa - pa @ lv2).max() < 1e-10


def test_projectors_2q_seed_independent():
    a = irreps.projectors_2q(seed=0)
    b = irreps.projectors_2q(seed=123)
    for lab in a.labels:
        assert np.abs(a.projectors[lab] - b.projectors[lab]).max() < 1e-10


def test_trivial_projector_is_rank_one_line():
    p = irreps.projector_set(1)
    v = np.zeros(16)
    for n in (1, 2, 3):
        v[4 * n + n] = 1.0
    v /= np.linalg.norm(v)
    assert np.abs(p.projectors["0"] - np.outer(v, v)).max() < 1e-12


def test_decay_rates_trivial_equals_unitarity():
    p1 = irreps.projector_set(1)
    for seed in range(4):
        l = channels.random_cptp(2, 2, seed=seed).to_ptm()
        rates = irreps.decay_rates(l, p1)
        assert abs(rates["0"] - channels.metrics(l).u) < 1e-12


def test_decay_rates_identity_channel():
    for q in (1, 2):
        p = irreps.projector_set(q)
        rates = irreps.decay_rates(channels.identity_ptm(q), p)
        for val in rates.values():
            assert abs(val - 1.0) < 1e-10


@pytest.mark.parametrize("p_err,q_mix", [(0.01, 0.95), (0.1, 0.5), (0.3, 0.0)])
def test_noise1_rate_closed_form(p_err, q_mix):
    p1 = irreps.projector_set(1)
    met = channels.noise1_closed_form(p_err, q_mix)
    rates = irreps.decay_rates(channels.noise1_model(p_err, q_mix), p1)
    c1 = 0.9 * met.f ** 2 - 0.2 * met.u + 0.3 * met.h
    assert abs(rates["0"] - met.u) < 1e-12
    assert abs(rates["I"] - c1) < 1e-12


@pytest.mark.parametrize("p_err,q_mix", [(0.01, 0.0), (0.01, 0.95), (0.2, 0.5)])
def test_noise2_rate_closed_form(p_err, q_mix):
    p2 = irreps.projector_set(2)
    want = channels.noise2_closed_form(p_err, q_mix)
    rates = irreps.decay_rates(channels.noise2_model(p_err, q_mix), p2)
    assert abs(rates["0"] - want["u"]) < 1e-12
    assert abs(rates["I"] - want["C_I"]) < 1e-12
    assert abs(rates["II"] - want["C_II"]) < 1e-12
    assert abs(rates["III"] - want["C_III"]) < 1e-12


def test_rate_dimension_sum_identity():
    # Dimension-weighted nontrivial rates reduce to (f, u, h) data.
    p1 = irreps.projector_set(1)
    for seed in range(6):
        l = channels.random_cptp(2, 3, seed=100 + seed).to_ptm()
        met = channels.metrics(l)
        rates = irreps.decay_rates(l, p1)
        lhs = 5.0 * rates["I"]
        rhs = 4.5 * met.f ** 2 - met.u + 1.5 * met.h
        assert abs(lhs - rhs) < 1e-12


def test_coefficients_single_qubit():
    p1 = irreps.projector_set(1)
    coeff = irreps.coefficients(Z, P0, channels.identity_ptm(1), p1)
    assert abs(coeff["0"] - 1.0 / 3.0) < 1e-12
    assert coeff["I"] >= -1e-12


def test_coefficients_table_values():
    p2 = irreps.projector_set(2)
    ident = channels.identity_ptm(2)
    zz = np.kron(Z, Z)
    p00 = np.kron(P0, P0)
    rho_minus = np.diag([1.0, 0, 0, -1.0]).astype(complex)
    table = {
        "zz_p00": (zz, p00, (1 / 5, 4 / 5, 0.0, 0.0)),
        "zz_zz": (zz, zz, (16 / 15, 48 / 5, 16 / 3, 0.0)),
        "rm_rm": (rho_minus, rho_minus, (4 / 15, 41 / 15, 1 / 3, 2 / 3)),
    }
    for name, (o_ini, o_meas, want) in table.items():
        coeff = irreps.coefficients(o_ini, o_meas, ident, p2)
        got = tuple(coeff[lab] for lab in ("0", "I", "II", "III"))
        for g, w in zip(got, want):
            assert abs(g - w) < 1e-12, name


def test_coefficients_requires_traceless():
    p1 = irreps.projector_set(1)
    with pytest.raises(ValueError):
        irreps.coefficients(P0, Z, channels.identity_ptm(1), p1)


def test_coefficients_carry_noise_adjoint():
    # With noise, the measurement operator is propagated through the
    # transpose of the PTM; a diagonal damping scales the ZZ overlap.
    p1 = irreps.projector_set(1)
    damp = np.diag([1.0, 0.5, 0.5, 0.5])
    l = channels.PTM(q=1, matrix=damp)
    base = irreps.coefficients(Z, Z, channels.identity_ptm(1), p1)
    scaled = irreps.coefficients(Z, Z, l, p1)
    for lab in base:
        assert abs(scaled[lab] - 0.25 * base[lab]) < 1e-12


def test_traceless_symmetric_basis_orthonormal():
    b = irreps.traceless_symmetric_basis(2)
    assert b.shape == (120, 256)
    assert np.abs(b @ b.T - np.eye(120)).max() < 1e-12
