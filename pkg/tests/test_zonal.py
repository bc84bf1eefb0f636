"""Spherical labels, rank-one zonal polynomials, roots, and rotation angles."""

import numpy as np
import pytest

from exactrb import zonal


def test_label_validation():
    zonal.SphericalLabel(positive_part=(2, 1), d1=2, d=4)
    with pytest.raises(ValueError):
        zonal.SphericalLabel(positive_part=(), d1=1, d=2)
    with pytest.raises(ValueError):
        zonal.SphericalLabel(positive_part=(1, 2), d1=2, d=4)
    with pytest.raises(ValueError):
        zonal.SphericalLabel(positive_part=(1, 1, 1), d1=2, d=4)
    with pytest.raises(ValueError):
        zonal.SphericalLabel(positive_part=(1,), d1=3, d=4)


def test_enumerate_labels_counts():
    assert [l.positive_part for l in zonal.enumerate_sph_labels(1, 2, 2)] \
        == [(1,), (2,)]
    assert len(zonal.enumerate_sph_labels(1, 2, 4)) == 4
    parts = {l.positive_part for l in zonal.enumerate_sph_labels(4, 8, 2)}
    assert parts == {(1,), (2,), (1, 1)}


@pytest.mark.parametrize("t", [1, 2, 3, 5, 6])
def test_enumerate_labels_rank_one_count(t):
    assert len(zonal.enumerate_sph_labels(1, 2, t)) == t


def test_enumerate_labels_deterministic():
    a = zonal.enumerate_sph_labels(2, 4, 4)
    b = zonal.enumerate_sph_labels(2, 4, 4)
    assert a == b


def test_poly_normalized_at_one():
    for k in (1, 2, 3, 5):
        for d in (2, 3, 4):
            assert abs(zonal.zonal_poly_rank1(k, d).eval(1.0) - 1.0) < 1e-13


def test_poly_known_roots():
    assert abs(zonal.zonal_poly_rank1(1, 2).eval(0.5)) < 1e-14
    r = (1.0 + 1.0 / np.sqrt(3.0)) / 2.0
    assert abs(zonal.zonal_poly_rank1(2, 2).eval(r)) < 1e-13
    assert abs(zonal.zonal_poly_rank1(1, 3).eval(1.0 / 3.0)) < 1e-14


def test_poly_orthogonality():
    # Jacobi orthogonality under the weight (1-x)^(d-2) on [0, 1].
    nodes, weights = np.polynomial.legendre.leggauss(40)
    x = (nodes + 1.0) / 2.0
    w = weights / 2.0
    for d in (2, 3, 4):
        wt = w * (1.0 - x) ** (d - 2)
        for k in (1, 2, 3):
            for j in range(k):
                pk = zonal.zonal_poly_rank1(k, d).eval(x)
                pj = zonal.zonal_poly_rank1(j, d).eval(x) if j else np.ones_like(x)
                assert abs((wt * pk * pj).sum()) < 1e-13


def test_root_interlacing():
    for d in (2, 3, 4):
        prev = zonal._roots_in_unit_interval(1, d)
        for k in range(2, 7):
            cur = zonal._roots_in_unit_interval(k, d)
            assert len(cur) == k
            for i in range(len(prev)):
                assert cur[i] < prev[i] < cur[i + 1]
            prev = cur


def test_find_angles_known_values():
    lab = zonal.SphericalLabel(positive_part=(1,), d1=1, d=2)
    sol = zonal.find_angles(lab)
    assert abs(sol.thetas[0] - np.pi / 4) < 1e-12
    lab2 = zonal.SphericalLabel(positive_part=(2,), d1=1, d=2)
    sol2 = zonal.find_angles(lab2)
    assert abs(sol2.thetas[0] - np.arccos(np.sqrt(0.788675))) < 1e-5
    # The angle comes from the largest root in (0, 1).
    r = (1.0 + 1.0 / np.sqrt(3.0)) / 2.0
    assert abs(np.cos(sol2.thetas[0]) ** 2 - r) < 1e-12


def test_find_angles_root_residual():
    for k in range(1, 6):
        for d in (2, 4):
            lab = zonal.SphericalLabel(positive_part=(k,), d1=1, d=d)
            sol = zonal.find_angles(lab)
            poly = zonal.zonal_poly_rank1(k, d)
            assert abs(poly.eval(np.cos(sol.thetas[0]) ** 2)) < 1e-12
            assert 0.0 <= sol.thetas[0] <= np.pi / 2


def test_find_angles_rejects_multivariate():
    lab = zonal.SphericalLabel(positive_part=(1, 1), d1=2, d=4)
    with pytest.raises(ValueError):
        zonal.find_angles(lab)


def test_zonal_mc_identity():
    lab = zonal.SphericalLabel(positive_part=(2,), d1=1, d=2)
    val, se = zonal.zonal_value_mc(lab, np.eye(2), samples=20000, seed=3)
    assert abs(val - 1.0) < 3 * se + 1e-6


def test_zonal_mc_vanishes_at_found_angle():
    lab = zonal.SphericalLabel(positive_part=(2,), d1=1, d=2)
    theta = zonal.find_angles(lab).thetas[0]
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    u = np.cos(theta) * np.eye(2) + 1j * np.sin(theta) * x
    val, se = zonal.zonal_value_mc(lab, u, samples=40000, seed=4)
    assert abs(val) < 3 * se + 1e-3


def test_zonal_mc_bi_k_invariance():
    # Diagonal phases are K-elements for d1 = 1; the estimate only sees
    # |u[0,0]|^2 so the invariance is exact here by construction.
    lab = zonal.SphericalLabel(positive_part=(1,), d1=1, d=2)
    theta = 0.3
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    u = np.cos(theta) * np.eye(2) + 1j * np.sin(theta) * x
    k1 = np.diag(np.exp(1j * np.array([0.4, -1.1])))
    k2 = np.diag(np.exp(1j * np.array([2.0, 0.7])))
    a = zonal.zonal_value_mc(lab, u, samples=20000, seed=5)
    b = zonal.zonal_value_mc(lab, k1 @ u @ k2, samples=20000, seed=5)
    assert abs(a[0] - b[0]) < 3 * np.hypot(a[1], b[1]) + 1e-9


def test_gate_count_estimate():
    assert zonal.gate_count_estimate(1, 4) == 1.0
    assert abs(zonal.gate_count_estimate(3, 4) / 2.86e4 - 1.0) < 0.01
    vals = [zonal.gate_count_estimate(n, 4) for n in range(1, 5)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    vals_t = [zonal.gate_count_estimate(3, t) for t in range(1, 5)]
    assert all(b > a for a, b in zip(vals_t, vals_t[1:]))


def test_partition_count():
    assert zonal.partition_count(0) == 1
    assert zonal.partition_count(1) == 1
    assert zonal.partition_count(4) == 5
    assert zonal.partition_count(10) == 42
