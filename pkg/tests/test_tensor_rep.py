import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import sph_harm_y
from sympy import Rational
from sympy.physics.quantum.cg import CG

from classical_spin.ensemble import RandomStream, hs_random_state
from classical_spin.spin_core import Direction, SpinJ, coherent_state, maximally_mixed, projector, sphere_quadrature
from classical_spin.tensor_rep import (
    PFunctionCoeffs,
    TensorCoeffs,
    clebsch_gordan,
    clebsch_gordan_exact,
    coeffs_to_rho,
    f_factor,
    kq_index,
    kq_pairs,
    p_coeffs,
    p_eval,
    p_harmonics,
    p_min_on_sphere,
    p_values,
    reconstruct_rho,
    rho_from_p,
    rho_to_coeffs,
    spherical_harmonic,
    spherical_harmonics,
    tensor_basis,
    tensor_operator,
)


def _random_state(twice_j, index, seed=11):
    return hs_random_state(SpinJ(twice_j), RandomStream(seed, index))


def test_kq_indexing():
    pairs = kq_pairs(3)
    assert len(pairs) == 16
    assert [kq_index(K, Q) for K, Q in pairs] == list(range(16))


def test_clebsch_gordan_examples():
    h = Fraction(1, 2)
    assert clebsch_gordan(h, h, h, h, 1, 1) == 1.0
    assert math.isclose(clebsch_gordan(h, h, h, -h, 1, 0), 1 / math.sqrt(2))
    assert clebsch_gordan(h, h, h, h, 1, 0) == 0.0
    assert clebsch_gordan(1, 1, 1, 1, 0, 0) == 0.0
    sign, sq = clebsch_gordan_exact(h, h, h, -h, 0, 0)
    assert (sign, sq) == (1, Fraction(1, 2))
    with pytest.raises(ValueError):
        clebsch_gordan(h, 1, h, h, 1, 1)
    with pytest.raises(ValueError):
        clebsch_gordan(0.3, 0, 1, 0, 1, 0)


def test_clebsch_gordan_against_sympy():
    labels = [
        (Fraction(3, 2), Fraction(1, 2), 2, -1, Fraction(3, 2), Fraction(-1, 2)),
        (3, -2, 3, 1, 4, -1),
        (Fraction(5, 2), Fraction(3, 2), 4, 0, Fraction(5, 2), Fraction(3, 2)),
        (Fraction(7, 2), Fraction(-5, 2), 5, 3, Fraction(9, 2), Fraction(1, 2)),
        (2, 2, 2, -2, 0, 0),
        (Fraction(21, 2), Fraction(1, 2), 21, -1, Fraction(21, 2), Fraction(-1, 2)),
    ]
    for j1, m1, j2, m2, J, M in labels:
        ref = float(CG(*(Rational(x.numerator, x.denominator) if isinstance(x, Fraction) else x for x in (j1, m1, j2, m2, J, M))).doit())
        assert math.isclose(clebsch_gordan(j1, m1, j2, m2, J, M), ref, abs_tol=1e-14)


@pytest.mark.parametrize("j1,j2", [(Fraction(1, 2), Fraction(1, 2)), (1, Fraction(3, 2)), (2, 3)])
def test_clebsch_gordan_unitarity(j1, j2):
    j1, j2 = Fraction(j1), Fraction(j2)
    for a in range(int(2 * j1) + 1):
        m1 = j1 - a
        for b in range(int(2 * j2) + 1):
            m2 = j2 - b
            total = Fraction(0)
            J = abs(j1 - j2)
            while J <= j1 + j2:
                if abs(m1 + m2) <= J:
                    total += clebsch_gordan_exact(j1, m1, j2, m2, J, m1 + m2)[1]
                J += 1
            assert total == 1


def test_tensor_operator_examples():
    for n in (1, 4):
        spin = SpinJ(n)
        np.testing.assert_allclose(tensor_operator(spin, 0, 0), np.eye(spin.dim) / math.sqrt(spin.dim), atol=1e-15)
    np.testing.assert_allclose(tensor_operator(SpinJ(1), 1, 0), np.diag([1, -1]) / math.sqrt(2), atol=1e-15)
    with pytest.raises(ValueError):
        tensor_operator(SpinJ(1), 2, 0)
    with pytest.raises(ValueError):
        tensor_operator(SpinJ(2), 1, 2)


@pytest.mark.parametrize("twice_j", [1, 2, 3, 6, 13, 21])
def test_tensor_orthonormality(twice_j):
    T = tensor_basis(SpinJ(twice_j))
    gram = np.einsum("kab,lab->kl", T, T.conj())
    np.testing.assert_allclose(gram, np.eye(len(T)), atol=1e-12)


def test_tensor_basis_read_only():
    T = tensor_basis(SpinJ(2))
    with pytest.raises(ValueError):
        T[0, 0, 0] = 1.0


def test_rho_to_coeffs_examples():
    c = rho_to_coeffs(maximally_mixed(SpinJ(3)))
    assert abs(c[0, 0] - 1 / 2) < 1e-12
    assert np.abs(c.values[1:]).max() < 1e-15
    c = rho_to_coeffs(np.diag([1.0, 0.0]))
    assert abs(c[1, 0] - 1 / math.sqrt(2)) < 1e-15


@pytest.mark.parametrize("twice_j", [1, 2, 5, 9, 14, 21])
def test_rho_coeff_round_trip_and_parseval(twice_j):
    spin = SpinJ(twice_j)
    for i in range(3):
        rho = _random_state(twice_j, i)
        c = rho_to_coeffs(rho)
        assert c.hermiticity_defect() < 1e-10
        assert abs(c[0, 0] - 1 / math.sqrt(spin.dim)) < 1e-12
        np.testing.assert_allclose(coeffs_to_rho(c), rho, atol=1e-12)
        purity = np.trace(rho @ rho).real
        assert abs(np.sum(np.abs(c.values) ** 2) - purity) < 1e-10
        dist2 = np.linalg.norm(rho - maximally_mixed(spin)) ** 2
        assert abs(np.sum(np.abs(c.values[1:]) ** 2) - dist2) < 1e-10


def test_coeffs_to_rho_rejects_non_hermitian_image():
    vals = np.zeros(4, dtype=complex)
    vals[kq_index(1, 1)] = 1.0
    with pytest.raises(ValueError, match="Hermitian"):
        coeffs_to_rho(TensorCoeffs(SpinJ(1), vals))


def test_coeff_json_and_arithmetic():
    c = rho_to_coeffs(_random_state(3, 0))
    back = TensorCoeffs.from_json(c.to_json())
    np.testing.assert_array_equal(back.values, c.values)
    assert back.spin == c.spin
    d = rho_to_coeffs(_random_state(3, 1))
    np.testing.assert_allclose((2 * c + d).values, 2 * c.values + d.values)
    with pytest.raises(KeyError):
        c[4, 0]


def test_spherical_harmonic_examples():
    d = Direction(0.4, 1.3)
    assert math.isclose(spherical_harmonic(0, 0, d).real, 1 / (2 * math.sqrt(math.pi)))
    assert math.isclose(spherical_harmonic(1, 0, Direction(0, 0)).real, math.sqrt(3 / (4 * math.pi)))
    with pytest.raises(ValueError):
        spherical_harmonic(1, 2, d)


def test_spherical_harmonics_against_scipy():
    rng = np.random.default_rng(5)
    theta = rng.uniform(0, math.pi, 50)
    phi = rng.uniform(0, 2 * math.pi, 50)
    theta[:2] = [0.0, math.pi]
    kmax = 21
    Y = spherical_harmonics(kmax, theta, phi)
    for K, Q in kq_pairs(kmax):
        np.testing.assert_allclose(Y[:, kq_index(K, Q)], sph_harm_y(K, Q, theta, phi), atol=1e-12)


@settings(max_examples=40)
@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi), st.integers(0, 21))
def test_spherical_harmonic_addition_theorem(theta, phi, K):
    Y = spherical_harmonics(K, theta, phi)
    total = np.sum(np.abs(Y[K * K :]) ** 2)
    assert abs(total - (2 * K + 1) / (4 * math.pi)) < 1e-11


def test_spherical_harmonics_orthonormal_on_quadrature():
    theta, phi, w = sphere_quadrature(SpinJ(6), degree=12)
    Y = spherical_harmonics(6, theta, phi)
    gram = np.einsum("n,nk,nl->kl", w, Y.conj(), Y)
    np.testing.assert_allclose(gram, np.eye(49), atol=1e-12)


def test_f_factor_examples():
    for n in (1, 2, 7):
        spin = SpinJ(n)
        assert math.isclose(f_factor(spin, 0, 0), math.sqrt(spin.dim) / (2 * math.sqrt(math.pi)))
    assert math.isclose(f_factor(SpinJ(1), 1, 1), math.sqrt(6) / (2 * math.sqrt(math.pi)))
    assert f_factor(SpinJ(1), 1, 0) < 0
    for K in range(5):
        mags = {round(abs(f_factor(SpinJ(4), K, Q)), 12) for Q in range(-K, K + 1)}
        assert len(mags) == 1
    with pytest.raises(ValueError):
        f_factor(SpinJ(2), 3, 0)


def test_p_function_of_maximally_mixed():
    spin = SpinJ(4)
    p = p_coeffs(rho_to_coeffs(maximally_mixed(spin)))
    assert abs(p[0, 0] - 1 / (2 * math.sqrt(math.pi))) < 1e-12
    for d in [Direction(0, 0), Direction(1.0, 2.0), Direction(math.pi, 5.0)]:
        assert abs(p_eval(p, d) - 1 / (4 * math.pi)) < 1e-12
    where, value = p_min_on_sphere(p)
    assert abs(value - 1 / (4 * math.pi)) < 1e-12


def test_p_coeffs_linear():
    a = rho_to_coeffs(_random_state(5, 0))
    b = rho_to_coeffs(_random_state(5, 1))
    np.testing.assert_allclose(p_coeffs(0.3 * a + 0.7 * b).values, (0.3 * p_coeffs(a) + 0.7 * p_coeffs(b)).values)


def test_p_values_rejects_complex_output():
    vals = np.zeros(4, dtype=complex)
    vals[kq_index(1, 1)] = 1.0
    with pytest.raises(ValueError, match="imaginary"):
        p_values(PFunctionCoeffs(SpinJ(1), vals), np.array([1.0]), np.array([0.5]))


@pytest.mark.parametrize("twice_j", [1, 2, 3, 4, 7, 10, 13])
def test_p_function_reconstructs_state(twice_j):
    spin = SpinJ(twice_j)
    theta, phi, w = sphere_quadrature(spin)
    for i in range(5):
        rho = _random_state(twice_j, i, seed=3)
        p = p_coeffs(rho_to_coeffs(rho))
        assert abs(np.sum(w * p_values(p, theta, phi)) - 1) < 1e-12
        np.testing.assert_allclose(rho_from_p(p), rho, atol=1e-10)


def test_coherent_state_p_function():
    spin = SpinJ(4)
    a0 = Direction(1.0, 0.3)
    p = p_coeffs(rho_to_coeffs(projector(coherent_state(spin, a0))))
    theta, phi, w = sphere_quadrature(spin)
    assert abs(np.sum(w * p_values(p, theta, phi)) - 1) < 1e-12
    # a K <= 2j truncated delta peaks at a0 and goes negative elsewhere
    where, value = p_min_on_sphere(p)
    assert value < 0
    vals = p_values(p, theta, phi)
    assert p_eval(p, a0) > vals.max() - 1e-9


def test_high_harmonics_do_not_change_reconstruction():
    spin = SpinJ(3)
    rho = _random_state(3, 0)
    p = p_coeffs(rho_to_coeffs(rho))
    extra = np.zeros(49, dtype=complex)
    extra[kq_index(4, 0)] = 0.7
    extra[kq_index(5, 2)] = 0.2 + 0.1j
    extra[kq_index(5, -2)] = 0.2 - 0.1j
    extra[kq_index(6, -3)] = -0.4

    def padded(t, f):
        base = p_values(p, t, f)
        Z = p_harmonics(spin, t, f, kmax=6)
        return base + (Z @ extra).real

    # the padded integrand has degree 6 + 2j
    np.testing.assert_allclose(reconstruct_rho(spin, padded, degree=6 + 2 * 3), rho, atol=1e-10)


def test_p_basis_relation_to_standard_harmonics():
    # Z_KQ(theta, phi) = (-1)^(K-Q) conj(Y_KQ(theta, phi))
    theta, phi = np.array([0.3, 2.2]), np.array([1.0, 4.0])
    Z = p_harmonics(SpinJ(5), theta, phi)
    Y = spherical_harmonics(5, theta, phi)
    signs = np.array([(-1) ** ((K - Q) % 2) for K, Q in kq_pairs(5)])
    np.testing.assert_allclose(Z, signs * Y.conj(), atol=1e-13)
