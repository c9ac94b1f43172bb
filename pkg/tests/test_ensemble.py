import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import ks_2samp, unitary_group

from classical_spin.ensemble import (
    DICTIONARY_STREAM,
    RandomStream,
    direction_of,
    hs_random_state,
    interpolate,
)
from classical_spin.spin_core import SpinJ, frobenius_distance, maximally_mixed, validate_density_matrix


def _reference_hs(d, rng):
    # independent sampler: eigenvalues of a complex Wishart matrix with d degrees of freedom
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    w = z.conj().T @ z
    return w / np.trace(w).real


def test_reproducible_streams():
    spin = SpinJ(5)
    a = hs_random_state(spin, RandomStream(7, 3))
    b = hs_random_state(spin, RandomStream(7, 3))
    np.testing.assert_array_equal(a, b)
    c = hs_random_state(spin, RandomStream(7, 4))
    d = hs_random_state(spin, RandomStream(8, 3))
    assert not np.allclose(a, c) and not np.allclose(a, d)
    assert RandomStream(7, DICTIONARY_STREAM).generator().random() != RandomStream(7, 0).generator().random()


@given(st.integers(1, 12), st.integers(0, 2**63 - 1), st.integers(0, 10**6))
def test_draws_are_density_matrices(twice_j, seed, index):
    rho = hs_random_state(SpinJ(twice_j), RandomStream(seed, index))
    validate_density_matrix(rho)


def test_mean_is_maximally_mixed():
    spin = SpinJ(2)
    n = 10_000
    draws = np.array([hs_random_state(spin, RandomStream(1, i)) for i in range(n)])
    mean = draws.mean(axis=0)
    sigma = draws.std(axis=0) / math.sqrt(n)
    assert (np.abs(mean - maximally_mixed(spin)) < 3 * sigma + 1e-15).all()


def test_mean_purity_against_reference_sampler():
    n = 20_000
    ours = [np.trace(r @ r).real for r in (hs_random_state(SpinJ(1), RandomStream(2, i)) for i in range(n))]
    rng = np.random.default_rng(123)
    ref = [np.trace(r @ r).real for r in (_reference_hs(2, rng) for _ in range(n))]
    err = 3 * (np.std(ours) + np.std(ref)) / math.sqrt(n)
    assert abs(np.mean(ours) - np.mean(ref)) < err
    # frozen reference-sampler value of the qubit mean purity
    assert abs(np.mean(ref) - 0.8) < 0.005


def test_spectrum_matches_reference_sampler():
    n = 4000
    ours = np.concatenate([np.linalg.eigvalsh(hs_random_state(SpinJ(3), RandomStream(3, i))) for i in range(n)])
    rng = np.random.default_rng(321)
    ref = np.concatenate([np.linalg.eigvalsh(_reference_hs(4, rng)) for _ in range(n)])
    assert ks_2samp(ours, ref).pvalue > 1e-3


def test_unitary_invariance_of_ensemble():
    spin = SpinJ(2)
    U = unitary_group.rvs(3, random_state=5)
    n = 3000
    draws = [hs_random_state(spin, RandomStream(4, i)) for i in range(n)]
    a = [r[0, 0].real for r in draws]
    b = [(U @ r @ U.conj().T)[0, 0].real for r in draws]
    other = [hs_random_state(spin, RandomStream(6, i))[0, 0].real for i in range(n)]
    assert ks_2samp(b, other).pvalue > 1e-3
    assert ks_2samp(a, other).pvalue > 1e-3


def test_direction_of():
    rho = np.diag([1.0, 0.0])
    ds = direction_of(rho)
    np.testing.assert_allclose(ds.rho_tilde, np.diag([1, -1]) / math.sqrt(2), atol=1e-15)
    assert math.isclose(ds.r, 1 / math.sqrt(2))
    with pytest.raises(ValueError):
        direction_of(maximally_mixed(SpinJ(3)))


@given(st.integers(1, 10), st.integers(0, 1000))
def test_direction_round_trip(twice_j, index):
    rho = hs_random_state(SpinJ(twice_j), RandomStream(0, index))
    ds = direction_of(rho)
    assert abs(np.trace(ds.rho_tilde)) < 1e-12
    assert abs(np.linalg.norm(ds.rho_tilde) - 1) < 1e-12
    np.testing.assert_allclose(ds.state(), rho, atol=1e-12)


@given(st.integers(1, 10), st.integers(0, 1000), st.floats(0, 1))
def test_interpolate(twice_j, index, k):
    spin = SpinJ(twice_j)
    rho = hs_random_state(spin, RandomStream(0, index))
    rk = interpolate(rho, k)
    validate_density_matrix(rk)
    rho0 = maximally_mixed(spin)
    assert abs(frobenius_distance(rk, rho0) - k * frobenius_distance(rho, rho0)) < 1e-12


def test_interpolate_endpoints_and_errors():
    rho = hs_random_state(SpinJ(2), RandomStream(0))
    np.testing.assert_allclose(interpolate(rho, 0), maximally_mixed(SpinJ(2)))
    np.testing.assert_allclose(interpolate(rho, 1), rho)
    with pytest.raises(ValueError):
        interpolate(rho, 1.5)
    with pytest.raises(ValueError):
        interpolate(rho, -0.1)
