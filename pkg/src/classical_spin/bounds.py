"""Closed-form radii: the coherent-state bound, the separable-ball radius and friends."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spin_core import Direction, SpinJ
from .tensor_rep import TensorCoeffs, coeffs_to_rho, f_factors, p_harmonics


def _bracket(spin: SpinJ) -> Fraction:
    # (4j+1) C(4j, 2j) - (j+1), exact
    n = spin.twice_j
    return (2 * n + 1) * math.comb(2 * n, n) - (spin.j + 1)


def p_tilde_max_exact_square(spin: SpinJ) -> Fraction:
    """(p_tilde_max * pi)^2 as an exact rational: (2j+1)/8 * bracket."""
    return Fraction(spin.dim, 8) * _bracket(spin)


def p_tilde_max(spin: SpinJ) -> float:
    """Uniform bound on |P~| for unit-norm traceless states."""
    return math.sqrt(p_tilde_max_exact_square(spin)) / math.pi


def r_hat_max_exact_inverse_square(spin: SpinJ) -> Fraction:
    return (2 * spin.twice_j + 2) * _bracket(spin)


def r_hat_max(spin: SpinJ) -> float:
    """Radius of the ball around rho0 guaranteed to contain only classical states."""
    return 1.0 / math.sqrt(r_hat_max_exact_inverse_square(spin))


def gurvits_radius(spin: SpinJ) -> float:
    """Largest separable ball 1/sqrt(d(d-1)) for 2j qubits, d = 2^(2j)."""
    if spin.twice_j < 1:
        raise ValueError("radius undefined for j = 0")
    d = 2**spin.twice_j
    return 1.0 / math.sqrt(d * (d - 1))


def verstraete_abs_separable(eigs) -> bool:
    """Absolute separability of a two-qubit spectrum (order of ``eigs`` is irrelevant)."""
    eigs = np.asarray(eigs, dtype=float)
    if eigs.shape != (4,):
        raise ValueError(f"expected four eigenvalues, got {eigs.shape}")
    if (eigs < -1e-12).any():
        raise ValueError("eigenvalues must be non-negative")
    if abs(eigs.sum() - 1) > 1e-9:
        raise ValueError(f"eigenvalues sum to {eigs.sum()}, expected 1")
    l1, l2, l3, l4 = np.sort(eigs)[::-1]
    return bool(math.hypot(l1 - l3, l2 - l4) <= l2 + l4 + 1e-15)


@dataclass(frozen=True)
class BoundRecord:
    spin: SpinJ
    p_tilde_max: float
    r_hat_max: float
    gurvits_radius: float

    @classmethod
    def for_spin(cls, spin: SpinJ) -> "BoundRecord":
        return cls(spin, p_tilde_max(spin), r_hat_max(spin), gurvits_radius(spin))


def saturating_direction(spin: SpinJ, direction: Direction) -> np.ndarray:
    """Traceless unit-norm state direction whose P~ reaches -p_tilde_max at ``direction``.

    Coefficients are proportional to -conj(f_KQ Z_KQ(direction)) with Z the
    P-function harmonic basis; this choice is Hermitian.
    """
    fz = f_factors(spin) * p_harmonics(spin, direction.theta, direction.phi)
    fz[0] = 0.0
    coeffs = -fz.conj() / np.linalg.norm(fz)
    rho = coeffs_to_rho(TensorCoeffs(spin, coeffs))
    return (rho + rho.conj().T) / 2
