"""Spin labels, coherent states and elementary density-matrix operations.

All matrices use the basis order m = j, j-1, ..., -j.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
NORM_TOL = 1e-12


class StateValidationError(ValueError):
    """Raised when a matrix or vector violates a state invariant."""


@dataclass(frozen=True, order=True)
class SpinJ:
    """Spin quantum number stored as the integer ``twice_j`` = 2j."""

    twice_j: int

    def __post_init__(self):
        if isinstance(self.twice_j, bool) or not isinstance(self.twice_j, (int, np.integer)):
            raise TypeError(f"twice_j must be an integer, got {self.twice_j!r}")
        if self.twice_j < 1:
            raise ValueError(f"twice_j must be >= 1, got {self.twice_j}")
        object.__setattr__(self, "twice_j", int(self.twice_j))

    @classmethod
    def from_j(cls, j) -> "SpinJ":
        twice = Fraction(j) * 2
        if twice.denominator != 1:
            raise ValueError(f"j={j} is not a half-integer")
        return cls(int(twice))

    @property
    def j(self) -> Fraction:
        return Fraction(self.twice_j, 2)

    @property
    def dim(self) -> int:
        return self.twice_j + 1

    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order j, j-1, ..., -j."""
        return (self.twice_j - 2 * np.arange(self.dim)) / 2

    def __str__(self):
        return f"j={self.j}"


@dataclass(frozen=True)
class Direction:
    """Point on the unit sphere; angles are canonicalized on construction."""

    theta: float
    phi: float

    def __post_init__(self):
        theta = min(max(float(self.theta), 0.0), math.pi)
        phi = float(self.phi) % (2 * math.pi)
        if phi == 2 * math.pi:  # -tiny % 2pi rounds up
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_vector(cls, n) -> "Direction":
        x, y, z = np.asarray(n, dtype=float) / np.linalg.norm(n)
        return cls(math.acos(min(max(z, -1.0), 1.0)), math.atan2(y, x))

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


@lru_cache(maxsize=None)
def _sqrt_binomials(twice_j: int) -> np.ndarray:
    # entry a corresponds to m = j - a, i.e. j + m = 2j - a
    return np.sqrt([float(math.comb(twice_j, twice_j - a)) for a in range(twice_j + 1)])


def coherent_states(spin: SpinJ, theta, phi) -> np.ndarray:
    """Vectorized coherent states; returns an array of shape ``theta.shape + (2j+1,)``.

    The amplitude on |j,m> is
    sqrt(C(2j, j+m)) cos(theta/2)^(j+m) (sin(theta/2) exp(-i phi))^(j-m).
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = spin.twice_j
    up = np.arange(n, -1, -1)  # j + m
    down = n - up  # j - m
    c = np.cos(theta / 2)[..., None]
    s = (np.sin(theta / 2) * np.exp(-1j * phi))[..., None]
    return _sqrt_binomials(n) * c**up * s**down


def coherent_state(spin: SpinJ, direction: Direction) -> np.ndarray:
    return coherent_states(spin, direction.theta, direction.phi)


def projector(psi) -> np.ndarray:
    """Rank-1 projector |psi><psi| of a unit-norm state vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise StateValidationError("state vector must be one-dimensional")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise StateValidationError(f"state vector is not normalized (norm={norm!r})")
    return np.outer(psi, psi.conj())


def maximally_mixed(spin: SpinJ) -> np.ndarray:
    return np.eye(spin.dim, dtype=complex) / spin.dim


def frobenius_distance(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def spin_of(rho) -> SpinJ:
    """Spin label matching the dimension of a square matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateValidationError(f"expected a square matrix, got shape {rho.shape}")
    if rho.shape[0] < 2:
        raise StateValidationError("dimension must be at least 2")
    return SpinJ(rho.shape[0] - 1)


def validate_density_matrix(rho, *, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; return ``rho`` as a complex array.

    Error messages name the first offending (row, column) for Hermiticity failures.
    """
    rho = np.asarray(rho, dtype=complex)
    spin_of(rho)
    dev = np.abs(rho - rho.conj().T)
    if dev.max() > HERMITIAN_TOL:
        r, c = np.unravel_index(int(dev.argmax()), dev.shape)
        raise StateValidationError(
            f"matrix is not Hermitian: entries ({r},{c}) and ({c},{r}) differ by {dev[r, c]:.3e}"
        )
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise StateValidationError(f"trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < psd_tol:
        raise StateValidationError(f"matrix is not positive semidefinite (min eigenvalue {lo:.3e})")
    return rho


def sphere_quadrature(spin: SpinJ, degree: int | None = None):
    """Product Gauss-Legendre x equispaced-phi rule on the unit sphere.

    Exact for spherical harmonics up to ``degree`` (default 4j+1, enough for
    products of two degree-2j functions). Returns ``(theta, phi, weights)``
    flattened, with weights summing to 4 pi.
    """
    if degree is None:
        degree = 2 * spin.twice_j + 1
    n_theta = degree // 2 + 2  # one node beyond the exactness minimum
    n_phi = degree + 1
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    theta = np.arccos(x)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(n_phi, 2 * np.pi / n_phi))
    return T.ravel(), P.ravel(), W.ravel()


def read_density_matrix(path) -> np.ndarray:
    """Load a density matrix from the JSON format ``{"twice_j", "re", "im"}``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StateValidationError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("twice_j", "re", "im"):
        if key not in data:
            raise StateValidationError(f"{path}: missing key {key!r}")
    try:
        spin = SpinJ(data["twice_j"])
    except (TypeError, ValueError) as exc:
        raise StateValidationError(f"{path}: bad twice_j ({exc})") from exc
    d = spin.dim
    parts = []
    for key in ("re", "im"):
        rows = data[key]
        if not isinstance(rows, list) or len(rows) != d:
            raise StateValidationError(f"{path}: {key!r} must have {d} rows")
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                raise StateValidationError(f"{path}: {key!r} row {r} must have {d} columns")
            for c, val in enumerate(row):
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise StateValidationError(f"{path}: {key!r}[{r}][{c}] is not a number: {val!r}")
        parts.append(np.array(rows, dtype=float))
    rho = parts[0] + 1j * parts[1]
    try:
        return validate_density_matrix(rho)
    except StateValidationError as exc:
        raise StateValidationError(f"{path}: {exc}") from exc


def write_density_matrix(rho, path) -> None:
    rho = np.asarray(rho, dtype=complex)
    spin = spin_of(rho)
    payload = {"twice_j": spin.twice_j, "re": rho.real.tolist(), "im": rho.imag.tolist()}
    Path(path).write_text(json.dumps(payload, indent=1))


def spin_matrices(spin: SpinJ):
    """(Jx, Jy, Jz) in the basis m = j, ..., -j."""
    m = spin.m_values()
    j = float(spin.j)
    # <m+1| J+ |m> = sqrt(j(j+1) - m(m+1)); row index of m+1 is one above m
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    jm = jp.conj().T
    return (jp + jm) / 2, (jp - jm) / 2j, np.diag(m).astype(complex)
