"""Irreducible tensor operators, spherical harmonics and P-function coefficients.

Coefficient arrays are flat, with (K, Q) stored at index K*K + K + Q.

Phase conventions
-----------------
``T_KQ`` has elements sqrt((2K+1)/(2j+1)) <j m'; K Q | j m> and
``rho_KQ = tr(rho T_KQ^dagger)``.  With the coherent states of
:func:`classical_spin.spin_core.coherent_states` one finds
``<alpha|T_KQ|alpha> = |f_K|^-1 conj(Y_KQ(theta, phi))``, so the signed factor
``f_KQ`` only reproduces rho when the P-function is expanded in harmonics of the
direction rotated by pi about the x axis,
``Z_KQ(theta, phi) = Y_KQ(pi - theta, -phi) = (-1)^(K-Q) conj(Y_KQ(theta, phi))``.
:func:`p_harmonics` returns these functions and every P-function evaluation goes
through it.  The quadrature reconstruction tests pin the whole chain down.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .spin_core import (
    Direction,
    SpinJ,
    coherent_states,
    sphere_quadrature,
    spin_of,
)

HERMITICITY_TOL = 1e-10
IMAG_TOL = 1e-10


def kq_index(K: int, Q: int) -> int:
    return K * K + K + Q


def kq_pairs(kmax: int):
    """All (K, Q) with K <= kmax in storage order."""
    return [(K, Q) for K in range(kmax + 1) for Q in range(-K, K + 1)]


# -- Clebsch-Gordan ------------------------------------------------------------


def _twice(x) -> int:
    t = Fraction(x) * 2
    if t.denominator != 1:
        raise ValueError(f"{x!r} is not a half-integer")
    return int(t)


def _fact(n2: int) -> int:
    # factorial of n2/2 where n2 is an even non-negative integer
    return math.factorial(n2 // 2)


def clebsch_gordan_exact(j1, m1, j2, m2, J, M) -> tuple[int, Fraction]:
    """Clebsch-Gordan coefficient as ``(sign, square)`` with ``square`` an exact rational.

    Uses the Racah closed form with integer factorials only, so there is no
    cancellation error for large angular momenta.
    """
    a, am, b, bm, c, cm = (_twice(v) for v in (j1, m1, j2, m2, J, M))
    for jj, mm in ((a, am), (b, bm), (c, cm)):
        if jj < 0:
            raise ValueError("angular momenta must be non-negative")
        if abs(mm) > jj or (jj - mm) % 2:
            raise ValueError(f"inadmissible projection m={mm / 2} for j={jj / 2}")
    if (a + b + c) % 2:
        raise ValueError(f"j1 + j2 + J = {(a + b + c) / 2} is not an integer")
    if cm != am + bm or c > a + b or c < abs(a - b):
        return 0, Fraction(0)

    prefactor = Fraction(
        (c + 1) * _fact(c + a - b) * _fact(c - a + b) * _fact(a + b - c),
        _fact(a + b + c + 2),
    )
    prefactor *= (
        _fact(c + cm) * _fact(c - cm) * _fact(a - am) * _fact(a + am) * _fact(b - bm) * _fact(b + bm)
    )
    # summation bounds in units of 1 (all arguments below are even in twice-units)
    args_hi = ((a + b - c) // 2, (a - am) // 2, (b + bm) // 2)
    args_lo = ((c - b + am) // 2, (c - a - bm) // 2)
    k_min = max(0, -args_lo[0], -args_lo[1])
    k_max = min(args_hi)
    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        den = (
            math.factorial(k)
            * math.factorial(args_hi[0] - k)
            * math.factorial(args_hi[1] - k)
            * math.factorial(args_hi[2] - k)
            * math.factorial(args_lo[0] + k)
            * math.factorial(args_lo[1] + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    sign = 1 if total > 0 else -1
    return sign, total * total * prefactor


@lru_cache(maxsize=None)
def _cg_cached(a, am, b, bm, c, cm) -> float:
    sign, sq = clebsch_gordan_exact(
        Fraction(a, 2), Fraction(am, 2), Fraction(b, 2), Fraction(bm, 2), Fraction(c, 2), Fraction(cm, 2)
    )
    return sign * math.sqrt(sq)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> as a float (exact arithmetic internally)."""
    return _cg_cached(*(_twice(v) for v in (j1, m1, j2, m2, J, M)))


# -- tensor operators ------------------------------------------------------------


@lru_cache(maxsize=None)
def tensor_basis(spin: SpinJ) -> np.ndarray:
    """All T_KQ for K <= 2j as a read-only array of shape ((2j+1)^2, d, d)."""
    n = spin.twice_j
    d = spin.dim
    out = np.zeros(((n + 1) ** 2, d, d))
    twice_m = n - 2 * np.arange(d)
    for K in range(n + 1):
        scale = math.sqrt((2 * K + 1) / (n + 1))
        for Q in range(-K, K + 1):
            T = out[kq_index(K, Q)]
            for col, mp in enumerate(twice_m):
                row_m = mp + 2 * Q
                if abs(row_m) > n:
                    continue
                row = (n - row_m) // 2
                T[row, col] = scale * _cg_cached(n, int(mp), 2 * K, 2 * Q, n, int(row_m))
    out.flags.writeable = False
    return out


def tensor_operator(spin: SpinJ, K: int, Q: int) -> np.ndarray:
    if not (0 <= K <= spin.twice_j and abs(Q) <= K):
        raise ValueError(f"(K, Q) = ({K}, {Q}) out of range for {spin}")
    return tensor_basis(spin)[kq_index(K, Q)].copy()


# -- coefficient containers ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _HarmonicCoeffs:
    spin: SpinJ
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != ((self.spin.twice_j + 1) ** 2,):
            raise ValueError(f"expected {(self.spin.twice_j + 1) ** 2} coefficients, got {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __getitem__(self, kq) -> complex:
        K, Q = kq
        if not (0 <= K <= self.spin.twice_j and abs(Q) <= K):
            raise KeyError(kq)
        return complex(self.values[kq_index(K, Q)])

    def hermiticity_defect(self) -> float:
        """max |c(K,-Q) - (-1)^Q conj(c(K,Q))|; zero for coefficients of a Hermitian matrix."""
        pairs = kq_pairs(self.spin.twice_j)
        mirror = np.array([kq_index(K, -Q) for K, Q in pairs])
        signs = np.array([(-1) ** (Q % 2) for _, Q in pairs])
        return float(np.abs(self.values[mirror] - signs * self.values.conj()).max())

    def to_json(self) -> str:
        items = [
            {"K": K, "Q": Q, "re": float(v.real), "im": float(v.imag)}
            for (K, Q), v in zip(kq_pairs(self.spin.twice_j), self.values)
        ]
        return json.dumps({"twice_j": self.spin.twice_j, "coeffs": items})

    @classmethod
    def from_json(cls, text: str):
        data = json.loads(text)
        spin = SpinJ(data["twice_j"])
        values = np.zeros((spin.twice_j + 1) ** 2, dtype=complex)
        for item in data["coeffs"]:
            values[kq_index(item["K"], item["Q"])] = item["re"] + 1j * item["im"]
        return cls(spin, values)

    def __add__(self, other):
        if type(other) is not type(self) or other.spin != self.spin:
            return NotImplemented
        return type(self)(self.spin, self.values + other.values)

    def __mul__(self, scalar):
        return type(self)(self.spin, self.values * scalar)

    __rmul__ = __mul__


class TensorCoeffs(_HarmonicCoeffs):
    """Expansion coefficients rho_KQ of an operator in the T_KQ basis."""


class PFunctionCoeffs(_HarmonicCoeffs):
    """Coefficients P_KQ of a P-function truncated at K <= 2j."""


def rho_to_coeffs(rho) -> TensorCoeffs:
    rho = np.asarray(rho, dtype=complex)
    spin = spin_of(rho)
    # T is real, so tr(rho T^dagger) = sum_ab rho_ab T_ab
    return TensorCoeffs(spin, np.einsum("kab,ab->k", tensor_basis(spin), rho))


def coeffs_to_rho(c: TensorCoeffs) -> np.ndarray:
    defect = c.hermiticity_defect()
    if defect > HERMITICITY_TOL:
        raise ValueError(f"coefficients do not describe a Hermitian operator (defect {defect:.3e})")
    return np.einsum("k,kab->ab", c.values, tensor_basis(c.spin))


# -- spherical harmonics -------------------------------------------------------


def spherical_harmonics(kmax: int, theta, phi) -> np.ndarray:
    """Orthonormal Y_KQ (Condon-Shortley phase) for all K <= kmax.

    Returns an array of shape ``theta.shape + ((kmax+1)^2,)``.  Uses the
    three-term recurrence on fully normalized associated Legendre functions.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), theta.shape)
    x = np.cos(theta)
    s = np.sin(theta)
    out = np.empty(theta.shape + ((kmax + 1) ** 2,), dtype=complex)

    pmm = np.full(theta.shape, 1 / math.sqrt(4 * math.pi))
    for m in range(kmax + 1):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2 * m)) * s * pmm
        eimp = np.exp(1j * m * phi)
        sign = -1 if m % 2 else 1
        prev2 = None
        prev1 = pmm
        for l in range(m, kmax + 1):
            if l == m:
                cur = pmm
            elif l == m + 1:
                cur = math.sqrt(2 * m + 3) * x * pmm
            else:
                a_l = math.sqrt((4 * l * l - 1) / (l * l - m * m))
                a_prev = math.sqrt((4 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - m * m))
                cur = a_l * (x * prev1 - prev2 / a_prev)
            if l > m:
                prev2, prev1 = prev1, cur
            y = cur * eimp
            out[..., kq_index(l, m)] = y
            if m > 0:
                out[..., kq_index(l, -m)] = sign * y.conj()
    return out


def spherical_harmonic(K: int, Q: int, direction: Direction) -> complex:
    if K < 0 or abs(Q) > K:
        raise ValueError(f"invalid harmonic indices ({K}, {Q})")
    return complex(spherical_harmonics(K, direction.theta, direction.phi)[kq_index(K, Q)])


def p_harmonics(spin: SpinJ, theta, phi, kmax: int | None = None) -> np.ndarray:
    """Harmonic basis in which P-functions are expanded (see module docstring)."""
    if kmax is None:
        kmax = spin.twice_j
    return spherical_harmonics(kmax, np.pi - np.asarray(theta, dtype=float), -np.asarray(phi, dtype=float))


# -- P-function ----------------------------------------------------------------


def f_factor(spin: SpinJ, K: int, Q: int) -> float:
    """Factor f_KQ with P_KQ = f_KQ rho_KQ."""
    n = spin.twice_j
    if not (0 <= K <= n and abs(Q) <= K):
        raise ValueError(f"(K, Q) = ({K}, {Q}) out of range for {spin}")
    sign = -1 if (K - Q) % 2 else 1
    num = math.sqrt(math.factorial(n - K) * math.factorial(n + K + 1))
    return sign * num / (2 * math.sqrt(math.pi) * math.factorial(n))


@lru_cache(maxsize=None)
def f_factors(spin: SpinJ) -> np.ndarray:
    out = np.array([f_factor(spin, K, Q) for K, Q in kq_pairs(spin.twice_j)])
    out.flags.writeable = False
    return out


def p_coeffs(c: TensorCoeffs) -> PFunctionCoeffs:
    return PFunctionCoeffs(c.spin, c.values * f_factors(c.spin))


def p_values(p: PFunctionCoeffs, theta, phi) -> np.ndarray:
    """Vectorized P-function evaluation; raises if the imaginary residue is not roundoff."""
    vals = p_harmonics(p.spin, theta, phi) @ p.values
    scale = 1.0 + float(np.abs(p.values).sum())
    resid = float(np.abs(vals.imag).max()) if vals.size else 0.0
    if resid > IMAG_TOL * scale:
        raise ValueError(f"P-function has imaginary part {resid:.3e}; coefficients are not Hermitian")
    return vals.real


def p_eval(p: PFunctionCoeffs, direction: Direction) -> float:
    return float(p_values(p, direction.theta, direction.phi))


def _search_grid(n_points: int):
    n_theta = max(8, math.ceil(math.sqrt(n_points / 2)))
    n_phi = 2 * n_theta
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    theta = np.concatenate([T.ravel(), [0.0, np.pi]])
    phi = np.concatenate([P.ravel(), [0.0, 0.0]])
    return theta, phi


def minimize_on_sphere(func, kmax: int, grid_density: int = 40, n_starts: int = 4, steps: int = 20):
    """Global minimum of a band-limited function ``func(theta, phi)`` on the sphere.

    Dense grid with at least ``grid_density * kmax**2`` points, followed by
    ``steps`` local descent iterations from the best ``n_starts`` nodes.
    """
    theta, phi = _search_grid(grid_density * max(kmax, 1) ** 2)
    vals = func(theta, phi)
    order = np.argsort(vals)
    best_t, best_p, best_v = theta[order[0]], phi[order[0]], float(vals[order[0]])
    for idx in order[:n_starts]:
        res = minimize(
            lambda x: float(func(np.array([x[0]]), np.array([x[1]]))[0]),
            x0=[theta[idx], phi[idx]],
            method="L-BFGS-B",
            options={"maxiter": steps},
        )
        if res.fun < best_v:
            best_t, best_p, best_v = res.x[0], res.x[1], float(res.fun)
    # geometric canonicalization of an unconstrained (theta, phi) pair
    n = np.array([np.sin(best_t) * np.cos(best_p), np.sin(best_t) * np.sin(best_p), np.cos(best_t)])
    return Direction.from_vector(n), best_v


def p_min_on_sphere(p: PFunctionCoeffs, grid_density: int = 40):
    """Minimum of the truncated P-function over the sphere as ``(Direction, value)``."""
    return minimize_on_sphere(lambda t, f: p_values(p, t, f), p.spin.twice_j, grid_density)


def reconstruct_rho(spin: SpinJ, p_func, degree: int | None = None) -> np.ndarray:
    """Quadrature of ``p_func(theta, phi) |alpha><alpha|`` over the sphere (solid-angle measure).

    ``degree`` must cover the harmonic content of ``p_func`` plus 2j.
    """
    if degree is None:
        degree = 2 * spin.twice_j + 1
    theta, phi, w = sphere_quadrature(spin, degree)
    vecs = coherent_states(spin, theta, phi)
    weights = w * np.asarray(p_func(theta, phi))
    return np.einsum("n,na,nb->ab", weights, vecs, vecs.conj())


def rho_from_p(p: PFunctionCoeffs) -> np.ndarray:
    return reconstruct_rho(p.spin, lambda t, f: p_values(p, t, f))
