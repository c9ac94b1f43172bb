"""Seeded Hilbert-Schmidt sampling and the interpolation family towards rho0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin_core import SpinJ, frobenius_distance, maximally_mixed, spin_of

GENERATOR_VERSION = f"numpy-{np.__version__}/PCG64/SeedSequence(seed, spawn_key=(stream_index,))"

# stream index reserved for dictionary draws; state samples use 0, 1, 2, ...
DICTIONARY_STREAM = 2**32


@dataclass(frozen=True)
class RandomStream:
    """Independent, reproducible random stream identified by ``(seed, stream_index)``."""

    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(seq))


def _as_generator(stream) -> np.random.Generator:
    if isinstance(stream, RandomStream):
        return stream.generator()
    return np.random.default_rng(stream)


def hs_random_state(spin: SpinJ, stream) -> np.ndarray:
    """Density matrix AA^dagger / tr(AA^dagger) with A a square complex Ginibre matrix."""
    rng = _as_generator(stream)
    d = spin.dim
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = a @ a.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


@dataclass(frozen=True)
class DirectionState:
    rho_tilde: np.ndarray
    r: float

    def state(self) -> np.ndarray:
        return maximally_mixed(spin_of(self.rho_tilde)) + self.r * self.rho_tilde


def direction_of(rho) -> DirectionState:
    """Split ``rho = rho0 + r * rho_tilde`` with rho_tilde traceless and of unit norm."""
    rho = np.asarray(rho, dtype=complex)
    rho0 = maximally_mixed(spin_of(rho))
    r = frobenius_distance(rho, rho0)
    if r < 1e-12:
        raise ValueError("state coincides with the maximally mixed state; direction undefined")
    return DirectionState((rho - rho0) / r, r)


def interpolate(rho, k: float) -> np.ndarray:
    """(1 - k) rho0 + k rho for k in [0, 1]."""
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"k={k} outside [0, 1]")
    rho = np.asarray(rho, dtype=complex)
    rho0 = maximally_mixed(spin_of(rho))
    return (1 - k) * rho0 + k * rho
