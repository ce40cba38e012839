"""Kinematics of the quantized torus.

A large particle lives on a position lattice of N sites Q_j = j/N; each of
the I small particles lives on n sites q = j/n + s_i/N, a shifted sublattice
of the large particle's lattice (N = p*n with integer p, 0 <= s_i <= p-1).
States are complex amplitude arrays over the multi-index (j0, j1, ..., jI),
row-major with the large particle leading, and switch between position and
momentum representations through unitary DFTs per axis.

Conventions (L = T = h = 1):
  forward  (position -> momentum): c_k = (1/sqrt(d)) sum_j psi_j e^{+2i pi k j/d}
  inverse  (momentum -> position): psi_j = (1/sqrt(d)) sum_k c_k e^{-2i pi k j/d}
which are numpy's ifft/fft with norm="ortho".
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_R = 16
DEFAULT_K_CELLS = 4
DEFAULT_J_MAX = 6


def _is_power_of_two(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


@dataclass(frozen=True)
class SystemConfig:
    """All physical/numerical parameters of one multi-particle cat system.

    N        large-particle Hilbert dimension (= mass in units of h)
    n        small-particle Hilbert dimension
    I        number of small particles (0 = single-particle cat)
    shifts   lattice shift s_i per small particle, 0 <= s_i <= N/n - 1;
             default s_i = i mod (N/n)
    V        total scattering phase accumulated per period at a coincidence
    R        Trotter substeps per period
    K_cells  partition cardinality (cells in Q of the large particle)
    J_max    maximum history word length
    """

    N: int
    n: int = 2
    I: int = 0
    shifts: tuple[int, ...] | None = None
    V: float = 0.0
    R: int = DEFAULT_R
    K_cells: int = DEFAULT_K_CELLS
    J_max: int = DEFAULT_J_MAX

    def __post_init__(self):
        if not isinstance(self.N, int) or not _is_power_of_two(self.N):
            raise ConfigError(f"N must be a power of two, got {self.N!r}")
        if not isinstance(self.n, int) or not _is_power_of_two(self.n):
            raise ConfigError(f"n must be a power of two, got {self.n!r}")
        if self.N % self.n != 0:
            raise ConfigError(f"n must divide N, got N={self.N}, n={self.n}")
        if not isinstance(self.I, int) or self.I < 0:
            raise ConfigError(f"I must be a non-negative integer, got {self.I!r}")
        p = self.N // self.n
        if self.shifts is None:
            object.__setattr__(self, "shifts", tuple(i % p for i in range(self.I)))
        else:
            object.__setattr__(self, "shifts", tuple(int(s) for s in self.shifts))
        if len(self.shifts) != self.I:
            raise ConfigError(
                f"shifts must have one entry per small particle: "
                f"len(shifts)={len(self.shifts)}, I={self.I}"
            )
        for i, s in enumerate(self.shifts):
            if not 0 <= s <= p - 1:
                raise ConfigError(
                    f"shift s_{i + 1}={s} out of range [0, {p - 1}] (N/n - 1)"
                )
        if self.K_cells < 1 or self.N % self.K_cells != 0:
            raise ConfigError(
                f"K_cells must divide N, got K_cells={self.K_cells}, N={self.N}"
            )
        if not isinstance(self.R, int) or self.R < 1:
            raise ConfigError(f"R must be an integer >= 1, got {self.R!r}")
        if self.J_max < 1:
            raise ConfigError(f"J_max must be >= 1, got {self.J_max!r}")

    @property
    def p(self) -> int:
        return self.N // self.n

    @property
    def dim(self) -> int:
        """Total Hilbert dimension N * n^I."""
        return self.N * self.n**self.I

    @property
    def axis_dims(self) -> tuple[int, ...]:
        return (self.N,) + (self.n,) * self.I

    def hash(self) -> str:
        """Deterministic hash of the physical parameters (J_max excluded)."""
        payload = json.dumps(
            {
                "N": self.N,
                "n": self.n,
                "I": self.I,
                "shifts": list(self.shifts),
                "V": self.V,
                "R": self.R,
                "K_cells": self.K_cells,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass
class LatticeSpec:
    """Position/momentum lattices of one configuration."""

    big_positions: np.ndarray            # Q_j = j/N
    small_positions: list[np.ndarray]    # per particle: j/n + s_i/N
    big_momenta: np.ndarray              # integer labels 0..N-1
    small_momenta: np.ndarray            # integer labels 0..n-1


def build_lattice(config: SystemConfig) -> LatticeSpec:
    """Build the shifted position lattices; every small-particle point lies
    on the large-particle lattice {j/N}."""
    N, n = config.N, config.n
    big = np.arange(N) / N
    small = [
        np.arange(n) / n + s / N for s in config.shifts
    ]
    return LatticeSpec(
        big_positions=big,
        small_positions=small,
        big_momenta=np.arange(N),
        small_momenta=np.arange(n),
    )


POSITION = "position"
MOMENTUM = "momentum"


@dataclass
class StateVector:
    """Wavefunction amplitudes over the multi-particle lattice.

    `amplitudes` is a flat complex array of length N*n^I laid out row-major
    over (j0, j1, ..., jI) with the large particle leading.
    """

    amplitudes: np.ndarray
    representation: str = POSITION
    axis_dims: tuple[int, ...] = field(default=None)  # inferred when omitted

    def __post_init__(self):
        arr = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.axis_dims is None:
            self.axis_dims = arr.shape if arr.ndim > 1 else (arr.size,)
        self.axis_dims = tuple(int(d) for d in self.axis_dims)
        if arr.size != int(np.prod(self.axis_dims)):
            raise ValueError(
                f"amplitude count {arr.size} does not match axes {self.axis_dims}"
            )
        self.amplitudes = arr.reshape(-1)
        if self.representation not in (POSITION, MOMENTUM):
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def shaped(self) -> np.ndarray:
        return self.amplitudes.reshape(self.axis_dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def multi_index(flat: int, config: SystemConfig) -> tuple[int, ...]:
    """Flat row-major index -> (j0, j1, ..., jI)."""
    if not 0 <= flat < config.dim:
        raise IndexError(f"flat index {flat} out of range [0, {config.dim})")
    idx = []
    for d in reversed(config.axis_dims):
        idx.append(flat % d)
        flat //= d
    return tuple(reversed(idx))


def flat_index(indices, config: SystemConfig) -> int:
    """(j0, j1, ..., jI) -> flat row-major index."""
    dims = config.axis_dims
    if len(indices) != len(dims):
        raise IndexError(f"expected {len(dims)} indices, got {len(indices)}")
    flat = 0
    for j, d in zip(indices, dims):
        if not 0 <= j < d:
            raise IndexError(f"index {j} out of range [0, {d})")
        flat = flat * d + j
    return flat


def _axis_dft_raw(arr: np.ndarray, axis: int, direction: str) -> np.ndarray:
    # forward = position -> momentum = kernel e^{+2 pi i kj/d}/sqrt(d) = ifft(ortho)
    if direction == "forward":
        return np.fft.ifft(arr, axis=axis, norm="ortho")
    if direction == "inverse":
        return np.fft.fft(arr, axis=axis, norm="ortho")
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def axis_dft(state: StateVector, axis: int, direction: str) -> StateVector:
    """Unitary DFT of one particle axis.

    Forward takes a position-representation state to momentum on that axis
    (and vice versa); the returned tag is flipped, so for multi-particle
    states prefer to_momentum/to_position which transform all axes at once.
    """
    if not 0 <= axis < len(state.axis_dims):
        raise IndexError(f"axis {axis} out of range for {state.axis_dims}")
    expected = POSITION if direction == "forward" else MOMENTUM
    if state.representation != expected:
        raise ValueError(
            f"{direction} transform expects a {expected} state, "
            f"got {state.representation}"
        )
    out = _axis_dft_raw(state.shaped, axis, direction)
    tag = MOMENTUM if direction == "forward" else POSITION
    return StateVector(out, tag, state.axis_dims)


def to_momentum(state: StateVector) -> StateVector:
    """Full position -> momentum transform (all particle axes)."""
    if state.representation != POSITION:
        raise ValueError("to_momentum expects a position-representation state")
    out = np.fft.ifftn(state.shaped, norm="ortho")
    return StateVector(out, MOMENTUM, state.axis_dims)


def to_position(state: StateVector) -> StateVector:
    """Full momentum -> position transform (all particle axes)."""
    if state.representation != MOMENTUM:
        raise ValueError("to_position expects a momentum-representation state")
    out = np.fft.fftn(state.shaped, norm="ortho")
    return StateVector(out, POSITION, state.axis_dims)


def random_state(config: SystemConfig, rng: np.random.Generator) -> StateVector:
    """Normalized Haar-ish random position-representation state."""
    z = rng.standard_normal(config.dim) + 1j * rng.standard_normal(config.dim)
    z /= np.linalg.norm(z)
    return StateVector(z, POSITION, config.axis_dims)
