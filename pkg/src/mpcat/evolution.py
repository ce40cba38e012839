"""Propagators for the single- and multi-particle cat dynamics.

One kick period is driven by three diagonal factors:

  free phases   e^{-i pi k^2 / d}   (momentum representation, d = N or n)
  kick phases   e^{+i pi j^2 / N}   (position, large particle only)
  scattering    e^{-i V c / R}      (position; c counts small particles
                                     coinciding with the large one)

The single-particle period operator is exact: transform to momentum, apply
the free phases, transform back, apply the kick.  With small particles the
free and scattering terms do not commute, so the period operator is split
into R Trotter substeps (free^(1/R) then scatter^(1/R)) followed by the kick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, NumericError
from .kinematics import (
    MOMENTUM,
    POSITION,
    StateVector,
    SystemConfig,
    to_momentum,
    to_position,
)

# Default ceiling on dense materialization (dim x dim complex128).
DEFAULT_DENSE_DIM = 1024


def free_phase(d: int, k) -> np.ndarray:
    """Free-evolution phase e^{-i pi k^2 / d} for momentum label k.

    d must be even: evenness makes the phase consistent with the
    periodic identification c_k = c_{k+d}.
    """
    if d % 2 != 0:
        raise ValueError(f"free phase requires even dimension, got d={d}")
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k >= d):
        raise ValueError(f"momentum label out of range [0, {d})")
    return np.exp(-1j * np.pi * k.astype(np.float64) ** 2 / d)


def kick_phase(N: int, j) -> np.ndarray:
    """Kick phase e^{+i pi j^2 / N} for position label j."""
    j = np.asarray(j)
    return np.exp(1j * np.pi * j.astype(np.float64) ** 2 / N)


def scattering_counts(config: SystemConfig) -> np.ndarray:
    """Number of small particles sitting on the large particle's lattice
    point, per position multi-index.

    Entry [j0, j1, ..., jI] counts the i with j0 == p*j_i + s_i; this is the
    diagonal of the scattering operator in the position representation.
    """
    N, n, I, p = config.N, config.n, config.I, config.p
    counts = np.zeros(config.axis_dims, dtype=np.int64)
    j0 = np.arange(N).reshape((N,) + (1,) * I)
    for i, s in enumerate(config.shifts):
        ki = np.arange(n).reshape((1,) * (i + 1) + (n,) + (1,) * (I - i - 1))
        counts += j0 == p * ki + s
    return counts


@dataclass
class PropagatorFactors:
    """Diagonal phase tables for one configuration's period operator.

    All arrays are immutable after construction and shaped to broadcast
    against the (N, n, ..., n) state tensor.
    """

    config: SystemConfig
    free_phases_big: np.ndarray        # (N,), e^{-i pi k^2/N}
    free_phases_small: np.ndarray      # (n,), e^{-i pi k^2/n}
    kick_phases: np.ndarray            # (N,), e^{+i pi j^2/N}
    counts: np.ndarray                 # (N, n, ..., n) integer coincidences
    substep_free: np.ndarray           # (N, n, ..., n) momentum phases ^(1/R)
    substep_scatter: np.ndarray        # (N, n, ..., n) e^{-i (V/R) counts}


def build_factors(config: SystemConfig) -> PropagatorFactors:
    N, n, I, R = config.N, config.n, config.I, config.R
    fb = free_phase(N, np.arange(N))
    fs = free_phase(n, np.arange(n))
    kick = kick_phase(N, np.arange(N))

    # substep free phase: product over axes of e^{-i pi k^2/(d R)}
    sub = np.exp(-1j * np.pi * np.arange(N) ** 2 / (N * R)).reshape((N,) + (1,) * I)
    sub = np.broadcast_to(sub, config.axis_dims).copy()
    small_sub = np.exp(-1j * np.pi * np.arange(n) ** 2 / (n * R))
    for i in range(I):
        sub *= small_sub.reshape((1,) * (i + 1) + (n,) + (1,) * (I - i - 1))

    counts = scattering_counts(config)
    scatter = np.exp(-1j * (config.V / R) * counts)
    return PropagatorFactors(
        config=config,
        free_phases_big=fb,
        free_phases_small=fs,
        kick_phases=kick,
        counts=counts,
        substep_free=sub,
        substep_scatter=scatter,
    )


def apply_cat_single(state: StateVector, N: int) -> StateVector:
    """One period of the single-particle quantum cat map (exact, no Trotter)."""
    if state.representation != POSITION:
        raise ValueError("apply_cat_single expects a position-representation state")
    if state.axis_dims != (N,):
        raise ValueError(f"expected a single axis of size {N}, got {state.axis_dims}")
    c = to_momentum(state)
    c.amplitudes *= free_phase(N, np.arange(N))
    psi = to_position(c)
    psi.amplitudes *= kick_phase(N, np.arange(N))
    return psi


def apply_period_multi(state: StateVector, factors: PropagatorFactors) -> StateVector:
    """One kick period of the multi-particle system via R Trotter substeps.

    Each substep applies the free phases (momentum) then the scattering
    phases (position); the kick acts once at the end of the period.  For
    V = 0 the substeps telescope and the result is R-independent.
    """
    if state.representation != POSITION:
        raise ValueError("apply_period_multi expects a position-representation state")
    config = factors.config
    psi = state.shaped.copy()
    for _ in range(config.R):
        c = np.fft.ifftn(psi, norm="ortho")
        c *= factors.substep_free
        psi = np.fft.fftn(c, norm="ortho")
        psi *= factors.substep_scatter
    psi *= factors.kick_phases.reshape((config.N,) + (1,) * config.I)
    return StateVector(psi, POSITION, config.axis_dims)


def period_applier(config: SystemConfig):
    """Closure applying one period to a position-representation state."""
    factors = build_factors(config)

    def apply(state: StateVector) -> StateVector:
        return apply_period_multi(state, factors)

    return apply


def materialize_unitary(applier, dim: int, axis_dims=None,
                        max_dense_dim: int = DEFAULT_DENSE_DIM,
                        workers: int = 1) -> np.ndarray:
    """Dense matrix of an applier, column by column on basis vectors.

    Columns are computed one at a time through the exact same code path, so
    the result is bit-identical for any worker count.
    """
    if dim > max_dense_dim:
        raise BudgetError(
            f"dense materialization of dim={dim} exceeds budget {max_dense_dim}"
        )
    if axis_dims is None:
        axis_dims = (dim,)
    U = np.empty((dim, dim), dtype=np.complex128)

    def column(j):
        e = np.zeros(dim, dtype=np.complex128)
        e[j] = 1.0
        U[:, j] = applier(StateVector(e, POSITION, axis_dims)).amplitudes

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(column, range(dim)))
    else:
        for j in range(dim):
            column(j)
    return U


def unitarity_residual(U: np.ndarray) -> float:
    """Spectral-norm residual of U^dag U - I."""
    d = U.shape[0]
    return float(np.linalg.norm(U.conj().T @ U - np.eye(d), ord=2))


def check_unitary(U: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    res = unitarity_residual(U)
    if res > tol:
        raise NumericError(f"unitarity residual {res:.3e} exceeds {tol:.1e}")
    return U
