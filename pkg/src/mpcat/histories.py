"""Quantum histories, decoherence matrices and their entropies.

The position lattice is split into K cells over the large-particle
coordinate; a history is the repeated project-then-propagate of a state,
one partition symbol per kick period.  For word length J the decoherence
matrix

    D[s, s'] = Tr(B_s^dag B_s') / dim,   B_s = U P_{s_{J-1}} ... U P_{s_0}

is Hermitian, positive semidefinite and of unit trace; its von Neumann
entropy S(J) = -sum lam ln lam is the finite-time dynamical entropy.

Two routes are implemented.  The direct route expands the K-ary prefix
tree of history operators level by level and takes the Gram matrix of the
vectorized leaves (K^J x K^J).  The iterated route propagates the
word-length-independent square matrix of size dim^2:

    Om_0 = |v><v|, v = vec(I)/sqrt(dim);  Om_{j+1} = sum_k A_k Om_j A_k^dag

with A_k = I (x) U P_k, whose nonzero spectrum equals that of D at every
step.  The direct route is used while K^J <= dim^2, the iterated one past
that crossover.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, NumericError
from .kinematics import SystemConfig

# Default ceiling on any single entropy computation's working set.
DEFAULT_MAX_BYTES = 2 << 30

HERMITICITY_TOL = 1e-8
PSD_ERROR_TOL = -1e-8     # eigenvalues below this are a hard error
CLAMP_TOL = 1e-10         # eigenvalues below this are treated as zero
TRACE_TOL = 1e-8


@dataclass
class PartitionProjectors:
    """Diagonal 0/1 projectors onto K equal cells of the large-particle
    position axis; the small-particle indices are unconstrained."""

    K: int
    dim: int
    masks: list  # K boolean arrays of length dim, disjoint and exhaustive

    def cell_rank(self, k: int) -> int:
        return int(self.masks[k].sum())


def build_projectors(config: SystemConfig) -> PartitionProjectors:
    N, K = config.N, config.K_cells
    small_dim = config.dim // N
    j0 = np.arange(config.dim) // small_dim
    cell = j0 // (N // K)
    masks = [cell == k for k in range(K)]
    return PartitionProjectors(K=K, dim=config.dim, masks=masks)


def project(amplitudes: np.ndarray, projectors: PartitionProjectors, k: int):
    out = np.zeros_like(amplitudes)
    rows = projectors.masks[k]
    out[rows] = amplitudes[rows]
    return out


def history_apply(word, applier, projectors: PartitionProjectors, state):
    """Apply (U P_{s_{J-1}}) ... (U P_{s_0}) to a normalized state.

    Branch norms over all K^J words of a length sum to one.
    """
    from .kinematics import POSITION, StateVector

    if len(word) < 1:
        raise ValueError("history words must have length >= 1")
    psi = state
    for s in word:
        if not 0 <= s < projectors.K:
            raise ValueError(f"symbol {s} out of range [0, {projectors.K})")
        projected = StateVector(
            project(psi.amplitudes, projectors, s), POSITION, psi.axis_dims
        )
        psi = applier(projected)
    return psi


@dataclass
class DecoherenceMatrix:
    """K^J x K^J decoherence matrix over history words.

    Words are indexed big-endian: the first symbol is the most significant
    K-ary digit, so appending a symbol refines each index into a block of K.
    """

    matrix: np.ndarray
    J: int
    K: int
    dim: int   # Hilbert dimension the trace was normalized by


def validate_decoherence(D: DecoherenceMatrix, tol: float = 1e-10) -> None:
    """Check Hermiticity, positivity and unit trace; raise NumericError."""
    M = D.matrix
    herm = float(np.abs(M - M.conj().T).max())
    if herm > tol:
        raise NumericError(f"decoherence matrix Hermiticity residual {herm:.3e}")
    tr = complex(np.trace(M))
    if abs(tr - 1.0) > tol:
        raise NumericError(f"decoherence matrix trace {tr} deviates from 1")
    lam = np.linalg.eigvalsh(M)
    if lam.min() < -tol:
        raise NumericError(f"decoherence matrix eigenvalue {lam.min():.3e} < -{tol:.1e}")


def marginalize(D: DecoherenceMatrix) -> DecoherenceMatrix:
    """Sum over matched last symbols: D at word length J -> J-1."""
    if D.J < 2:
        raise ValueError("cannot marginalize below word length 1")
    m = D.matrix.shape[0] // D.K
    reduced = np.einsum("akbk->ab", D.matrix.reshape(m, D.K, m, D.K))
    return DecoherenceMatrix(matrix=reduced, J=D.J - 1, K=D.K, dim=D.dim)


def direct_bytes(K: int, J: int, dim: int) -> int:
    """Peak working set of the direct route at word length J."""
    leaves = K**J * dim * dim
    parents = K ** (J - 1) * dim * dim if J > 1 else 0
    gram = K ** (2 * J)
    return 16 * (leaves + parents + gram)


def omega_bytes(dim: int) -> int:
    # iterate + two tensordot intermediates + accumulator
    return 16 * 4 * dim**4


# --- checkpointing of the history-operator tree ---------------------------

_CKP_MAGIC = b"MPCATCKP"
_CKP_VERSION = 1
_CKP_HEADER = struct.Struct("<8sI16sIQQ")  # magic, version, hash, level, n_blocks, dim


def save_checkpoint(path, config_hash: str, level: int, blocks: np.ndarray) -> None:
    """Snapshot one tree level; data is little-endian float64 re/im pairs."""
    tag = config_hash.encode()[:16].ljust(16, b"\0")
    header = _CKP_HEADER.pack(
        _CKP_MAGIC, _CKP_VERSION, tag, level, blocks.shape[0], blocks.shape[1]
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(blocks, dtype="<c16").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path, config_hash: str):
    """Return (level, blocks) or None when absent/incompatible."""
    if not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        raw = fh.read(_CKP_HEADER.size)
        if len(raw) != _CKP_HEADER.size:
            return None
        magic, version, tag, level, n_blocks, dim = _CKP_HEADER.unpack(raw)
        if magic != _CKP_MAGIC or version != _CKP_VERSION:
            return None
        if tag != config_hash.encode()[:16].ljust(16, b"\0"):
            return None
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != n_blocks * dim * dim:
        return None
    blocks = data.astype(np.complex128).reshape(n_blocks, dim, dim)
    return level, blocks


# --- direct route ----------------------------------------------------------


def _expand_level(U, projectors, blocks, workers=1):
    """One tree level: child[w*K + k] = U P_k @ parent[w].

    Each (parent, cell) product runs through identical code whatever the
    worker count, so the result is bit-for-bit reproducible.
    """
    B, dim = blocks.shape[0], blocks.shape[1]
    K = projectors.K
    new = np.empty((B * K, dim, dim), dtype=np.complex128)

    def job(w):
        src = blocks[w]
        for k in range(K):
            rows = projectors.masks[k]
            new[w * K + k] = U[:, rows] @ src[rows, :]

    if workers > 1 and B > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(B)))
    else:
        for w in range(B):
            job(w)
    return new


def _gram(blocks, dim, chunk=256):
    """Gram matrix of vectorized leaves, normalized by dim.

    Assembled in fixed row chunks (independent of worker count) to bound the
    temporary conjugate copies.
    """
    B = blocks.shape[0]
    L = blocks.reshape(B, dim * dim)
    G = np.empty((B, B), dtype=np.complex128)
    for i0 in range(0, B, chunk):
        G[i0 : i0 + chunk] = np.conj(L[i0 : i0 + chunk]) @ L.T
    G /= dim
    return G


def expand_history_tree(U, projectors: PartitionProjectors, J: int, *,
                        workers: int = 1, checkpoint_path=None,
                        checkpoint_every: int = 1, config_hash: str = ""):
    """History-operator blocks at level J, optionally resumed/snapshotted."""
    dim = projectors.dim
    start = 0
    blocks = np.eye(dim, dtype=np.complex128).reshape(1, dim, dim)
    if checkpoint_path is not None:
        resumed = load_checkpoint(checkpoint_path, config_hash)
        if resumed is not None and resumed[0] <= J:
            start, blocks = resumed
    for level in range(start + 1, J + 1):
        blocks = _expand_level(U, projectors, blocks, workers=workers)
        if checkpoint_path is not None and (
            level % max(checkpoint_every, 1) == 0 or level == J
        ):
            save_checkpoint(checkpoint_path, config_hash, level, blocks)
    return blocks


def decoherence_matrix_direct(U, projectors: PartitionProjectors, J: int, *,
                              max_bytes: int = DEFAULT_MAX_BYTES,
                              workers: int = 1, checkpoint_path=None,
                              checkpoint_every: int = 1,
                              config_hash: str = "") -> DecoherenceMatrix:
    """Decoherence matrix via the prefix tree of history operators."""
    dim = projectors.dim
    K = projectors.K
    need = direct_bytes(K, J, dim)
    if need > max_bytes:
        raise BudgetError(
            f"direct route at J={J}, dim={dim} needs {need:,} bytes "
            f"(budget {max_bytes:,})"
        )
    blocks = expand_history_tree(
        U, projectors, J, workers=workers, checkpoint_path=checkpoint_path,
        checkpoint_every=checkpoint_every, config_hash=config_hash,
    )
    G = _gram(blocks, dim)
    return DecoherenceMatrix(matrix=G, J=J, K=K, dim=dim)


# --- iterated (word-length-independent) route ------------------------------


def _kraus_operators(U, projectors):
    ops = []
    for rows in projectors.masks:
        M = np.zeros_like(U)
        M[:, rows] = U[:, rows]  # U P_k
        ops.append(M)
    return ops


def _omega_step(T, kraus):
    """One pinch-and-propagate step on the dim^4 tensor.

    T carries Om reshaped as T[b, a, d, c] where row index = a + dim*b and
    column index = c + dim*d under column-stacking vectorization.
    """
    new = np.zeros_like(T)
    for M in kraus:
        T1 = np.tensordot(M, T, axes=(1, 1))            # [a, b, d, y]
        T2 = np.tensordot(T1, M.conj(), axes=(3, 1))     # [a, b, d, c]
        new += T2.transpose(1, 0, 2, 3)
    return new


def _omega_initial(dim):
    v = np.eye(dim, dtype=np.complex128).reshape(-1) / np.sqrt(dim)
    return np.outer(v, v.conj())


def omega_iteration(U, projectors: PartitionProjectors, J: int, *,
                    max_bytes: int = DEFAULT_MAX_BYTES) -> np.ndarray:
    """Word-length-independent dim^2 x dim^2 matrix with D's nonzero spectrum."""
    dim = projectors.dim
    need = omega_bytes(dim)
    if need > max_bytes:
        raise BudgetError(
            f"iterated route at dim={dim} needs {need:,} bytes (budget {max_bytes:,})"
        )
    kraus = _kraus_operators(U, projectors)
    Om = _omega_initial(dim)
    T = Om.reshape(dim, dim, dim, dim)
    for _ in range(J):
        T = _omega_step(T, kraus)
    return T.reshape(dim * dim, dim * dim)


# --- spectra and entropy ----------------------------------------------------


def hermitian_eigenvalues(H, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Real spectrum of a Hermitian matrix, descending."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    residual = float(np.abs(H - H.conj().T).max())
    if residual > tol:
        raise NumericError(f"Hermiticity residual {residual:.3e} exceeds {tol:.1e}")
    return np.linalg.eigvalsh(H)[::-1]


def entropy_of_spectrum(lam) -> float:
    """-sum lam ln lam with sub-1e-10 eigenvalues clamped to zero.

    Eigenvalues below -1e-8 indicate a genuine positivity violation and
    raise instead of being absorbed.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size and lam.min() < PSD_ERROR_TOL:
        raise NumericError(f"eigenvalue {lam.min():.3e} below {PSD_ERROR_TOL:.1e}")
    lam = np.where(lam < CLAMP_TOL, 0.0, lam)
    nz = lam[lam > 0]
    S = float(-(nz * np.log(nz)).sum())
    if S < 0.0:
        # an eigenvalue a hair above 1 leaves S at -O(eps); genuine
        # negativity cannot occur for a unit-trace PSD spectrum
        if S < -1e-9:
            raise NumericError(f"entropy {S:.3e} below zero beyond roundoff")
        S = 0.0
    return S


def saf_entropy(D) -> float:
    """Entropy -Tr(D ln D) in nats of a unit-trace decoherence matrix.

    Accepts a DecoherenceMatrix or any Hermitian array with the same
    spectral content (e.g. the iterated matrix).
    """
    M = D.matrix if isinstance(D, DecoherenceMatrix) else np.asarray(D)
    tr = complex(np.trace(M))
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericError(f"trace {tr} deviates from 1 beyond {TRACE_TOL:.1e}")
    return entropy_of_spectrum(hermitian_eigenvalues(M))


@dataclass
class EntropySeries:
    """S(J) per word length, with provenance for persisted results."""

    entries: list          # [(J, S in nats), ...] ascending in J
    method: str            # direct | omega
    metadata: dict = field(default_factory=dict)

    def values(self) -> dict:
        return dict(self.entries)

    def validate(self, K: int, dim: int, tol: float = 1e-8) -> None:
        prev = 0.0
        for J, S in self.entries:
            bound = min(J * np.log(K), 2 * np.log(dim))
            if not -tol <= S <= bound + tol:
                raise NumericError(
                    f"S({J})={S:.6f} outside [0, {bound:.6f}] (K={K}, dim={dim})"
                )
            if S < prev - tol:
                raise NumericError(f"S({J})={S:.6f} decreased below S({J - 1})={prev:.6f}")
            prev = S


def nats_to_bits(s: float) -> float:
    return s / np.log(2.0)


def choose_method(K: int, J: int, dim: int, max_bytes: int) -> tuple[str, int]:
    """(method, feasible word length): direct while K^J <= dim^2, iterated
    past that crossover; fall back across routes, shrinking J only when
    neither fits the budget at full length."""
    prefer_omega = K**J > dim * dim
    omega_ok = omega_bytes(dim) <= max_bytes
    if prefer_omega and omega_ok:
        return "omega", J
    if direct_bytes(K, J, dim) <= max_bytes:
        return "direct", J
    if omega_ok:
        return "omega", J
    for j in range(J - 1, 0, -1):
        if direct_bytes(K, j, dim) <= max_bytes:
            return "direct", j
    raise BudgetError(
        f"no route fits J=1 at dim={dim} within {max_bytes:,} bytes"
    )


def entropy_series_for_unitary(U, projectors: PartitionProjectors, j_max: int, *,
                               method: str = "auto",
                               max_bytes: int = DEFAULT_MAX_BYTES,
                               workers: int = 1, checkpoint_path=None,
                               checkpoint_every: int = 1,
                               config_hash: str = "") -> EntropySeries:
    """S(J) for J = 1..j_max for an arbitrary period unitary.

    With the direct route the tree is expanded once to j_max and the smaller
    matrices are recovered by marginalizing over the last symbol; the
    iterated route yields one spectrum per step.  metadata["truncated_at"]
    records a budget-forced cap below the requested j_max.
    """
    dim = projectors.dim
    K = projectors.K
    if method == "auto":
        method, j_fit = choose_method(K, j_max, dim, max_bytes)
    elif method == "direct":
        j_fit = j_max
        if direct_bytes(K, j_max, dim) > max_bytes:
            raise BudgetError(
                f"direct route at J={j_max}, dim={dim} needs "
                f"{direct_bytes(K, j_max, dim):,} bytes (budget {max_bytes:,})"
            )
    elif method == "omega":
        j_fit = j_max
        if omega_bytes(dim) > max_bytes:
            raise BudgetError(
                f"iterated route at dim={dim} needs {omega_bytes(dim):,} bytes "
                f"(budget {max_bytes:,})"
            )
    else:
        raise ValueError(f"method must be auto|direct|omega, got {method!r}")

    metadata = {"dim": dim, "K": K, "j_max": j_max}
    if j_fit < j_max:
        metadata["truncated_at"] = j_fit

    entries = []
    if method == "direct":
        D = decoherence_matrix_direct(
            U, projectors, j_fit, max_bytes=max_bytes, workers=workers,
            checkpoint_path=checkpoint_path, checkpoint_every=checkpoint_every,
            config_hash=config_hash,
        )
        stack = []
        while True:
            stack.append((D.J, saf_entropy(D)))
            if D.J == 1:
                break
            D = marginalize(D)
        entries = sorted(stack)
    else:
        kraus = _kraus_operators(U, projectors)
        T = _omega_initial(dim).reshape(dim, dim, dim, dim)
        for J in range(1, j_fit + 1):
            T = _omega_step(T, kraus)
            entries.append((J, saf_entropy(T.reshape(dim * dim, dim * dim))))
    return EntropySeries(entries=entries, method=method, metadata=metadata)


def entropy_series(config: SystemConfig, j_max=None, *, method: str = "auto",
                   max_bytes: int = DEFAULT_MAX_BYTES, workers: int = 1,
                   checkpoint_path=None, checkpoint_every: int = 1) -> EntropySeries:
    """S(J) series of one configured system (builds the dense propagator)."""
    from .evolution import materialize_unitary, period_applier

    if j_max is None:
        j_max = config.J_max
    U = materialize_unitary(
        period_applier(config), config.dim, config.axis_dims,
        max_dense_dim=config.dim, workers=workers,
    )
    projectors = build_projectors(config)
    series = entropy_series_for_unitary(
        U, projectors, j_max, method=method, max_bytes=max_bytes,
        workers=workers, checkpoint_path=checkpoint_path,
        checkpoint_every=checkpoint_every, config_hash=config.hash(),
    )
    series.metadata["config"] = {
        "N": config.N, "n": config.n, "I": config.I,
        "shifts": list(config.shifts), "V": config.V, "R": config.R,
        "K_cells": config.K_cells,
    }
    series.validate(config.K_cells, config.dim)
    return series
