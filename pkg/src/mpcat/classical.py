"""Classical cat-map baseline: symbolic dynamics and cylinder entropies.

The torus automorphism (Q, P) -> (Q + P, Q + 2P) mod 1 is iterated over a
deterministic G x G rational lattice (or a seeded Monte Carlo cloud); the
symbol at each step is the index of the vertical strip [k/K, (k+1)/K)
containing Q, read before the map is applied.  Cylinder measures are the
fractions of sample points realizing each symbol word, and

    S_cl(J) = -sum mu(w) ln mu(w)

is the Shannon entropy of words of length J.  Its increments approach the
Kolmogorov-Sinai entropy ln((3 + sqrt 5)/2) of the map from above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError
from .histories import EntropySeries

CAT_MATRIX = np.array([[1, 1], [1, 2]])

DEFAULT_GRID = 4096
DEFAULT_K_CELLS = 4
MAX_TABLE_WORDS = 1 << 24


@dataclass(frozen=True)
class PhasePoint:
    """Point on the unit torus; momentum is rescaled to [0, 1)."""

    Q: float
    Ptilde: float


def cat_step(pt: PhasePoint) -> PhasePoint:
    """One period of the cat map, the action of [[1,1],[1,2]] mod 1."""
    return PhasePoint((pt.Q + pt.Ptilde) % 1.0, (pt.Q + 2.0 * pt.Ptilde) % 1.0)


def ks_entropy() -> float:
    """ln of the largest eigenvalue of [[1,1],[1,2]], about 0.9624 nats."""
    return float(np.log((3.0 + np.sqrt(5.0)) / 2.0))


@dataclass(frozen=True)
class GridSampler:
    """All G^2 lattice points (a/G, b/G); the integer matrix maps the
    lattice to itself, so counts are exact and need no seed."""

    G: int = DEFAULT_GRID
    block_rows: int = 64

    @property
    def total(self) -> int:
        return self.G * self.G

    def describe(self) -> dict:
        return {"sampler": "grid", "G": self.G}

    def blocks(self):
        G = self.G
        b = np.arange(G, dtype=np.int64)
        for a0 in range(0, G, self.block_rows):
            rows = np.arange(a0, min(a0 + self.block_rows, G), dtype=np.int64)
            a = np.repeat(rows, G)
            yield a, np.tile(b, len(rows))


@dataclass(frozen=True)
class MonteCarloSampler:
    """Uniform random points in fixed-size blocks; each block draws from its
    own spawned stream, so merged counts do not depend on scheduling."""

    samples: int = 1 << 20
    seed: int = 0
    block_size: int = 1 << 16

    @property
    def total(self) -> int:
        return self.samples

    def describe(self) -> dict:
        return {"sampler": "monte-carlo", "samples": self.samples, "seed": self.seed}

    def blocks(self):
        n_blocks = -(-self.samples // self.block_size)
        children = np.random.SeedSequence(self.seed).spawn(n_blocks)
        left = self.samples
        for child in children:
            m = min(self.block_size, left)
            left -= m
            rng = np.random.default_rng(child)
            yield rng.random(m), rng.random(m)


def _grid_words_per_level(a, b, G, K, J):
    """Symbol words of each length 1..J for integer lattice points."""
    words = np.zeros(len(a), dtype=np.int64)
    for _ in range(J):
        sym = (a * K) // G
        words = words * K + sym
        yield words
        a, b = (a + b) % G, (a + 2 * b) % G


def _float_words_per_level(Q, P, K, J):
    words = np.zeros(len(Q), dtype=np.int64)
    for _ in range(J):
        sym = np.minimum((Q * K).astype(np.int64), K - 1)
        words = words * K + sym
        yield words
        Q, P = (Q + P) % 1.0, (Q + 2.0 * P) % 1.0


def _level_counts(J: int, K: int, sampler) -> list:
    """Word counts for every length 1..J in one pass over the samples."""
    if K**J > MAX_TABLE_WORDS:
        raise BudgetError(f"K^J = {K**J:,} words exceeds table budget {MAX_TABLE_WORDS:,}")
    counts = [np.zeros(K ** (j + 1), dtype=np.int64) for j in range(J)]
    on_grid = isinstance(sampler, GridSampler)
    for x, y in sampler.blocks():
        if on_grid:
            levels = _grid_words_per_level(x, y, sampler.G, K, J)
        else:
            levels = _float_words_per_level(x, y, K, J)
        for j, words in enumerate(levels):
            counts[j] += np.bincount(words, minlength=K ** (j + 1))
    return counts


@dataclass
class CylinderTable:
    """Measures mu(w) of all K^J symbol cylinders, indexed by the base-K
    word integer (first symbol most significant)."""

    J: int
    K: int
    measures: np.ndarray
    meta: dict = field(default_factory=dict)

    def measure(self, word) -> float:
        idx = 0
        for s in word:
            idx = idx * self.K + s
        return float(self.measures[idx])


def cylinder_measures(J: int, K: int = DEFAULT_K_CELLS, sampler=None) -> CylinderTable:
    """Estimate all length-J cylinder measures for the K-strip partition."""
    if sampler is None:
        sampler = GridSampler()
    counts = _level_counts(J, K, sampler)[-1]
    return CylinderTable(
        J=J, K=K, measures=counts / sampler.total, meta=sampler.describe()
    )


def _shannon(counts: np.ndarray, total: int) -> float:
    mu = counts[counts > 0] / total
    return float(-(mu * np.log(mu)).sum())


def classical_entropy_series(J_max: int, K: int = DEFAULT_K_CELLS,
                             sampler=None) -> EntropySeries:
    """S_cl(J) for J = 1..J_max from a single sweep over the samples."""
    if sampler is None:
        sampler = GridSampler()
    counts = _level_counts(J_max, K, sampler)
    entries = [(j + 1, _shannon(c, sampler.total)) for j, c in enumerate(counts)]
    meta = sampler.describe()
    meta["K"] = K
    return EntropySeries(entries=entries, method="classical", metadata=meta)
