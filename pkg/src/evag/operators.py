"""Variation and selection operators shared by both evolutionary models.

Each operator exists as a compiled kernel working on raw arrays (used inside
the search loops) and as a thin wrapper over :class:`Individual` objects.
Both paths consume the ``numpy.random.Generator`` stream identically.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "Individual",
    "OperatorConfig",
    "uniform_crossover",
    "uniform_mutation",
    "select_parents",
]

SELECTION_MODES = ("paired", "tournament")


class Individual:
    """A real-coded genome with its cached fitness (``nan`` when unevaluated).

    Equality is bit-exact on genome and fitness, so round-tripped wire
    values compare equal even when they carry NaN payloads.
    """

    __slots__ = ("genome", "fitness")

    def __init__(self, genome, fitness: float = math.nan):
        g = np.array(genome, dtype=np.float64, copy=True)
        if g.ndim != 1:
            raise ValueError("genome must be one-dimensional")
        g.flags.writeable = False
        self.genome = g
        self.fitness = float(fitness)

    @property
    def evaluated(self) -> bool:
        return not math.isnan(self.fitness)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Individual):
            return NotImplemented
        return (
            self.genome.shape == other.genome.shape
            and self.genome.tobytes() == other.genome.tobytes()
            and struct.pack("<d", self.fitness) == struct.pack("<d", other.fitness)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Individual(dim={self.genome.shape[0]}, fitness={self.fitness!r})"


@dataclass(frozen=True)
class OperatorConfig:
    """Operator rates.

    ``selection="paired"`` samples ``k`` pool members once and keeps the best
    two; ``"tournament"`` runs two independent ``k``-tournaments.
    """

    pc: float = 0.9
    pm: float = 0.01
    k: int = 2
    selection: str = "paired"

    def __post_init__(self) -> None:
        if not 0.0 <= self.pc <= 1.0:
            raise ValueError(f"pc must be in [0, 1], got {self.pc}")
        if not 0.0 <= self.pm <= 1.0:
            raise ValueError(f"pm must be in [0, 1], got {self.pm}")
        if self.k < 1:
            raise ValueError(f"tournament size must be >= 1, got {self.k}")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"selection must be one of {SELECTION_MODES}, got {self.selection!r}")

    @property
    def paired(self) -> bool:
        return self.selection == "paired"


# -- kernels -----------------------------------------------------------------


@njit(cache=True)
def crossover_kernel(a, b, pc, rng):
    child = a.copy()
    if rng.random() < pc:
        for i in range(a.shape[0]):
            if rng.random() >= 0.5:
                child[i] = b[i]
    return child


@njit(cache=True)
def mutation_kernel(g, pm, lower, upper, rng):
    """In-place per-gene uniform reset."""
    for i in range(g.shape[0]):
        if rng.random() < pm:
            g[i] = rng.uniform(lower[i], upper[i])


@njit(cache=True)
def best_two_kernel(fitness, rows, k, rng):
    """Sample ``k`` entries of ``rows`` with replacement and return the best two.

    Ties go to the earlier sample. Returns pool positions, not row values.
    """
    n = rows.shape[0]
    first = rng.integers(0, n)
    second = -1
    for _ in range(k - 1):
        s = rng.integers(0, n)
        fs = fitness[rows[s]]
        if fs < fitness[rows[first]]:
            second = first
            first = s
        elif second < 0 or fs < fitness[rows[second]]:
            second = s
    if second < 0:
        second = first
    return first, second


@njit(cache=True)
def tournament_kernel(fitness, rows, k, rng):
    """Winner of one ``k``-tournament over ``rows`` (pool position)."""
    n = rows.shape[0]
    best = rng.integers(0, n)
    for _ in range(k - 1):
        s = rng.integers(0, n)
        if fitness[rows[s]] < fitness[rows[best]]:
            best = s
    return best


@njit(cache=True)
def parents_kernel(fitness, rows, k, paired, rng):
    if paired:
        return best_two_kernel(fitness, rows, k, rng)
    return tournament_kernel(fitness, rows, k, rng), tournament_kernel(fitness, rows, k, rng)


# -- object-level wrappers ---------------------------------------------------


def uniform_crossover(a: Individual, b: Individual, pc: float, rng: np.random.Generator) -> np.ndarray:
    """One child: with probability ``pc`` a gene-wise coin flip between the
    parents, otherwise a copy of ``a``."""
    if a.genome.shape != b.genome.shape:
        raise ValueError("parents have different genome lengths")
    return crossover_kernel(a.genome, b.genome, float(pc), rng)


def uniform_mutation(g, pm: float, bounds, rng: np.random.Generator) -> np.ndarray:
    lower, upper = (np.broadcast_to(np.asarray(v, dtype=np.float64), np.shape(g)) for v in bounds)
    if np.any(lower >= upper):
        raise ValueError("invalid bounds: lower must be < upper")
    out = np.array(g, dtype=np.float64, copy=True)
    mutation_kernel(out, float(pm), np.ascontiguousarray(lower), np.ascontiguousarray(upper), rng)
    return out


def select_parents(pool, k: int, rng: np.random.Generator, paired: bool = True) -> tuple[Individual, Individual]:
    """Pick two parents from ``pool`` (lower fitness is better).

    The default samples ``k`` members with replacement and returns the best
    two, best first. ``paired=False`` runs two independent tournaments.
    """
    if len(pool) < 2:
        raise ValueError("selection pool needs at least two individuals")
    if k < 2 and paired:
        raise ValueError("paired selection needs k >= 2")
    fitness = np.array([ind.fitness for ind in pool], dtype=np.float64)
    rows = np.arange(len(pool))
    i, j = parents_kernel(fitness, rows, int(k), paired, rng)
    return pool[i], pool[j]
