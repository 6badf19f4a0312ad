"""Generational island model with elitism and best-individual migration."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .benchmarks import ProblemInstance, evaluate_kernel
from .gossip import Contribution
from .operators import Individual, OperatorConfig, crossover_kernel, mutation_kernel, parents_kernel

__all__ = ["Island", "new_island", "absorb_migrants", "island_generation", "migration_event", "MIGRATION_FREQUENCIES"]

MIGRATION_FREQUENCIES = (25, 50, 75, 100)


@dataclass
class Island:
    """One deme. ``genomes``/``fitness`` hold the population row-wise."""

    id: int
    genomes: np.ndarray
    fitness: np.ndarray
    generation: int = 0
    evaluations: int = 0
    inbox: deque = field(default_factory=deque)
    elite: Individual | None = None

    def __post_init__(self) -> None:
        if self.elite is None and len(self.fitness):
            self._refresh_elite()

    @property
    def size(self) -> int:
        return self.fitness.shape[0]

    @property
    def population(self) -> list[Individual]:
        return [Individual(g, f) for g, f in zip(self.genomes, self.fitness)]

    def best(self) -> Individual:
        i = int(np.argmin(self.fitness))
        return Individual(self.genomes[i], self.fitness[i])

    def _refresh_elite(self) -> None:
        cand = self.best()
        if self.elite is None or cand.fitness < self.elite.fitness:
            self.elite = cand


def new_island(island_id: int, size: int, instance: ProblemInstance, rng: np.random.Generator) -> Island:
    """Random initial population. Initial evaluations are not charged to the budget."""
    genomes = rng.uniform(instance.lower, instance.upper, size=(size, instance.dim))
    args = instance.kernel_args()
    fitness = np.array([evaluate_kernel(g, *args) for g in genomes])
    return Island(island_id, genomes, fitness)


def absorb_migrants(island: Island, rng: np.random.Generator) -> list[int]:
    """Each queued migrant overwrites a uniformly random resident.

    Returns the overwritten slots in arrival order.
    """
    slots = []
    while island.inbox:
        c = island.inbox.popleft()
        slot = int(rng.integers(island.size))
        island.genomes[slot] = c.solution.genome
        island.fitness[slot] = c.solution.fitness
        slots.append(slot)
    if slots:
        island._refresh_elite()
    return slots


@njit(cache=True)
def _breed(genomes, fitness, pc, pm, k, paired, lower, upper, rng, kind, shift, rot, a, b, A, bias):
    p, d = genomes.shape
    rows = np.arange(p)
    children = np.empty((p, d))
    child_fit = np.empty(p)
    for c in range(p):
        i, j = parents_kernel(fitness, rows, k, paired, rng)
        child = crossover_kernel(genomes[i], genomes[j], pc, rng)
        mutation_kernel(child, pm, lower, upper, rng)
        children[c] = child
        child_fit[c] = evaluate_kernel(child, kind, shift, rot, a, b, A, bias)
    return children, child_fit


def island_generation(island: Island, instance: ProblemInstance, cfg: OperatorConfig, rng: np.random.Generator) -> Island:
    """Advance ``island`` one generation in place (and return it).

    Migrants are absorbed first. The whole population is then replaced by
    offspring; if that loses the elite it is copied over a random slot.
    Costs exactly ``island.size`` evaluations.
    """
    if island.size == 0:
        raise ValueError("island has an empty population")
    absorb_migrants(island, rng)
    children, child_fit = _breed(
        island.genomes, island.fitness, cfg.pc, cfg.pm, cfg.k, cfg.paired,
        instance.lower, instance.upper, rng, *instance.kernel_args(),
    )
    elite = island.elite
    if child_fit.min() > elite.fitness:
        slot = int(rng.integers(island.size))
        children[slot] = elite.genome
        child_fit[slot] = elite.fitness
    island.genomes = children
    island.fitness = child_fit
    island._refresh_elite()
    island.generation += 1
    island.evaluations += island.size
    return island


def migration_event(island: Island) -> Contribution:
    """Copy of the island's current best, tagged with its evaluation count."""
    if island.size == 0:
        raise ValueError("island has an empty population")
    return Contribution(island.id, island.evaluations, island.best())
