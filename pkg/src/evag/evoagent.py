"""Evolvable agents and the per-node blackboard they share.

Every agent owns one solution and repeatedly breeds a child from two parents
taken from the node's selection pool (all local agents plus cached migrants).
The child replaces the agent's solution only when strictly better. The
blackboard keeps the node's best solution and its evaluation counter.

Agent solutions and cached migrants live in one row matrix so the compiled
turn loop can read them without Python objects in between.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .benchmarks import ProblemInstance, evaluate_kernel
from .gossip import Cache
from .operators import Individual, OperatorConfig, crossover_kernel, mutation_kernel, parents_kernel

__all__ = [
    "Blackboard",
    "EvolvableAgent",
    "StepOutcome",
    "register_agent",
    "selection_pool",
    "agent_step",
    "record_evaluation",
    "global_evaluations",
]


class EvolvableAgent:
    """An agent id plus its current solution.

    Before registration the agent holds its initial solution; afterwards the
    blackboard owns the state and ``current`` reads it from there.
    """

    def __init__(self, agent_id: int, solution: Individual):
        if not solution.evaluated:
            raise ValueError("an agent's solution must be evaluated")
        self.id = agent_id
        self._initial = solution
        self._board: Blackboard | None = None
        self._row = -1

    @property
    def current(self) -> Individual:
        if self._board is None:
            return self._initial
        return self._board._row_individual(self._row)

    def __repr__(self) -> str:
        return f"EvolvableAgent(id={self.id}, fitness={self.current.fitness!r})"


@dataclass(frozen=True)
class StepOutcome:
    replaced: bool
    child_fitness: float
    previous_fitness: float


class Blackboard:
    def __init__(self, node_id: int, dim: int, peers=()):
        self.node_id = node_id
        self.dim = dim
        self.cache = Cache(node_id, dim)
        self.local_evaluations = 0
        self.agents: dict[int, EvolvableAgent] = {}
        self._genomes = np.empty((8, dim))
        self._fitness = np.full(8, math.inf)
        self._used = 0
        self._agent_rows: list[int] = []
        self._peer_rows: dict[int, int] = {}
        self._synced_version = -1
        self._active = np.empty(0, np.int64)
        self._agent_row_arr = np.empty(0, np.int64)
        self._best_genome = np.zeros(dim)
        self._best_fit = np.array([math.inf])
        self._cursor = 0
        for p in peers:
            if p != node_id:
                self._peer_rows.setdefault(p, -1)

    # -- storage ---------------------------------------------------------

    def _new_row(self) -> int:
        if self._used == self._fitness.shape[0]:
            cap = 2 * self._used
            g = np.empty((cap, self.dim))
            g[: self._used] = self._genomes[: self._used]
            f = np.full(cap, math.inf)
            f[: self._used] = self._fitness[: self._used]
            self._genomes, self._fitness = g, f
        self._used += 1
        return self._used - 1

    def _row_individual(self, row: int) -> Individual:
        return Individual(self._genomes[row], self._fitness[row])

    def _rebuild_active(self) -> None:
        peers = [self._peer_rows[p] for p in sorted(self._peer_rows) if self._peer_rows[p] >= 0]
        self._agent_row_arr = np.array(self._agent_rows, dtype=np.int64)
        self._active = np.array(self._agent_rows + peers, dtype=np.int64)

    def sync_cache(self) -> None:
        """Copy cache entries into pool rows if the cache changed."""
        if self._synced_version == self.cache.version:
            return
        grew = False
        for node, c in self.cache.entries.items():
            row = self._peer_rows.get(node, -1)
            if row < 0:
                row = self._new_row()
                self._peer_rows[node] = row
                grew = True
            self._genomes[row] = c.solution.genome
            self._fitness[row] = c.solution.fitness
        if grew:
            self._rebuild_active()
        self._synced_version = self.cache.version

    # -- queries ---------------------------------------------------------

    @property
    def best_sol(self) -> Individual | None:
        if math.isinf(self._best_fit[0]):
            return None
        return Individual(self._best_genome, self._best_fit[0])

    @property
    def best_fitness(self) -> float:
        return float(self._best_fit[0])

    @property
    def agent_count(self) -> int:
        return len(self._agent_rows)

    def random_agent_solution(self, rng: np.random.Generator) -> Individual:
        if not self._agent_rows:
            raise ValueError("no registered agents")
        row = self._agent_rows[int(rng.integers(len(self._agent_rows)))]
        return self._row_individual(row)

    def _offer_best(self, genome, fitness: float) -> None:
        if fitness < self._best_fit[0]:
            self._best_fit[0] = fitness
            self._best_genome[:] = genome

    def run_turn(self, instance: ProblemInstance, cfg: OperatorConfig, rng: np.random.Generator, steps: int) -> int:
        """Step agents round-robin ``steps`` times, continuing where the last
        turn stopped. Returns the number of steps (= evaluations) done."""
        if steps <= 0:
            return 0
        self.sync_cache()
        if self._active.shape[0] < 2:
            raise ValueError("selection pool needs at least two solutions")
        self._cursor, _, _ = _turn_kernel(
            self._genomes, self._fitness, self._active, self._agent_row_arr, self._cursor, steps,
            cfg.k, cfg.paired, cfg.pc, cfg.pm, instance.lower, instance.upper,
            self._best_genome, self._best_fit, rng, *instance.kernel_args(),
        )
        self.local_evaluations += steps
        return steps


@njit(cache=True, nogil=True)
def _turn_kernel(genomes, fitness, active, agent_rows, cursor, steps, k, paired, pc, pm, lower, upper,
                 best_genome, best_fit, rng, kind, shift, rot, a, b, A, bias):
    n_agents = agent_rows.shape[0]
    replaced = 0
    f = math.nan
    for _ in range(steps):
        row = agent_rows[cursor]
        i, j = parents_kernel(fitness, active, k, paired, rng)
        child = crossover_kernel(genomes[active[i]], genomes[active[j]], pc, rng)
        mutation_kernel(child, pm, lower, upper, rng)
        f = evaluate_kernel(child, kind, shift, rot, a, b, A, bias)
        if f < best_fit[0]:
            best_fit[0] = f
            best_genome[:] = child
        if f < fitness[row]:
            fitness[row] = f
            genomes[row] = child
            replaced += 1
        cursor += 1
        if cursor == n_agents:
            cursor = 0
    return cursor, replaced, f


def register_agent(bb: Blackboard, agent: EvolvableAgent) -> None:
    """Make the agent's solution visible to the node's selection pool.

    The initial solution also seeds ``best_sol`` but is not counted as an
    evaluation.
    """
    if agent.id in bb.agents:
        raise ValueError(f"agent {agent.id} is already registered on node {bb.node_id}")
    if agent._board is not None:
        raise ValueError(f"agent {agent.id} belongs to another blackboard")
    sol = agent.current
    if sol.genome.shape != (bb.dim,):
        raise ValueError(f"agent genome has shape {sol.genome.shape}, expected ({bb.dim},)")
    row = bb._new_row()
    bb._genomes[row] = sol.genome
    bb._fitness[row] = sol.fitness
    bb._agent_rows.append(row)
    bb.agents[agent.id] = agent
    agent._board, agent._row = bb, row
    bb._offer_best(sol.genome, sol.fitness)
    bb._rebuild_active()


def selection_pool(bb: Blackboard) -> list[Individual]:
    """Local agents' solutions (registration order) then cached migrants (by node id)."""
    if not bb._agent_rows:
        raise ValueError("blackboard has no registered agents")
    bb.sync_cache()
    return [bb._row_individual(r) for r in bb._active]


def agent_step(agent: EvolvableAgent, bb: Blackboard, instance: ProblemInstance, cfg: OperatorConfig,
               rng: np.random.Generator) -> StepOutcome:
    """One iteration of the agent loop: select, recombine, mutate, evaluate, replace."""
    if agent._board is not bb:
        raise ValueError(f"agent {agent.id} is not registered on node {bb.node_id}")
    if instance.dim != bb.dim:
        raise ValueError("instance dimension does not match the blackboard")
    bb.sync_cache()
    if bb._active.shape[0] < 2:
        raise ValueError("selection pool needs at least two solutions")
    before = float(bb._fitness[agent._row])
    _, replaced, child_f = _turn_kernel(
        bb._genomes, bb._fitness, bb._active, np.array([agent._row], dtype=np.int64), 0, 1,
        cfg.k, cfg.paired, cfg.pc, cfg.pm, instance.lower, instance.upper,
        bb._best_genome, bb._best_fit, rng, *instance.kernel_args(),
    )
    bb.local_evaluations += 1
    return StepOutcome(bool(replaced), float(child_f), before)


def record_evaluation(bb: Blackboard, s: Individual) -> None:
    if not s.evaluated:
        raise ValueError("cannot record an unevaluated individual")
    bb.local_evaluations += 1
    bb._offer_best(s.genome, s.fitness)


def global_evaluations(bb: Blackboard) -> int:
    """Local count plus the latest count each peer reported (a lower bound)."""
    return bb.local_evaluations + sum(c.num_evaluations for c in bb.cache.entries.values())
