"""Simulator event handlers that run one model instance per network node."""
from __future__ import annotations

import numpy as np

from .benchmarks import ProblemInstance
from .evoagent import Blackboard, global_evaluations
from .gossip import Ping, Pong, SchedulerState, decode_message, encode_message, handle_ping, handle_pong, scheduler_tick, DecodeError
from .island import Island, island_generation, migration_event
from .netsim import TIMER, Event, SimNetwork, send
from .operators import OperatorConfig

MIGRANT = "migrant"
ACK = "ack"


class Budget:
    """Evaluation accounting for one trial.

    ``mode="exact"`` grants steps against the true global count, so a trial
    ends on the budget exactly (agents) or within one generation (islands).
    ``mode="gossip"`` lets each agent node stop on its own gossip-based
    estimate of the global count.
    """

    def __init__(self, budget: int, n_nodes: int, mode: str = "exact"):
        if mode not in ("exact", "gossip"):
            raise ValueError(f"unknown stopping mode {mode!r}")
        self.budget = budget
        self.mode = mode
        self.used = 0
        self.done: set[int] = set()
        self.n_nodes = n_nodes

    @property
    def finished(self) -> bool:
        return len(self.done) == self.n_nodes

    @property
    def remaining(self) -> int:
        return max(self.budget - self.used, 0)


class AgentNode:
    def __init__(self, bb: Blackboard, sched: SchedulerState, instance: ProblemInstance, ops: OperatorConfig,
                 evo_rng: np.random.Generator, gossip_rng: np.random.Generator, budget: Budget,
                 eval_time: float, turn_steps: int):
        self.bb = bb
        self.sched = sched
        self.instance = instance
        self.ops = ops
        self.evo_rng = evo_rng
        self.gossip_rng = gossip_rng
        self.budget = budget
        self.eval_time = eval_time
        self.turn_steps = turn_steps
        self.steps = 0
        self.turns = 0
        self.migrants_received = 0
        self.bad_messages = 0

    @property
    def node_id(self) -> int:
        return self.bb.node_id

    @property
    def done(self) -> bool:
        return self.node_id in self.budget.done

    def start(self, net: SimNetwork) -> None:
        net.schedule(self.node_id, 0.0, "turn")
        if self.sched.directory:
            net.schedule(self.node_id, self.sched.delta_t, "gossip")

    def _grant(self) -> int:
        if self.budget.mode == "exact":
            return min(self.turn_steps, self.budget.remaining)
        if global_evaluations(self.bb) >= self.budget.budget:
            return 0
        return self.turn_steps

    def handle(self, net: SimNetwork, ev: Event) -> None:
        if ev.kind == TIMER:
            if ev.msg_class == "turn":
                self._turn(net)
            elif ev.msg_class == "gossip":
                self._gossip(net)
            return
        try:
            msg = decode_message(ev.payload)
        except DecodeError:
            self.bad_messages += 1
            return
        if isinstance(msg, Ping):
            pong = handle_ping(self.sched, self.bb.cache, msg, net.clock)
            if pong is not None:
                self.migrants_received += 1
                send(net, self.node_id, msg.sender, encode_message(pong), msg_class=ACK)
        elif isinstance(msg, Pong):
            handle_pong(self.sched, msg.token, net.clock)

    def _turn(self, net: SimNetwork) -> None:
        if self.done:
            return
        steps = self._grant()
        if steps == 0:
            self.budget.done.add(self.node_id)
            return
        self.bb.run_turn(self.instance, self.ops, self.evo_rng, steps)
        self.steps += steps
        self.turns += 1
        self.budget.used += steps
        net.schedule(self.node_id, steps * self.eval_time, "turn")

    def _gossip(self, net: SimNetwork) -> None:
        if self.budget.finished:
            return
        out = scheduler_tick(self.sched, self.bb, self.gossip_rng, net.clock)
        if out is not None:
            target, ping = out
            send(net, self.node_id, target, encode_message(ping), msg_class=MIGRANT)
        net.schedule(self.node_id, self.sched.delta_t, "gossip")

    @property
    def best_fitness(self) -> float:
        return self.bb.best_fitness

    @property
    def local_evaluations(self) -> int:
        return self.bb.local_evaluations


class IslandNode:
    def __init__(self, island: Island, instance: ProblemInstance, ops: OperatorConfig, rng: np.random.Generator,
                 migration_rng: np.random.Generator, neighbours: list[int], frequency: int, budget: Budget,
                 eval_time: float):
        self.island = island
        self.instance = instance
        self.ops = ops
        self.rng = rng
        self.migration_rng = migration_rng
        self.neighbours = neighbours
        self.frequency = frequency
        self.budget = budget
        self.eval_time = eval_time
        self.migrations = 0
        self.migrants_received = 0
        self.bad_messages = 0
        self._token = 0

    @property
    def node_id(self) -> int:
        return self.island.id

    def start(self, net: SimNetwork) -> None:
        net.schedule(self.node_id, 0.0, "generation")

    def handle(self, net: SimNetwork, ev: Event) -> None:
        if ev.kind == TIMER:
            self._generation(net)
            return
        try:
            msg = decode_message(ev.payload)
        except DecodeError:
            self.bad_messages += 1
            return
        if isinstance(msg, Ping) and msg.sender != self.node_id and msg.contribution.solution.genome.shape == (self.instance.dim,):
            self.island.inbox.append(msg.contribution)
            self.migrants_received += 1
        else:
            self.bad_messages += 1

    def _generation(self, net: SimNetwork) -> None:
        if self.node_id in self.budget.done:
            return
        if self.budget.used >= self.budget.budget:
            self.budget.done.add(self.node_id)
            return
        island_generation(self.island, self.instance, self.ops, self.rng)
        self.budget.used += self.island.size
        if self.neighbours and self.island.generation % self.frequency == 0:
            c = migration_event(self.island)
            target = self.neighbours[int(self.migration_rng.integers(len(self.neighbours)))]
            self._token += 1
            send(net, self.node_id, target, encode_message(Ping(self._token, c)), msg_class=MIGRANT)
            self.migrations += 1
        net.schedule(self.node_id, self.island.size * self.eval_time, "generation")

    @property
    def best_fitness(self) -> float:
        return self.island.elite.fitness

    @property
    def local_evaluations(self) -> int:
        return self.island.evaluations
