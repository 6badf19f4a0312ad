import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evag.benchmarks import ProblemKind, evaluate, make_instance
from evag.evoagent import (
    Blackboard,
    EvolvableAgent,
    agent_step,
    global_evaluations,
    record_evaluation,
    register_agent,
    selection_pool,
)
from evag.gossip import Contribution, cache_insert
from evag.operators import Individual, OperatorConfig, select_parents, uniform_crossover, uniform_mutation

INST = make_instance(ProblemKind.ShiftedSphere, 6, 3)
CFG = OperatorConfig()


def random_individual(rng, inst=INST):
    g = rng.uniform(inst.lower, inst.upper)
    return Individual(g, evaluate(inst, g))


def board(n_agents, seed=0, node_id=0, inst=INST):
    rng = np.random.default_rng(seed)
    bb = Blackboard(node_id, inst.dim)
    agents = [EvolvableAgent(i, random_individual(rng, inst)) for i in range(n_agents)]
    for a in agents:
        register_agent(bb, a)
    return bb, agents


def test_agent_requires_evaluated_solution():
    with pytest.raises(ValueError):
        EvolvableAgent(0, Individual(np.zeros(6)))


def test_register_64_agents():
    bb, agents = board(64)
    pool = selection_pool(bb)
    assert len(pool) == 64 and bb.agent_count == 64
    assert pool == [a.current for a in agents]


def test_duplicate_registration_rejected():
    bb, agents = board(3)
    dup = EvolvableAgent(1, random_individual(np.random.default_rng(9)))
    with pytest.raises(ValueError):
        register_agent(bb, dup)
    assert len(selection_pool(bb)) == 3 and bb.agents[1] is agents[1]


def test_register_wrong_dimension():
    bb = Blackboard(0, 6)
    with pytest.raises(ValueError):
        register_agent(bb, EvolvableAgent(0, Individual(np.zeros(3), 1.0)))


def test_empty_blackboard_pool():
    with pytest.raises(ValueError):
        selection_pool(Blackboard(0, 6))


def test_pool_includes_cache_entries():
    bb, _ = board(4)
    rng = np.random.default_rng(1)
    assert len(selection_pool(bb)) == 4
    for peer in (3, 1, 2):
        cache_insert(bb.cache, Contribution(peer, 10, random_individual(rng)))
    pool = selection_pool(bb)
    assert len(pool) == 7
    # migrants follow the agents, ordered by node id
    assert pool[4:] == [bb.cache.entries[p].solution for p in (1, 2, 3)]


def test_pool_reflects_cache_update():
    bb, _ = board(4)
    rng = np.random.default_rng(2)
    old, new = random_individual(rng), random_individual(rng)
    cache_insert(bb.cache, Contribution(1, 10, old))
    assert old in selection_pool(bb)
    cache_insert(bb.cache, Contribution(1, 20, new))
    pool = selection_pool(bb)
    assert new in pool and old not in pool and len(pool) == 5


def test_fixed_point_step():
    rng = np.random.default_rng(3)
    s = random_individual(rng)
    bb = Blackboard(0, 6)
    agents = [EvolvableAgent(i, s) for i in range(3)]
    for a in agents:
        register_agent(bb, a)
    out = agent_step(agents[0], bb, INST, OperatorConfig(pm=0.0), rng)
    assert not out.replaced and out.child_fitness == s.fitness
    assert agents[0].current == s and bb.local_evaluations == 1


def test_better_child_updates_best_and_agent():
    bb, agents = board(2, seed=4)
    optimum = Individual(INST.shift, evaluate(INST, INST.shift))
    cache_insert(bb.cache, Contribution(1, 0, optimum))
    cache_insert(bb.cache, Contribution(2, 0, optimum))
    # pc=0 and pm=0: the child copies the first parent, which is the best sampled member
    rng = np.random.default_rng(0)
    cfg = OperatorConfig(pc=0.0, pm=0.0, k=2)
    for _ in range(40):
        agent_step(agents[0], bb, INST, cfg, rng)
        if agents[0].current.fitness == optimum.fitness:
            break
    assert agents[0].current == optimum
    assert bb.best_fitness == -450.0


def test_worse_child_does_not_replace():
    rng = np.random.default_rng(5)
    bb = Blackboard(0, 6)
    good = Individual(INST.shift, evaluate(INST, INST.shift))
    a = EvolvableAgent(0, good)
    register_agent(bb, a)
    register_agent(bb, EvolvableAgent(1, random_individual(rng)))
    for _ in range(50):
        out = agent_step(a, bb, INST, OperatorConfig(pm=0.5), rng)
        assert not out.replaced
    assert a.current == good


def test_step_errors():
    bb, agents = board(1)
    with pytest.raises(ValueError):
        agent_step(agents[0], bb, INST, CFG, np.random.default_rng(0))  # pool of one
    bb2, agents2 = board(3)
    other = make_instance(ProblemKind.ShiftedSphere, 4, 0)
    with pytest.raises(ValueError):
        agent_step(agents2[0], bb2, other, CFG, np.random.default_rng(0))
    with pytest.raises(ValueError):
        agent_step(agents2[0], bb, INST, CFG, np.random.default_rng(0))


def test_record_evaluation_counts_and_tracks_minimum():
    bb = Blackboard(0, 1)
    for f in (5.0, 3.0, 4.0):
        record_evaluation(bb, Individual([f], f))
    assert bb.local_evaluations == 3 and bb.best_fitness == 3.0


def test_record_evaluation_tie_keeps_first():
    bb = Blackboard(0, 1)
    record_evaluation(bb, Individual([1.0], 2.0))
    record_evaluation(bb, Individual([9.0], 2.0))
    assert bb.best_sol.genome[0] == 1.0


def test_record_evaluation_rejects_unevaluated():
    with pytest.raises(ValueError):
        record_evaluation(Blackboard(0, 1), Individual([1.0]))


def test_global_evaluations_sum():
    bb = Blackboard(0, 1)
    assert global_evaluations(bb) == 0
    bb.local_evaluations = 100
    assert global_evaluations(bb) == 100
    bb.local_evaluations = 50
    cache_insert(bb.cache, Contribution(1, 30, Individual([0.0], 1.0)))
    cache_insert(bb.cache, Contribution(2, 20, Individual([0.0], 1.0)))
    assert global_evaluations(bb) == 100


def reference_step(agent_idx, pool, instance, cfg, rng):
    """One agent iteration written with the public object-level operators."""
    p1, p2 = select_parents(pool, cfg.k, rng, paired=cfg.paired)
    child = uniform_crossover(p1, p2, cfg.pc, rng)
    child = uniform_mutation(child, cfg.pm, (instance.lower, instance.upper), rng)
    f = evaluate(instance, child)
    if f < pool[agent_idx].fitness:
        pool[agent_idx] = Individual(child, f)
    return f


@pytest.mark.parametrize("kind", list(ProblemKind))
@pytest.mark.parametrize("selection", ["paired", "tournament"])
def test_compiled_step_matches_reference(kind, selection):
    inst = make_instance(kind, 5, 2)
    cfg = OperatorConfig(pm=0.2, k=3, selection=selection)
    bb, agents = board(6, seed=7, inst=inst)
    rng_migr = np.random.default_rng(11)
    cache_insert(bb.cache, Contribution(4, 1, random_individual(rng_migr, inst)))
    pool = selection_pool(bb)
    ra, rb = np.random.default_rng(99), np.random.default_rng(99)
    for t in range(300):
        i = t % 6
        got = agent_step(agents[i], bb, inst, cfg, ra)
        want = reference_step(i, pool, inst, cfg, rb)
        assert got.child_fitness == want
        assert selection_pool(bb) == pool
    assert bb.best_fitness <= min(p.fitness for p in pool)


def test_run_turn_matches_agent_steps():
    cfg = OperatorConfig(pm=0.1)
    bb1, agents1 = board(5, seed=8)
    bb2, _ = board(5, seed=8)
    r1, r2 = np.random.default_rng(1), np.random.default_rng(1)
    for t in range(23):
        agent_step(agents1[t % 5], bb1, INST, cfg, r1)
    bb2.run_turn(INST, cfg, r2, 10)
    bb2.run_turn(INST, cfg, r2, 13)
    assert selection_pool(bb1) == selection_pool(bb2)
    assert bb1.local_evaluations == bb2.local_evaluations == 23
    assert bb1.best_sol == bb2.best_sol


@settings(max_examples=25)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.integers(1, 200), st.sampled_from(list(ProblemKind)))
def test_agent_invariants(n_agents, seed, steps, kind):
    inst = make_instance(kind, 4, seed % 97)
    bb, agents = board(n_agents, seed=seed, inst=inst)
    rng = np.random.default_rng(seed)
    cfg = OperatorConfig(pm=0.1)
    history = {a.id: [a.current.fitness] for a in agents}
    held_min = min(a.current.fitness for a in agents)
    for t in range(steps):
        a = agents[t % n_agents]
        agent_step(a, bb, inst, cfg, rng)
        history[a.id].append(a.current.fitness)
        held_min = min(held_min, a.current.fitness)
        assert a.current.evaluated
        assert bb.best_fitness <= held_min
    assert bb.local_evaluations == steps
    for seq in history.values():
        assert all(y <= x for x, y in zip(seq, seq[1:]))
    for a in agents:
        g = a.current.genome
        assert np.all((g >= inst.lower) & (g <= inst.upper))
        assert evaluate(inst, g) == a.current.fitness
    assert bb.best_sol.fitness == evaluate(inst, bb.best_sol.genome)
    assert not math.isinf(bb.best_fitness)
