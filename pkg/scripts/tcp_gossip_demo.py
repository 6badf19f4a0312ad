#!/usr/bin/env python3
"""Evolvable agents gossiping over real TCP sockets on localhost.

Each node runs its agents in one thread and its scheduler in another. Pings
and pongs use the same length-prefixed wire frames as the simulator. Nodes
stop on their own gossip-based estimate of the global evaluation count, so
the run is not deterministic. This is a demonstration only.

    python3 scripts/tcp_gossip_demo.py --nodes 4 --budget 400000
"""
import argparse
import socket
import threading
import time

import numpy as np

from evag.benchmarks import ProblemKind, make_instance
from evag.evoagent import Blackboard, EvolvableAgent, global_evaluations, register_agent
from evag.experiment import _init_individuals, node_shares
from evag.gossip import (
    DecodeError,
    Ping,
    Pong,
    SchedulerState,
    decode_message,
    encode_message,
    handle_ping,
    handle_pong,
    read_frame,
    scheduler_tick,
    write_frame,
)
from evag.operators import OperatorConfig


class Node:
    def __init__(self, node_id, n, instance, agents, budget, seed):
        self.id = node_id
        self.instance = instance
        self.budget = budget
        self.lock = threading.Lock()
        self.bb = Blackboard(node_id, instance.dim, range(n))
        seeds = np.random.SeedSequence([seed, node_id]).spawn(2)
        self.evo_rng, self.gossip_rng = (np.random.default_rng(s) for s in seeds)
        for i, ind in enumerate(_init_individuals(agents, instance, self.evo_rng)):
            register_agent(self.bb, EvolvableAgent(i, ind))
        self.sched = SchedulerState(node_id, list(range(n)))
        self.server = socket.create_server(("127.0.0.1", 0))
        self.port = self.server.getsockname()[1]
        self.peers: dict[int, tuple] = {}
        self.done = threading.Event()
        self.t0 = time.monotonic()

    def now(self):
        return time.monotonic() - self.t0

    def connect(self, ports):
        for peer, port in ports.items():
            if peer == self.id:
                continue
            s = socket.create_connection(("127.0.0.1", port))
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self.peers[peer] = (s, s.makefile("wb"), threading.Lock())
            threading.Thread(target=self._read_pongs, args=(s.makefile("rb"),), daemon=True).start()

    def serve(self):
        self.server.settimeout(0.2)
        while not self.done.is_set():
            try:
                conn, _ = self.server.accept()
            except socket.timeout:
                continue
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            threading.Thread(target=self._answer_pings, args=(conn,), daemon=True).start()

    def _answer_pings(self, conn):
        rf, wf = conn.makefile("rb"), conn.makefile("wb")
        while True:
            try:
                frame = read_frame(rf)
                if frame is None:
                    return
                msg = decode_message(frame)
            except (OSError, DecodeError):
                return
            if isinstance(msg, Ping):
                with self.lock:
                    pong = handle_ping(self.sched, self.bb.cache, msg, self.now())
                if pong is not None:
                    write_frame(wf, encode_message(pong))
                    wf.flush()

    def _read_pongs(self, rf):
        while True:
            try:
                frame = read_frame(rf)
                if frame is None:
                    return
                msg = decode_message(frame)
            except (OSError, DecodeError):
                return
            if isinstance(msg, Pong):
                with self.lock:
                    handle_pong(self.sched, msg.token, self.now())

    def evolve(self, ops):
        while not self.done.is_set():
            with self.lock:
                if global_evaluations(self.bb) >= self.budget:
                    self.done.set()
                    return
                self.bb.run_turn(self.instance, ops, self.evo_rng, 64)

    def gossip(self):
        while not self.done.is_set():
            with self.lock:
                out = scheduler_tick(self.sched, self.bb, self.gossip_rng, self.now())
                wait = self.sched.delta_t
            if out is not None:
                target, ping = out
                _, wf, lock = self.peers[target]
                with lock:
                    write_frame(wf, encode_message(ping))
                    wf.flush()
            self.done.wait(wait)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=4)
    ap.add_argument("--problem", default="sphere")
    ap.add_argument("--population", type=int, default=512)
    ap.add_argument("--budget", type=int, default=400_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    instance = make_instance(ProblemKind.parse(args.problem))
    shares = node_shares(args.population, args.nodes)
    nodes = [Node(i, args.nodes, instance, shares[i], args.budget, args.seed) for i in range(args.nodes)]
    ports = {nd.id: nd.port for nd in nodes}
    threads = [threading.Thread(target=nd.serve, daemon=True) for nd in nodes]
    for t in threads:
        t.start()
    for nd in nodes:
        nd.connect(ports)
    ops = OperatorConfig()
    work = [threading.Thread(target=f) for nd in nodes for f in (lambda nd=nd: nd.evolve(ops), nd.gossip)]
    start = time.monotonic()
    for t in work:
        t.start()
    for t in work:
        t.join()
    elapsed = time.monotonic() - start
    for nd in nodes:
        nd.server.close()
        print(f"node {nd.id}: best {nd.bb.best_fitness:.4f}  local evals {nd.bb.local_evaluations}  "
              f"cache {len(nd.bb.cache)}  delta_t {1e3 * nd.sched.delta_t:.3f} ms  pings {nd.sched.sent}")
    total = sum(nd.bb.local_evaluations for nd in nodes)
    print(f"total evaluations {total} (budget {args.budget}) in {elapsed:.1f} s wall time; "
          f"best {min(nd.bb.best_fitness for nd in nodes):.4f}")


if __name__ == "__main__":
    main()
