#!/usr/bin/env python3
"""Mean one-way migrant latency per model and node count.

Agents migrate whenever their gossip interval elapses, islands every few
generations; both use the same simulated links, so the latencies compare
like for like. Heterogeneous links can be emulated with ``--jitter``, which
draws each link's latency uniformly from ``latency * [1, 1 + jitter]``.

    python3 scripts/migrant_latency.py --problem sphere --budget 500000 --runs 5
"""
import argparse
import csv
import sys

import numpy as np

from evag.experiment import ExperimentConfig, simulate
from evag.netsim import LinkSpec, latency_stats
from evag.nodes import MIGRANT


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="sphere")
    ap.add_argument("--budget", type=int, default=500_000)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--max-nodes", type=int, default=8)
    ap.add_argument("--latency-ms", type=float, default=2.0)
    ap.add_argument("--jitter", type=float, default=0.0)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["model", "nodes", "run", "migrants", "latency_ms_mean", "latency_ms_sd", "final_delta_t_ms"])
    for n in range(2, args.max_nodes + 1):
        for model in ("evag", "island"):
            cfg = ExperimentConfig(model=model, problem=args.problem, nodes=n, budget=args.budget, runs=args.runs,
                                   network=LinkSpec(args.latency_ms / 1e3, 125e6))
            for i in range(args.runs):
                trial = _run(cfg, i, args.jitter)
                try:
                    mean, sd, count = latency_stats(trial.net, MIGRANT)
                except ValueError:
                    mean = sd = float("nan")
                    count = 0
                dt = np.mean([node.sched.delta_t for node in trial.nodes]) if model == "evag" else float("nan")
                w.writerow([model, n, i, count, "%.6f" % (1e3 * mean), "%.6f" % (1e3 * sd), "%.6f" % (1e3 * dt)])


def _run(cfg, run_index, jitter):
    if jitter <= 0:
        return simulate(cfg, run_index)
    # rebuild with per-link latencies; simulate() builds uniform links, so patch the factory
    import evag.experiment as ex

    rng = np.random.default_rng(run_index)
    original = ex.build_complete

    def jittered(n, latency, bandwidth, seed=0, record_log=False):
        net = original(n, latency, bandwidth, seed, record_log)
        for key in sorted(net.links):
            net.links[key] = LinkSpec(latency * (1 + jitter * rng.random()), bandwidth)
        return net

    ex.build_complete = jittered
    try:
        return simulate(cfg, run_index)
    finally:
        ex.build_complete = original


if __name__ == "__main__":
    main()
