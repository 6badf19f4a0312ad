#!/usr/bin/env python3
"""Best fitness of both models for n = 1..8 nodes on one problem.

Writes every run to ``<out>/<problem>_runs.csv`` and one summary row per
(model, nodes) to ``<out>/<problem>_summary.csv``. The summary rows carry the
Welch t statistic of the agents against the islands at the same node count.

    python3 scripts/scaling_sweep.py --problem sphere --runs 30
    python3 scripts/scaling_sweep.py --problem schwefel --budget 500000 --runs 10
"""
import argparse
import sys
from pathlib import Path

from evag.experiment import ExperimentConfig, export_csv, run_experiment, summarize


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="sphere")
    ap.add_argument("--budget", type=int, default=2_500_000)
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--max-nodes", type=int, default=8)
    ap.add_argument("--migration-freq", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs, summary = [], []
    for n in range(1, args.max_nodes + 1):
        per_model = {}
        for model in ("evag", "island"):
            cfg = ExperimentConfig(model=model, problem=args.problem, nodes=n, budget=args.budget, runs=args.runs,
                                   base_seed=args.seed, migration_frequency=args.migration_freq)
            per_model[model] = run_experiment(cfg, progress=lambda r: print(
                f"{r.model} n={r.nodes} run={r.run} best={r.best_fitness:.4f}", file=sys.stderr))
            runs.extend(per_model[model])
        ref = per_model["island"] if args.runs > 1 else None
        summary.append(summarize(per_model["evag"], reference=ref, key=(("model", "evag"), ("nodes", str(n)))))
        summary.append(summarize(per_model["island"], key=(("model", "island"), ("nodes", str(n)))))
        print(f"n={n}: evag {summary[-2].mean:.4f}  island {summary[-1].mean:.4f}", file=sys.stderr)

    export_csv(runs, out / f"{args.problem}_runs.csv")
    export_csv(summary, out / f"{args.problem}_summary.csv")


if __name__ == "__main__":
    main()
