"""Command line interface.

    evag run --model evag --problem sphere --nodes 4 --runs 30 --out runs.csv
    evag sweep --model island --problem schwefel --nodes-from 1 --nodes-to 8 --out sweep.csv
    evag summarize --in sweep.csv --group-by model,problem,nodes
    evag instance export --problem rastrigin --seed 3 --out rastrigin.txt

Any run/sweep flag may also come from ``--config FILE`` (``key = value``
lines, ``#`` comments); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .benchmarks import ProblemKind, format_instance, make_instance, save_instance
from .experiment import ExperimentConfig, export_csv, read_results_csv, simulate, summarize_groups
from .netsim import LinkSpec
from .operators import OperatorConfig

PROG = "evag"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line diagnostics, no usage dump
        raise CliError(message)


_MODEL_ALIASES = {"evag": "evag", "evolvableagent": "evag", "agents": "evag", "island": "island", "islands": "island"}

# option name -> (type, default); defaults apply after config-file merging
_RUN_OPTIONS = {
    "model": (str, "evag"),
    "problem": (str, "sphere"),
    "dim": (int, None),
    "instance_seed": (int, 0),
    "no_rotation": (bool, False),
    "nodes": (int, 1),
    "population": (int, 512),
    "budget": (int, 2_500_000),
    "runs": (int, 30),
    "seed": (int, 0),
    "migration_freq": (int, 25),
    "latency_ms": (float, 2.0),
    "bandwidth": (float, 125e6),
    "drop_prob": (float, 0.0),
    "eval_time_us": (float, 100.0),
    "turn_steps": (int, 32),
    "stopping": (str, "exact"),
    "selection": (str, None),
    "pc": (float, 0.9),
    "pm": (float, 0.01),
    "k": (int, 2),
    "out": (str, None),
    "event_log": (str, None),
    "nodes_from": (int, 1),
    "nodes_to": (int, 8),
}
_HELP = {
    "model": "evag (evolvable agents) or island",
    "problem": "sphere, rastrigin or schwefel",
    "dim": "problem dimension (default: 100 / 30 / 10)",
    "instance_seed": "seed of the problem instance, shared by all runs",
    "no_rotation": "unrotated Rastrigin",
    "population": "total population over all nodes",
    "budget": "total evaluations per run",
    "seed": "base seed; run i uses a seed mixed from it and i",
    "migration_freq": "island migration period in generations (25, 50, 75, 100)",
    "latency_ms": "one-way link latency in milliseconds",
    "bandwidth": "link bandwidth in bytes per second",
    "drop_prob": "per-message drop probability on every link",
    "eval_time_us": "simulated CPU time per evaluation in microseconds",
    "turn_steps": "agent steps per node scheduling turn",
    "stopping": "exact (global counter) or gossip (per-node estimate)",
    "selection": "paired or tournament (default depends on the model)",
    "out": "CSV destination (default: stdout)",
    "event_log": "write the event log of each run here ('{run}' is replaced by the run index)",
}


def _add_run_options(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--config", help="key = value file supplying any option")
    for name, (typ, _) in _RUN_OPTIONS.items():
        if name.startswith("nodes_") and not sweep:
            continue
        if name == "nodes" and sweep:
            continue
        flag = "--" + name.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, action="store_true", default=None, help=_HELP.get(name))
        else:
            p.add_argument(flag, type=typ, default=None, help=_HELP.get(name))
    p.add_argument("--quiet", action="store_true", help="no progress lines on stderr")


def _read_config(path: str) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror or exc}") from None
    out = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _RUN_OPTIONS:
            raise CliError(f"{path}:{no}: unknown option {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value: str):
    typ = _RUN_OPTIONS[key][0]
    if typ is bool:
        v = value.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise CliError(f"option {key}: expected a boolean, got {value!r}")
    try:
        return typ(value)
    except ValueError:
        raise CliError(f"option {key}: invalid value {value!r}") from None


def _merged(args: argparse.Namespace) -> dict:
    opts = {k: d for k, (_, d) in _RUN_OPTIONS.items()}
    if args.config:
        opts.update({k: _coerce(k, v) for k, v in _read_config(args.config).items()})
    for k in _RUN_OPTIONS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def _config(opts: dict) -> ExperimentConfig:
    model = _MODEL_ALIASES.get(str(opts["model"]).lower())
    if model is None:
        raise CliError(f"unknown model {opts['model']!r}; expected evag or island")
    try:
        problem = ProblemKind.parse(opts["problem"])
        selection = opts["selection"] or ("paired" if model == "evag" else "tournament")
        ops = OperatorConfig(opts["pc"], opts["pm"], opts["k"], selection)
        return ExperimentConfig(
            model=model,
            problem=problem,
            dim=opts["dim"],
            instance_seed=opts["instance_seed"],
            rotate=False if opts["no_rotation"] else None,
            nodes=opts["nodes"],
            population=opts["population"],
            budget=opts["budget"],
            operators=ops,
            migration_frequency=opts["migration_freq"],
            network=LinkSpec(opts["latency_ms"] / 1e3, opts["bandwidth"], opts["drop_prob"]),
            runs=opts["runs"],
            base_seed=opts["seed"],
            eval_time=opts["eval_time_us"] / 1e6,
            turn_steps=opts["turn_steps"],
            stopping=opts["stopping"],
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _execute(configs, opts, quiet: bool) -> list:
    results = []
    for cfg in configs:
        instance = cfg.instance()
        for i in range(cfg.runs):
            trial = simulate(cfg, i, record_log=opts["event_log"] is not None, instance=instance)
            if opts["event_log"]:
                path = str(opts["event_log"])
                path = path.replace("{run}", str(i)).replace("{nodes}", str(cfg.nodes))
                trial.net.export_log(path)
            r = trial.result
            results.append(r)
            if not quiet:
                print(f"{r.model} {r.problem} n={r.nodes} run={r.run} best={r.best_fitness:.6f} "
                      f"evals={r.evaluations_used} sim={r.simulated_duration:.3f}s", file=sys.stderr)
    return results


def _write(records, out) -> None:
    if out:
        export_csv(records, out)
    else:
        export_csv(records, sys.stdout)


def cmd_run(args) -> None:
    opts = _merged(args)
    cfg = _config(opts)
    _write(_execute([cfg], opts, args.quiet), opts["out"])


def cmd_sweep(args) -> None:
    opts = _merged(args)
    lo, hi = opts["nodes_from"], opts["nodes_to"]
    if not 1 <= lo <= hi:
        raise CliError(f"invalid node range {lo}..{hi}")
    configs = [_config({**opts, "nodes": n}) for n in range(lo, hi + 1)]
    _write(_execute(configs, opts, args.quiet), opts["out"])


def cmd_summarize(args) -> None:
    results = []
    for path in args.inputs:
        try:
            results.extend(read_results_csv(path))
        except (OSError, ValueError) as exc:
            raise CliError(str(exc)) from None
    keys = tuple(k.strip() for k in args.group_by.split(",") if k.strip())
    allowed = {"model", "problem", "nodes"}
    if not set(keys) <= allowed:
        raise CliError(f"--group-by accepts {sorted(allowed)}")
    if not results:
        raise CliError("no results to summarize")
    _write(summarize_groups(results, keys), args.out)


def cmd_instance_export(args) -> None:
    try:
        kind = ProblemKind.parse(args.problem)
        inst = make_instance(kind, args.dim, args.seed, False if args.no_rotation else None)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.out:
        save_instance(inst, args.out)
    else:
        sys.stdout.write(format_instance(inst))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Evolvable agents vs. island model on a simulated network")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="repeated trials of one configuration")
    _add_run_options(p, sweep=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="trials over a range of node counts")
    _add_run_options(p, sweep=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("summarize", help="aggregate a run CSV into summary statistics")
    p.add_argument("--in", dest="inputs", action="append", required=True, help="run CSV (repeatable)")
    p.add_argument("--group-by", default="model,problem,nodes")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("instance", help="problem instance utilities")
    isub = p.add_subparsers(dest="instance_command", required=True, parser_class=_Parser)
    e = isub.add_parser("export", help="write an instance as text")
    e.add_argument("--problem", required=True)
    e.add_argument("--dim", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--no-rotation", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_instance_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except CliError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
