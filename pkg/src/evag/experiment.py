"""Trial execution, aggregation and CSV export for both models."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .benchmarks import ProblemInstance, ProblemKind, make_instance
from .evoagent import Blackboard, EvolvableAgent, register_agent
from .gossip import SchedulerState
from .island import MIGRATION_FREQUENCIES, new_island
from .netsim import LinkSpec, SimNetwork, build_complete, latency_stats
from .nodes import MIGRANT, AgentNode, Budget, IslandNode
from .operators import Individual, OperatorConfig

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "SummaryStats",
    "Trial",
    "derive_seed",
    "node_shares",
    "simulate",
    "run_trial",
    "run_experiment",
    "summarize",
    "export_csv",
    "read_results_csv",
    "RUN_COLUMNS",
]

MODELS = ("evag", "island")
MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, run_index: int) -> int:
    """Per-run seed: ``splitmix64(splitmix64(base_seed) ^ run_index)``."""
    return _splitmix64(_splitmix64(base_seed & MASK64) ^ (run_index & MASK64))


def node_shares(total: int, n: int) -> list[int]:
    """``total // n`` per node, the remainder going to the lowest ids."""
    q, r = divmod(total, n)
    return [q + (1 if i < r else 0) for i in range(n)]


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "evag"
    problem: ProblemKind = ProblemKind.ShiftedSphere
    dim: int | None = None
    instance_seed: int = 0
    rotate: bool | None = None
    nodes: int = 1
    population: int = 512
    budget: int = 2_500_000
    operators: OperatorConfig | None = None
    migration_frequency: int = 25
    network: LinkSpec = LinkSpec(0.002, 125e6)
    runs: int = 30
    base_seed: int = 0
    # simulated CPU seconds per evaluation
    eval_time: float = 1e-4
    turn_steps: int = 32
    stopping: str = "exact"

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if isinstance(self.problem, str):
            object.__setattr__(self, "problem", ProblemKind.parse(self.problem))
        if self.dim is None:
            object.__setattr__(self, "dim", self.problem.default_dim)
        if self.operators is None:
            sel = "paired" if self.model == "evag" else "tournament"
            object.__setattr__(self, "operators", OperatorConfig(selection=sel))
        if not 1 <= self.nodes <= 64:
            raise ValueError(f"nodes must be in [1, 64], got {self.nodes}")
        if self.population < self.nodes:
            raise ValueError("population must be at least the number of nodes")
        if self.model == "evag" and self.population < 2:
            raise ValueError("evolvable agents need a population of at least 2")
        if self.model == "island" and self.population // self.nodes < 2:
            raise ValueError("each island needs at least 2 individuals")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.runs < 0:
            raise ValueError("runs must be >= 0")
        if self.migration_frequency not in MIGRATION_FREQUENCIES:
            raise ValueError(f"migration_frequency must be one of {MIGRATION_FREQUENCIES}")
        if not self.eval_time > 0:
            raise ValueError("eval_time must be positive")
        if self.turn_steps < 1:
            raise ValueError("turn_steps must be >= 1")
        if self.stopping not in ("exact", "gossip"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")
        make_instance(self.problem, self.dim, self.instance_seed, self.rotate)  # validates dim/rotate

    def instance(self) -> ProblemInstance:
        return make_instance(self.problem, self.dim, self.instance_seed, self.rotate)

    @property
    def slack(self) -> int:
        """Largest permitted overshoot of the evaluation budget."""
        if self.model == "island":
            return max(node_shares(self.population, self.nodes)) - 1
        return self.population


@dataclass(frozen=True)
class RunResult:
    model: str
    problem: str
    nodes: int
    run: int
    best_fitness: float
    evaluations_used: int
    simulated_duration: float
    migrant_latency_mean: float = math.nan
    migrant_latency_sd: float = math.nan
    node_best: tuple[float, ...] = ()
    node_evaluations: tuple[int, ...] = ()
    # agent steps per node (evag) or generations per node (island)
    node_work: tuple[int, ...] = ()
    node_sizes: tuple[int, ...] = ()
    migrants: int = 0


@dataclass
class Trial:
    """A finished simulation, kept for inspection."""

    config: ExperimentConfig
    run_index: int
    instance: ProblemInstance
    net: SimNetwork
    nodes: list
    budget: Budget
    result: RunResult


def _init_individuals(size: int, instance: ProblemInstance, rng: np.random.Generator):
    from .benchmarks import evaluate_kernel

    args = instance.kernel_args()
    genomes = rng.uniform(instance.lower, instance.upper, size=(size, instance.dim))
    return [Individual(g, evaluate_kernel(g, *args)) for g in genomes]


def simulate(cfg: ExperimentConfig, run_index: int, record_log: bool = False, instance: ProblemInstance | None = None) -> Trial:
    """Build and execute one trial in the network simulator."""
    instance = instance if instance is not None else cfg.instance()
    seed = derive_seed(cfg.base_seed, run_index)
    streams = np.random.SeedSequence(seed).spawn(2 * cfg.nodes + 1)
    rngs = [np.random.default_rng(s) for s in streams]
    net = build_complete(cfg.nodes, cfg.network.latency, cfg.network.bandwidth, seed=int(streams[-1].generate_state(1)[0]),
                         record_log=record_log)
    if cfg.network.drop_probability:
        for key in net.links:
            net.links[key] = cfg.network
    budget = Budget(cfg.budget, cfg.nodes, cfg.stopping if cfg.model == "evag" else "exact")
    shares = node_shares(cfg.population, cfg.nodes)
    nodes: list = []
    agent_id = 0
    for node_id, share in enumerate(shares):
        main_rng, aux_rng = rngs[2 * node_id], rngs[2 * node_id + 1]
        peers = net.neighbours(node_id)
        if cfg.model == "evag":
            bb = Blackboard(node_id, instance.dim, peers)
            for ind in _init_individuals(share, instance, main_rng):
                register_agent(bb, EvolvableAgent(agent_id, ind))
                agent_id += 1
            sched = SchedulerState(node_id, peers)
            node = AgentNode(bb, sched, instance, cfg.operators, main_rng, aux_rng, budget, cfg.eval_time, cfg.turn_steps)
        else:
            island = new_island(node_id, share, instance, main_rng)
            node = IslandNode(island, instance, cfg.operators, main_rng, aux_rng, peers, cfg.migration_frequency, budget,
                              cfg.eval_time)
        net.attach(node_id, node)
        nodes.append(node)
    for node in nodes:
        node.start(net)
    net.run(stop=lambda: budget.finished)

    try:
        lat_mean, lat_sd, _ = latency_stats(net, MIGRANT)
        migrants = len(net.metrics[MIGRANT])
    except ValueError:
        lat_mean, lat_sd, migrants = math.nan, math.nan, 0
    node_best = tuple(float(n.best_fitness) for n in nodes)
    if cfg.model == "evag":
        work = tuple(n.steps for n in nodes)
    else:
        work = tuple(n.island.generation for n in nodes)
    result = RunResult(
        model=cfg.model,
        problem=cfg.problem.short_name,
        nodes=cfg.nodes,
        run=run_index,
        best_fitness=min(node_best),
        evaluations_used=sum(n.local_evaluations for n in nodes),
        simulated_duration=net.clock,
        migrant_latency_mean=lat_mean,
        migrant_latency_sd=lat_sd,
        node_best=node_best,
        node_evaluations=tuple(n.local_evaluations for n in nodes),
        node_work=work,
        node_sizes=tuple(shares),
        migrants=migrants,
    )
    return Trial(cfg, run_index, instance, net, nodes, budget, result)


def run_trial(cfg: ExperimentConfig, run_index: int) -> RunResult:
    return simulate(cfg, run_index).result


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[RunResult]:
    """All ``cfg.runs`` trials, sharing one problem instance."""
    instance = cfg.instance()
    out = []
    for i in range(cfg.runs):
        out.append(simulate(cfg, i, instance=instance).result)
        if progress is not None:
            progress(out[-1])
    return out


# -- statistics --------------------------------------------------------------


@dataclass(frozen=True)
class SummaryStats:
    """Distribution of best fitness (and per-run mean migrant latency) over runs.

    Quartiles use inclusive linear interpolation (numpy's default ``linear``
    method). ``t_statistic``/``t_df`` are Welch's unequal-variance test against
    a reference sample, when one was supplied.
    """

    count: int
    mean: float
    sd: float
    min: float
    q1: float
    median: float
    q3: float
    max: float
    latency_mean: float = math.nan
    latency_sd: float = math.nan
    latency_min: float = math.nan
    latency_median: float = math.nan
    latency_max: float = math.nan
    t_statistic: float = math.nan
    t_df: float = math.nan
    key: tuple[tuple[str, str], ...] = field(default=())


def _describe(xs: np.ndarray) -> tuple[float, float, float, float, float, float, float]:
    q = np.quantile(xs, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    sd = float(np.std(xs, ddof=1)) if xs.size > 1 else math.nan
    return float(np.mean(xs)), sd, *(float(v) for v in q)


def summarize(results, reference=None, key=()) -> SummaryStats:
    results = list(results)
    if not results:
        raise ValueError("cannot summarize an empty result set")
    best = np.array([r.best_fitness for r in results], dtype=np.float64)
    mean, sd, lo, q1, med, q3, hi = _describe(best)
    lat = np.array([r.migrant_latency_mean for r in results], dtype=np.float64)
    lat = lat[np.isfinite(lat)]
    lat_fields = {}
    if lat.size:
        lm, ls, lmin, _, lmed, _, lmax = _describe(lat)
        lat_fields = dict(latency_mean=lm, latency_sd=ls, latency_min=lmin, latency_median=lmed, latency_max=lmax)
    t_fields = {}
    if reference is not None:
        ref = np.array([r.best_fitness for r in reference], dtype=np.float64)
        if ref.size < 2 or best.size < 2:
            raise ValueError("a t statistic needs at least two results on each side")
        res = sps.ttest_ind(best, ref, equal_var=False)
        t_fields = dict(t_statistic=float(res.statistic), t_df=float(res.df))
    return SummaryStats(len(results), mean, sd, lo, q1, med, q3, hi, key=tuple(key), **lat_fields, **t_fields)


def summarize_groups(results, group_by=("model", "problem", "nodes")) -> list[SummaryStats]:
    groups: dict[tuple, list] = {}
    for r in results:
        k = tuple(str(getattr(r, g)) for g in group_by)
        groups.setdefault(k, []).append(r)

    def order(k):
        return tuple((0, int(v), "") if v.isdigit() else (1, 0, v) for v in k)

    return [summarize(groups[k], key=tuple(zip(group_by, k))) for k in sorted(groups, key=order)]


# -- CSV ---------------------------------------------------------------------

RUN_COLUMNS = (
    "model", "problem", "nodes", "run", "best_fitness", "evaluations", "sim_time_s",
    "migrant_latency_ms_mean", "migrant_latency_ms_sd",
)
SUMMARY_COLUMNS = (
    "runs", "best_mean", "best_sd", "best_min", "best_q1", "best_median", "best_q3", "best_max",
    "migrant_latency_ms_mean", "migrant_latency_ms_sd", "t_statistic", "t_df",
)


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _run_row(r: RunResult) -> list[str]:
    return [
        r.model, r.problem, str(r.nodes), str(r.run), _num(r.best_fitness), str(r.evaluations_used),
        _num(r.simulated_duration), _num(1e3 * r.migrant_latency_mean), _num(1e3 * r.migrant_latency_sd),
    ]


def _summary_row(s: SummaryStats) -> list[str]:
    return [str(s.count)] + [
        _num(v) for v in (s.mean, s.sd, s.min, s.q1, s.median, s.q3, s.max,
                          1e3 * s.latency_mean, 1e3 * s.latency_sd, s.t_statistic, s.t_df)
    ]


def export_csv(records, destination) -> None:
    """Write run results or summaries as CSV (17 significant digits).

    ``destination`` is a path or a text stream. Latencies are in milliseconds.
    """
    records = list(records)
    if records and isinstance(records[0], SummaryStats):
        keys = [k for k, _ in records[0].key]
        header = keys + list(SUMMARY_COLUMNS)
        rows = [[v for _, v in s.key] + _summary_row(s) for s in records]
    else:
        header = list(RUN_COLUMNS)
        rows = [_run_row(r) for r in records]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if hasattr(destination, "write"):
        destination.write(buf.getvalue())
        return
    try:
        Path(destination).write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write results to {destination}: {exc.strerror or exc}") from exc


def read_results_csv(path) -> list[RunResult]:
    """Load a file written by :func:`export_csv` from run results."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc.strerror or exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    missing = set(RUN_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    out = []
    for row in reader:
        out.append(RunResult(
            model=row["model"],
            problem=row["problem"],
            nodes=int(row["nodes"]),
            run=int(row["run"]),
            best_fitness=float(row["best_fitness"]),
            evaluations_used=int(row["evaluations"]),
            simulated_duration=float(row["sim_time_s"]),
            migrant_latency_mean=float(row["migrant_latency_ms_mean"]) / 1e3,
            migrant_latency_sd=float(row["migrant_latency_ms_sd"]) / 1e3,
        ))
    return out


def with_nodes(cfg: ExperimentConfig, n: int) -> ExperimentConfig:
    return replace(cfg, nodes=n)
