"""Command-line surface: single-cell runs, full sweeps, and attribution.

Every command is deterministic given its inputs, flags, and seed, and all
output files are written atomically (temp file + rename). Exit codes:
0 success, 1 configuration or validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .allocation import ALGORITHM_ALIASES, ALGORITHMS, AttributeWeights, DEFAULT_TAU_CAP
from .attribution import MAX_EXACT_PLAYERS, outcome_game, shapley_exact, shapley_monte_carlo
from .domain import bundled_data_dir, load_agents, load_markets, load_tasks, load_taxonomy
from .errors import ConfigError, MarketError, TrialNotFound
from .execsim import RandomStream, trial_from_record, trial_to_record
from .exchange import DEFAULT_EPSILON, DEFAULT_MIN_PARTICIPANTS
from .experiments import (
    DEFAULT_SEED,
    DEFAULT_TRIALS_PER_CELL,
    ExperimentPlan,
    build_stats_report,
    render_report_json,
    render_summary_csv,
    run_cell,
    summarize,
)


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _add_data_flags(parser: argparse.ArgumentParser):
    data = bundled_data_dir()
    parser.add_argument("--agents", default=str(data / "agents.json"), help="agent profiles JSON")
    parser.add_argument("--tasks", default=str(data / "tasks"), help="task file or directory of task files")
    parser.add_argument("--markets", default=str(data / "markets.json"), help="market conditions JSON")
    parser.add_argument("--taxonomy", default=str(data / "taxonomy.json"), help="capability taxonomy JSON")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--weights", default=None, metavar="W_CAP,W_Q,W_COST,W_TIME",
                        help="attribute weights, four comma-separated values summing to 1")
    parser.add_argument("--tau-cap", type=float, default=DEFAULT_TAU_CAP,
                        help="capability threshold for greedy/cost-optimal")
    parser.add_argument("--q-min", type=float, default=0.0, help="hub qualification threshold")
    parser.add_argument("--bigN", type=int, default=DEFAULT_MIN_PARTICIPANTS,
                        help="participants needed before an auction is used")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="GSP payment increment")


def _parse_weights(raw: str | None) -> AttributeWeights:
    if raw is None:
        return AttributeWeights()
    parts = raw.split(",")
    if len(parts) != 4:
        raise ConfigError(f"--weights needs exactly four comma-separated values, got {raw!r}")
    try:
        w = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"--weights values must be numeric: {raw!r}") from exc
    try:
        return AttributeWeights(*w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_algorithm(name: str) -> str:
    canonical = ALGORITHM_ALIASES.get(name, name)
    if canonical not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    return canonical


def _load_inputs(args):
    taxonomy = load_taxonomy(args.taxonomy)
    agents = load_agents(args.agents, taxonomy)
    tasks = load_tasks(args.tasks, taxonomy)
    markets = load_markets(args.markets)
    return taxonomy, agents, tasks, markets


def _pick(items, key, label, selector):
    matches = [x for x in items if key(x) == selector]
    if not matches:
        available = ", ".join(key(x) for x in items)
        raise ConfigError(f"unknown {label} {selector!r}; available: {available}")
    return matches[0]


def _run_cells(plan: ExperimentPlan, agents, jobs: int):
    """Run every cell of the plan, optionally across processes.

    Cell substreams are keyed by cell labels, never by execution order, so
    the aggregated outcome list is identical for any job count.
    """
    cells = [
        (task, market, algorithm)
        for task in plan.tasks
        for market in plan.markets
        for algorithm in plan.algorithms
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_worker, [(plan, agents, c) for c in cells]))
    else:
        results = [_cell_worker((plan, agents, c)) for c in cells]

    outcomes, failures = [], []
    for cell_outcomes, failure in results:
        outcomes.extend(cell_outcomes)
        if failure is not None:
            failures.append(failure)
    return outcomes, failures


def _cell_worker(payload):
    plan, agents, (task, market, algorithm) = payload
    return run_cell(plan, agents, task, market, algorithm)


def _emit(args, plan: ExperimentPlan, outcomes, failures):
    out_dir = Path(args.out)
    trials_text = "".join(json.dumps(trial_to_record(t)) + "\n" for t in outcomes)
    summaries = summarize(outcomes) if outcomes else []
    stats = build_stats_report(outcomes) if len({o.algorithm for o in outcomes}) >= 2 else None
    plan_info = {
        "tasks": [t.id for t in plan.tasks],
        "markets": [m.label for m in plan.markets],
        "algorithms": list(plan.algorithms),
        "trials_per_cell": plan.trials_per_cell,
        "master_seed": plan.master_seed,
        "failures": [
            {"task": f.task_id, "market": f.market_label, "algorithm": f.algorithm, "error": f.error}
            for f in failures
        ],
    }
    write_atomic(out_dir / "trials.jsonl", trials_text)
    write_atomic(out_dir / "summary.csv", render_summary_csv(summaries))
    write_atomic(out_dir / "report.json", render_report_json(summaries, stats, plan_info))
    print(f"wrote {len(outcomes)} trials to {out_dir/'trials.jsonl'}")
    if failures:
        print(f"{len(failures)} cell(s) failed; see report.json", file=sys.stderr)


def cmd_run(args) -> int:
    taxonomy, agents, tasks, markets = _load_inputs(args)
    task = _pick(tasks, lambda t: t.id, "task", args.task)
    market = _pick(markets, lambda m: m.label, "market", args.market)
    algorithm = _resolve_algorithm(args.algo)
    plan = ExperimentPlan(
        tasks=(task,),
        markets=(market,),
        algorithms=(algorithm,),
        trials_per_cell=args.trials,
        master_seed=args.seed,
        weights=_parse_weights(args.weights),
        tau_cap=args.tau_cap,
    )
    outcomes, failures = _run_cells(plan, agents, jobs=1)
    _emit(args, plan, outcomes, failures)
    return 0 if not failures else 2


def cmd_sweep(args) -> int:
    taxonomy, agents, tasks, markets = _load_inputs(args)
    if args.algos:
        algorithms = tuple(_resolve_algorithm(a.strip()) for a in args.algos.split(","))
    else:
        algorithms = ALGORITHMS
    plan = ExperimentPlan(
        tasks=tuple(tasks),
        markets=tuple(markets),
        algorithms=algorithms,
        trials_per_cell=args.trials,
        master_seed=args.seed,
        weights=_parse_weights(args.weights),
        tau_cap=args.tau_cap,
    )
    outcomes, failures = _run_cells(plan, agents, jobs=args.jobs)
    _emit(args, plan, outcomes, failures)
    return 0 if not failures else 2


def cmd_attribute(args) -> int:
    taxonomy, agents, tasks, markets = _load_inputs(args)
    log_path = Path(args.log)
    if not log_path.exists():
        raise ConfigError(f"trial log not found: {log_path}")
    lines = [line for line in log_path.read_text().splitlines() if line.strip()]
    if not 0 <= args.trial < len(lines):
        raise TrialNotFound(f"trial index {args.trial} outside log with {len(lines)} records")
    record = json.loads(lines[args.trial])
    trial = trial_from_record(record)
    task = _pick(tasks, lambda t: t.id, "task", trial.task_id)
    agents_by_id = {a.id: a for a in agents}
    missing = [a for a in trial.assignment.pairs.values() if a not in agents_by_id]
    if missing:
        raise ConfigError(f"trial references unknown agents: {sorted(set(missing))}")

    game = outcome_game(trial, task, agents_by_id)
    if len(game.players) <= MAX_EXACT_PLAYERS:
        result = shapley_exact(game)
    else:
        stream = RandomStream(args.seed).child(
            "attribute", trial.task_id, trial.market_label, trial.algorithm, trial.trial_index
        )
        result = shapley_monte_carlo(game, args.permutations, stream)

    record["attribution"] = {
        "shares": result.shares,
        "method": result.method,
        "permutations": result.permutations,
        "residual": result.residual,
        "coalition_value": game.value(frozenset(game.players)),
    }
    print(json.dumps(record, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentmarket",
        description="Deterministic agent-marketplace simulator and auction engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one (task, market, algorithm) cell")
    _add_data_flags(run)
    run.add_argument("--task", required=True, help="task id")
    run.add_argument("--market", required=True, help="market label")
    run.add_argument("--algo", required=True, help="allocation algorithm")
    run.add_argument("--trials", type=int, default=DEFAULT_TRIALS_PER_CELL)
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser("sweep", help="run the full tasks x markets x algorithms grid")
    _add_data_flags(sweep)
    sweep.add_argument("--algos", default=None, help="comma-separated algorithm subset")
    sweep.add_argument("--trials", type=int, default=DEFAULT_TRIALS_PER_CELL)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes for cells")
    sweep.set_defaults(handler=cmd_sweep)

    attribute = sub.add_parser("attribute", help="Shapley attribution for a logged trial")
    _add_data_flags(attribute)
    attribute.add_argument("--log", required=True, help="trials.jsonl from a previous run")
    attribute.add_argument("--trial", type=int, required=True, help="0-based record index in the log")
    attribute.add_argument("--permutations", type=int, default=20_000,
                           help="Monte-Carlo permutations when the team is too large for exact")
    attribute.set_defaults(handler=cmd_attribute)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, TrialNotFound, MarketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
