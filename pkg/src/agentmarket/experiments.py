"""Full factorial experiment harness with statistical analysis.

A plan sweeps tasks x markets x algorithms with per-cell replication.
Every trial draws from substreams keyed by its cell and index, so cells
are independent, runs are reproducible, and parallel execution cannot
change the reported numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from scipy.special import betainc

from .allocation import (
    ALGORITHMS,
    AttributeWeights,
    DEFAULT_TAU_CAP,
    allocate_capability_first,
    allocate_cost_optimal,
    allocate_enhanced_auction,
    allocate_greedy,
    allocate_random,
)
from .domain import AgentProfile, MarketCondition, TaskSpec, validate_task
from .errors import MarketError
from .execsim import RandomStream, TrialOutcome, execute_trial

DEFAULT_TRIALS_PER_CELL = 30
DEFAULT_SEED = 42


@dataclass(frozen=True)
class ExperimentPlan:
    tasks: tuple[TaskSpec, ...]
    markets: tuple[MarketCondition, ...]
    algorithms: tuple[str, ...]
    trials_per_cell: int = DEFAULT_TRIALS_PER_CELL
    master_seed: int = DEFAULT_SEED
    weights: AttributeWeights = AttributeWeights()
    tau_cap: float = DEFAULT_TAU_CAP

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms: {unknown}; expected from {ALGORITHMS}")

    @property
    def total_trials(self) -> int:
        return len(self.tasks) * len(self.markets) * len(self.algorithms) * self.trials_per_cell


@dataclass(frozen=True)
class CellFailure:
    task_id: str
    market_label: str
    algorithm: str
    error: str


@dataclass
class PlanResult:
    outcomes: list[TrialOutcome] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)


def market_pool(
    pool: Sequence[AgentProfile], market: MarketCondition, trial_index: int, master_seed: int
) -> list[AgentProfile]:
    """Deterministic subsample of the pool for one (market, trial) pairing.

    A keyed shuffle of the full pool, truncated to the market's available
    agent count; every algorithm and task sees the same participants for a
    given market and trial index.
    """
    rng = RandomStream(master_seed).child("subsample", market.label, trial_index).generator()
    order = rng.permutation(len(pool))
    return [pool[i] for i in order[: market.available_agents]]


def _allocate(algorithm, task, pool, plan, cell_stream):
    if algorithm == "enhanced_auction":
        return allocate_enhanced_auction(task, pool, plan.weights)
    if algorithm == "greedy":
        return allocate_greedy(task, pool, plan.tau_cap)
    if algorithm == "random":
        return allocate_random(task, pool, cell_stream.child("alloc").generator())
    if algorithm == "cost_optimal":
        return allocate_cost_optimal(task, pool, plan.tau_cap)
    if algorithm == "capability_first":
        return allocate_capability_first(task, pool)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def run_cell(
    plan: ExperimentPlan,
    pool: Sequence[AgentProfile],
    task: TaskSpec,
    market: MarketCondition,
    algorithm: str,
) -> tuple[list[TrialOutcome], CellFailure | None]:
    """Run every trial of one (task, market, algorithm) cell.

    The first allocation or validation error aborts the remaining trials of
    the cell and is reported as a failure record.
    """
    base = RandomStream(plan.master_seed)
    agents_by_id = {a.id: a for a in pool}
    outcomes: list[TrialOutcome] = []
    for k in range(plan.trials_per_cell):
        cell_stream = base.child("cell", task.id, market.label, algorithm, k)
        try:
            participants = market_pool(pool, market, k, plan.master_seed)
            assignment = _allocate(algorithm, task, participants, plan, cell_stream)
            outcomes.append(
                execute_trial(assignment, task, market, cell_stream, agents_by_id, trial_index=k)
            )
        except MarketError as exc:
            return outcomes, CellFailure(task.id, market.label, algorithm, str(exc))
    return outcomes, None


def run_plan(plan: ExperimentPlan, pool: Sequence[AgentProfile]) -> PlanResult:
    """Execute the full factorial grid in deterministic declared order."""
    for task in plan.tasks:
        validate_task(task)
    result = PlanResult()
    for task in plan.tasks:
        for market in plan.markets:
            for algorithm in plan.algorithms:
                outcomes, failure = run_cell(plan, pool, task, market, algorithm)
                result.outcomes.extend(outcomes)
                if failure is not None:
                    result.failures.append(failure)
    return result


# --- aggregation ---------------------------------------------------------------


@dataclass(frozen=True)
class MethodSummary:
    algorithm: str
    quality_mean: float
    quality_std: float
    cost_efficiency: float
    robustness: float


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _std(xs: Sequence[float], ddof: int) -> float:
    if len(xs) <= ddof:
        return 0.0
    m = _mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (len(xs) - ddof))


def summarize(outcomes: Sequence[TrialOutcome]) -> list[MethodSummary]:
    """Per-algorithm quality statistics, cost efficiency, and robustness.

    Quality std is the sample standard deviation over the algorithm's
    trials. Robustness is the population standard deviation of the
    per-market mean qualities (the markets studied are the whole population
    of conditions). Cost efficiency divides mean quality by mean total cost.
    """
    if not outcomes:
        raise ValueError("summarize requires at least one outcome")
    algorithms: list[str] = []
    markets: list[str] = []
    for out in outcomes:
        if out.algorithm not in algorithms:
            algorithms.append(out.algorithm)
        if out.market_label not in markets:
            markets.append(out.market_label)

    summaries = []
    for algorithm in algorithms:
        mine = [o for o in outcomes if o.algorithm == algorithm]
        qualities = [o.task_quality for o in mine]
        mean_cost = _mean([float(o.total_cost) for o in mine])
        market_means = [
            _mean([o.task_quality for o in mine if o.market_label == label])
            for label in markets
            if any(o.market_label == label for o in mine)
        ]
        summaries.append(
            MethodSummary(
                algorithm=algorithm,
                quality_mean=_mean(qualities),
                quality_std=_std(qualities, ddof=1),
                cost_efficiency=0.0 if mean_cost == 0 else _mean(qualities) / mean_cost,
                robustness=_std(market_means, ddof=0) if len(market_means) > 1 else 0.0,
            )
        )
    return summaries


# --- statistics ------------------------------------------------------------------


class AnovaResult(NamedTuple):
    F: float
    df: tuple[int, int]
    p: float


class WelchResult(NamedTuple):
    t: float
    p: float
    cohens_d: float


def _f_sf(f: float, df1: int, df2: int) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return float(betainc(df2 / 2.0, df1 / 2.0, x))


def _t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability of the t distribution."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA: F = MS_between / MS_within, p from the F upper tail.

    All-identical data is degenerate (zero variance everywhere) and reports
    F = 0, p = 1 by convention; separated groups with zero within-group
    variance report an infinite F with p = 0.
    """
    if len(groups) < 2:
        raise ValueError("ANOVA requires at least two groups")
    if any(len(g) < 2 for g in groups):
        raise ValueError("every ANOVA group needs at least two samples")
    k = len(groups)
    n_total = sum(len(g) for g in groups)
    df = (k - 1, n_total - k)
    grand = math.fsum(math.fsum(g) for g in groups) / n_total
    group_means = [_mean(g) for g in groups]
    ss_between = math.fsum(len(g) * (m - grand) ** 2 for g, m in zip(groups, group_means))
    ss_within = math.fsum(math.fsum((x - m) ** 2 for x in g) for g, m in zip(groups, group_means))
    ms_within = ss_within / df[1]
    if ms_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(0.0, df, 1.0)
        return AnovaResult(math.inf, df, 0.0)
    f = (ss_between / df[0]) / ms_within
    return AnovaResult(f, df, _f_sf(f, *df))


def welch_t_and_d(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t-test plus Cohen's d with pooled SD.

    Two constant, equal samples are degenerate and report t = 0, p = 1,
    d = 0; constant but different samples report infinite t and d.
    """
    if len(a) < 2 or len(b) < 2:
        raise ValueError("both samples need at least two values")
    na, nb = len(a), len(b)
    ma, mb = _mean(a), _mean(b)
    va = math.fsum((x - ma) ** 2 for x in a) / (na - 1)
    vb = math.fsum((x - mb) ** 2 for x in b) / (nb - 1)
    diff = ma - mb
    se2 = va / na + vb / nb
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    if se2 == 0.0:
        if diff == 0.0:
            return WelchResult(0.0, 1.0, 0.0)
        sign = math.copysign(1.0, diff)
        return WelchResult(sign * math.inf, 0.0, sign * math.inf)
    t = diff / math.sqrt(se2)
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    d = sign_inf(diff) if pooled == 0.0 else diff / pooled
    return WelchResult(t, _t_sf2(abs(t), df), d)


def sign_inf(x: float) -> float:
    return math.copysign(math.inf, x)


@dataclass(frozen=True)
class PairwiseComparison:
    method_a: str
    method_b: str
    t: float
    p: float
    cohens_d: float


@dataclass(frozen=True)
class StatsReport:
    anova: AnovaResult
    pairwise: tuple[PairwiseComparison, ...]


def build_stats_report(outcomes: Sequence[TrialOutcome]) -> StatsReport:
    """ANOVA across algorithms plus pairwise Welch comparisons on quality."""
    algorithms: list[str] = []
    for out in outcomes:
        if out.algorithm not in algorithms:
            algorithms.append(out.algorithm)
    samples = {a: [o.task_quality for o in outcomes if o.algorithm == a] for a in algorithms}
    anova = anova_oneway([samples[a] for a in algorithms])
    pairwise = []
    for i, a in enumerate(algorithms):
        for b in algorithms[i + 1 :]:
            t, p, d = welch_t_and_d(samples[a], samples[b])
            pairwise.append(PairwiseComparison(a, b, t, p, d))
    return StatsReport(anova=anova, pairwise=tuple(pairwise))


# --- report emission -------------------------------------------------------------

SUMMARY_COLUMNS = ("algorithm", "quality_mean", "quality_std", "cost_efficiency", "robustness")


def render_summary_csv(summaries: Sequence[MethodSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        writer.writerow([s.algorithm, repr(s.quality_mean), repr(s.quality_std),
                         repr(s.cost_efficiency), repr(s.robustness)])
    return buf.getvalue()


def parse_summary_csv(text: str) -> list[MethodSummary]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SUMMARY_COLUMNS:
        raise ValueError(f"summary CSV must start with header {SUMMARY_COLUMNS}")
    return [
        MethodSummary(
            algorithm=row[0],
            quality_mean=float(row[1]),
            quality_std=float(row[2]),
            cost_efficiency=float(row[3]),
            robustness=float(row[4]),
        )
        for row in rows[1:]
    ]


def _stats_to_dict(stats: StatsReport | None) -> dict:
    if stats is None:
        return {"anova": {}, "pairwise": []}
    return {
        "anova": {
            "F": stats.anova.F,
            "df_between": stats.anova.df[0],
            "df_within": stats.anova.df[1],
            "p": stats.anova.p,
        },
        "pairwise": [
            {
                "method_a": c.method_a,
                "method_b": c.method_b,
                "t": c.t,
                "p": c.p,
                "cohens_d": c.cohens_d,
            }
            for c in stats.pairwise
        ],
    }


def render_report_json(
    summaries: Sequence[MethodSummary],
    stats: StatsReport | None,
    plan_info: dict | None = None,
) -> str:
    document = {
        "plan": plan_info or {},
        "summaries": [
            {column: getattr(s, column) for column in SUMMARY_COLUMNS} for s in summaries
        ],
        **_stats_to_dict(stats),
    }
    return json.dumps(document, indent=2) + "\n"


def parse_report_json(text: str) -> dict:
    document = json.loads(text)
    document["summaries"] = [
        MethodSummary(**{column: s[column] for column in SUMMARY_COLUMNS})
        for s in document.get("summaries", [])
    ]
    return document


def render_report(
    summaries: Sequence[MethodSummary],
    stats: StatsReport | None,
    fmt: str,
    plan_info: dict | None = None,
) -> str:
    """Serialize a report as ``csv`` (summary table) or ``json`` (full document)."""
    if fmt == "csv":
        return render_summary_csv(summaries)
    if fmt == "json":
        return render_report_json(summaries, stats, plan_info)
    raise ValueError(f"unknown report format {fmt!r}")
