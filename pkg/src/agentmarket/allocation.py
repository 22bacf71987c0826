"""The five allocation algorithms and the combinatorial team-selection objective.

All algorithms assign every subtask exactly once, from the given pool, with
total, documented tie-breaking so runs are reproducible. Only random
allocation consumes randomness, via an explicitly passed generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .capability import capability_match
from .domain import AgentProfile, SubtaskSpec, TaskSpec, effective_unit_cost
from .errors import EmptyPool, PoolTooLargeForExact
from .execsim import success_probability

#: Canonical algorithm names, in the reporting order used throughout.
ALGORITHMS = ("enhanced_auction", "greedy", "random", "cost_optimal", "capability_first")

ALGORITHM_ALIASES = {"auction": "enhanced_auction"}

#: Capability threshold used by greedy and cost-optimal allocation.
DEFAULT_TAU_CAP = 0.3

#: Tool-count scale mapping inventory breadth onto a complexity score.
_TOOL_COUNT_SCALE = 35.0


@dataclass(frozen=True)
class AttributeWeights:
    """Weights of the four bid attributes; non-negative and summing to one."""

    w_capability: float = 0.25
    w_quality: float = 0.25
    w_cost: float = 0.25
    w_time: float = 0.25

    def __post_init__(self):
        values = (self.w_capability, self.w_quality, self.w_cost, self.w_time)
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"attribute weights must lie in [0, 1], got {v}")
        if abs(math.fsum(values) - 1.0) > 1e-9:
            raise ValueError(f"attribute weights must sum to 1, got {math.fsum(values)!r}")


@dataclass(frozen=True)
class Assignment:
    """A complete subtask -> agent mapping with scores and total cost."""

    task_id: str
    pairs: dict[str, str]
    scores: dict[str, float]
    total_cost: Decimal
    algorithm: str


@dataclass(frozen=True)
class TeamSelection:
    """The winning agent subset and its expected-net-value objective."""

    selected: tuple[str, ...]
    objective_value: float


def complexity_score(agent: AgentProfile) -> float:
    """Tool-breadth complexity signal, ``1 + |tools| / 35`` (about [1.03, 2])."""
    return 1.0 + len(agent.tools) / _TOOL_COUNT_SCALE


def composite_score(
    agent: AgentProfile,
    subtask: SubtaskSpec,
    task: TaskSpec,
    weights: AttributeWeights = AttributeWeights(),
    *,
    max_unit_cost: Decimal | None = None,
    load: int = 0,
) -> float:
    """Weighted multi-attribute score of an agent on a subtask.

    ``sum_k w_k * f_k`` scaled by the importance/complexity adjustment
    ``importance * min(complexity_score / complexity, 1.5)``. The factors:

    - capability: normalized required-capability overlap;
    - quality: the agent's base success rate;
    - cost: ``1 - unit_cost / max_unit_cost`` against the pool maximum
      (1.0 when all costs are zero);
    - time: ``1 / (1 + complexity * load)`` where ``load`` counts subtasks
      already assigned to this agent in the current allocation.

    ``max_unit_cost`` defaults to the agent's own cost (f_cost = 0), so
    pool-aware callers must pass the pool maximum.
    """
    cost = float(effective_unit_cost(agent, task))
    max_cost = cost if max_unit_cost is None else float(max_unit_cost)
    f_capability = capability_match(agent, subtask)
    f_quality = agent.base_success_rate
    f_cost = 1.0 if max_cost == 0.0 else 1.0 - cost / max_cost
    f_time = 1.0 / (1.0 + subtask.complexity * load)
    attribute_sum = (
        weights.w_capability * f_capability
        + weights.w_quality * f_quality
        + weights.w_cost * f_cost
        + weights.w_time * f_time
    )
    adjustment = subtask.importance * min(complexity_score(agent) / subtask.complexity, 1.5)
    return attribute_sum * adjustment


def _require_pool(pool: list[AgentProfile]):
    if not pool:
        raise EmptyPool("allocation requires at least one agent")


def _finish(task: TaskSpec, pairs, scores, algorithm: str, by_id) -> Assignment:
    total = sum((effective_unit_cost(by_id[a], task) for a in pairs.values()), Decimal("0.00"))
    return Assignment(task_id=task.id, pairs=pairs, scores=scores, total_cost=total, algorithm=algorithm)


def allocate_enhanced_auction(
    task: TaskSpec, pool: list[AgentProfile], weights: AttributeWeights = AttributeWeights()
) -> Assignment:
    """Per subtask, award to the highest composite score (ties: lowest id).

    Subtasks are scored in declared order; each award increments the
    winner's load, which feeds back into the time factor of later subtasks.
    """
    _require_pool(pool)
    by_id = {a.id: a for a in pool}
    max_cost = max(effective_unit_cost(a, task) for a in pool)
    load: dict[str, int] = {a.id: 0 for a in pool}
    pairs: dict[str, str] = {}
    scores: dict[str, float] = {}
    for subtask in task.subtasks:
        best = None
        best_score = -math.inf
        for agent in pool:
            s = composite_score(agent, subtask, task, weights, max_unit_cost=max_cost, load=load[agent.id])
            if s > best_score or (s == best_score and agent.id < best.id):
                best, best_score = agent, s
        pairs[subtask.id] = best.id
        scores[subtask.id] = best_score
        load[best.id] += 1
    return _finish(task, pairs, scores, "enhanced_auction", by_id)


def allocate_greedy(task: TaskSpec, pool: list[AgentProfile], tau_cap: float = DEFAULT_TAU_CAP) -> Assignment:
    """Highest success rate among capability-qualified agents.

    Agents qualify on a subtask when their capability match reaches
    ``tau_cap``; if nobody qualifies, the best-matching agent is used
    instead. Ties break to the lowest id.
    """
    _require_pool(pool)
    by_id = {a.id: a for a in pool}
    pairs: dict[str, str] = {}
    scores: dict[str, float] = {}
    for subtask in task.subtasks:
        qualified = [a for a in pool if capability_match(a, subtask) >= tau_cap]
        if qualified:
            best = min(qualified, key=lambda a: (-a.base_success_rate, a.id))
        else:
            best = min(pool, key=lambda a: (-capability_match(a, subtask), a.id))
        pairs[subtask.id] = best.id
        scores[subtask.id] = composite_score(best, subtask, task)
    return _finish(task, pairs, scores, "greedy", by_id)


def allocate_random(task: TaskSpec, pool: list[AgentProfile], rng: np.random.Generator) -> Assignment:
    """Uniform independent selection per subtask from the provided stream."""
    _require_pool(pool)
    by_id = {a.id: a for a in pool}
    pairs: dict[str, str] = {}
    scores: dict[str, float] = {}
    for subtask in task.subtasks:
        agent = pool[int(rng.integers(len(pool)))]
        pairs[subtask.id] = agent.id
        scores[subtask.id] = composite_score(agent, subtask, task)
    return _finish(task, pairs, scores, "random", by_id)


def allocate_cost_optimal(task: TaskSpec, pool: list[AgentProfile], tau_cap: float = DEFAULT_TAU_CAP) -> Assignment:
    """Cheapest qualifying agent per subtask (same fallback as greedy).

    Per-subtask costs are independent, so the per-subtask minimum is the
    global total-cost minimum over qualifying assignments.
    """
    _require_pool(pool)
    by_id = {a.id: a for a in pool}
    pairs: dict[str, str] = {}
    scores: dict[str, float] = {}
    for subtask in task.subtasks:
        qualified = [a for a in pool if capability_match(a, subtask) >= tau_cap]
        candidates = qualified if qualified else [min(pool, key=lambda a: (-capability_match(a, subtask), a.id))]
        best = min(candidates, key=lambda a: (effective_unit_cost(a, task), a.id))
        pairs[subtask.id] = best.id
        scores[subtask.id] = composite_score(best, subtask, task)
    return _finish(task, pairs, scores, "cost_optimal", by_id)


def allocate_capability_first(task: TaskSpec, pool: list[AgentProfile]) -> Assignment:
    """Best capability match per subtask (ties: higher success rate, then id)."""
    _require_pool(pool)
    by_id = {a.id: a for a in pool}
    pairs: dict[str, str] = {}
    scores: dict[str, float] = {}
    for subtask in task.subtasks:
        best = min(pool, key=lambda a: (-capability_match(a, subtask), -a.base_success_rate, a.id))
        pairs[subtask.id] = best.id
        scores[subtask.id] = composite_score(best, subtask, task)
    return _finish(task, pairs, scores, "capability_first", by_id)


ALLOCATORS = {
    "enhanced_auction": allocate_enhanced_auction,
    "greedy": allocate_greedy,
    "random": allocate_random,
    "cost_optimal": allocate_cost_optimal,
    "capability_first": allocate_capability_first,
}


def select_team(task: TaskSpec, pool: list[AgentProfile], max_pool_for_exact: int = 12) -> TeamSelection:
    """Exhaustive team selection maximizing ``p_success(S) * v(S) - c(S)``.

    For each non-empty subset: success probability is the product over
    subtasks of the best member's zero-noise success probability; value is
    the budget scaled by the mean best capability match; cost is the sum of
    member unit costs. Ties prefer smaller teams, then the lexicographically
    smallest id tuple.
    """
    _require_pool(pool)
    n = len(pool)
    if n > max_pool_for_exact:
        raise PoolTooLargeForExact(f"pool of {n} exceeds exact enumeration bound {max_pool_for_exact}")

    budget = float(task.budget)
    costs = [float(effective_unit_cost(a, task)) for a in pool]
    # Per agent, per subtask: zero-noise success factor and capability match.
    p_det = [[success_probability(a, s, 0.0) for s in task.subtasks] for a in pool]
    f_cap = [[capability_match(a, s) for s in task.subtasks] for a in pool]

    best_ids: tuple[str, ...] | None = None
    best_value = -math.inf
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        p_success = 1.0
        cap_sum = 0.0
        for j in range(len(task.subtasks)):
            p_success *= max(p_det[i][j] for i in members)
            cap_sum += max(f_cap[i][j] for i in members)
        value = budget * (cap_sum / len(task.subtasks))
        cost = math.fsum(costs[i] for i in members)
        objective = p_success * value - cost
        ids = tuple(sorted(pool[i].id for i in members))
        if (
            objective > best_value
            or (objective == best_value and (len(ids), ids) < (len(best_ids), best_ids))
        ):
            best_value = objective
            best_ids = ids
    return TeamSelection(selected=best_ids, objective_value=best_value)
