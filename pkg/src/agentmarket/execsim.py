"""Stochastic execution of an assignment under a market condition.

Per subtask: a market noise draw perturbs the agent's base success rate, a
complexity factor damps it, success is a Bernoulli draw on the resulting
probability (capped at 0.95), and successful subtasks earn a quality score
with a capability bonus. Failed subtasks score zero quality; cost accrues
either way.

Randomness is fully keyed: every draw comes from its own substream derived
from ``(master_seed, ...path, subtask index, purpose)``, so outcomes are
reproducible, independent across trials, and stable under appending new
subtasks. The market's ``quality_variance`` parameter is used directly as
the dispersion scale of the noise draw; this matches the magnitude of the
quality statistics the model is calibrated to produce.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from decimal import Decimal
from math import fsum
from typing import Mapping

import numpy as np

from .capability import capability_match
from .domain import AgentProfile, MarketCondition, TaskSpec, effective_unit_cost

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Purpose labels for the per-subtask draws, in draw order.
NOISE, BERNOULLI, UNIFORM = "noise", "bernoulli", "uniform"


def _label_code(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    raise TypeError(f"stream labels must be int or str, got {type(label).__name__}")


@dataclass(frozen=True)
class RandomStream:
    """A reproducible, keyed random stream.

    ``child(*labels)`` derives an independent substream; ``generator()``
    materializes a numpy Generator seeded from the master seed plus the
    accumulated key path. Distinct paths give statistically independent
    streams, and the same path always reproduces the same draws.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def child(self, *labels) -> "RandomStream":
        return RandomStream(self.master_seed, self.path + tuple(_label_code(l) for l in labels))

    def generator(self) -> np.random.Generator:
        entropy = [self.master_seed & _MASK64, *self.path]
        return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class SubtaskOutcome:
    subtask_id: str
    agent_id: str
    success_probability: float
    succeeded: bool
    quality: float
    cost: Decimal


@dataclass(frozen=True)
class TrialOutcome:
    """One executed trial: per-subtask outcomes plus aggregate metrics."""

    task_id: str
    algorithm: str
    market_label: str
    trial_index: int
    assignment: "Assignment"  # noqa: F821 - allocation.Assignment, kept loose to avoid an import cycle
    outcomes: tuple[SubtaskOutcome, ...]
    task_quality: float
    total_cost: Decimal
    success_rate: float


def success_probability(agent: AgentProfile, subtask: "SubtaskSpec", noise: float) -> float:  # noqa: F821
    """Noise-adjusted success probability with a complexity penalty.

    ``min(max(rho + noise, 0) * max(0.5, 1.2 - 0.1 * complexity), 0.95)``.
    The negative-intermediate clamp keeps the result a probability under
    extreme noise; the 0.95 cap reflects performance limits.
    """
    base = max(agent.base_success_rate + noise, 0.0)
    factor = max(0.5, 1.2 - 0.1 * subtask.complexity)
    return min(base * factor, 0.95)


def quality_outcome(p: float, u: float, f_cap: float) -> float:
    """Quality of a successful execution: ``min(p * u + 0.1 * f_cap, 1.0)``."""
    return min(p * u + 0.1 * f_cap, 1.0)


def execute_trial(
    assignment,
    task: TaskSpec,
    market: MarketCondition,
    stream: RandomStream,
    agents: Mapping[str, AgentProfile],
    trial_index: int = 0,
) -> TrialOutcome:
    """Execute every subtask of an assignment, in declared order.

    ``agents`` maps agent ids to profiles for everyone named in the
    assignment. Each subtask uses substreams ``stream.child(j, purpose)``
    keyed by its positional index, so appending a subtask never changes the
    draws of earlier ones. The uniform quality draw is only taken on
    success.
    """
    outcomes = []
    for j, subtask in enumerate(task.subtasks):
        agent = agents[assignment.pairs[subtask.id]]
        noise = float(stream.child(j, NOISE).generator().normal(0.0, market.quality_variance))
        p = success_probability(agent, subtask, noise)
        succeeded = bool(stream.child(j, BERNOULLI).generator().random() < p)
        if succeeded:
            u = float(stream.child(j, UNIFORM).generator().uniform(0.9, 1.1))
            quality = quality_outcome(p, u, capability_match(agent, subtask))
        else:
            quality = 0.0
        outcomes.append(
            SubtaskOutcome(
                subtask_id=subtask.id,
                agent_id=agent.id,
                success_probability=p,
                succeeded=succeeded,
                quality=quality,
                cost=effective_unit_cost(agent, task),
            )
        )
    task_quality = fsum(sub.importance * out.quality for sub, out in zip(task.subtasks, outcomes))
    total_cost = sum((out.cost for out in outcomes), Decimal("0.00"))
    success_rate = sum(1 for out in outcomes if out.succeeded) / len(outcomes)
    return TrialOutcome(
        task_id=task.id,
        algorithm=assignment.algorithm,
        market_label=market.label,
        trial_index=trial_index,
        assignment=assignment,
        outcomes=tuple(outcomes),
        task_quality=task_quality,
        total_cost=total_cost,
        success_rate=success_rate,
    )


# --- trial (de)serialization -------------------------------------------------


def trial_to_record(trial: TrialOutcome) -> dict:
    """JSON-safe dict for one trial; money fields become exact strings."""
    return {
        "task_id": trial.task_id,
        "market": trial.market_label,
        "algorithm": trial.algorithm,
        "trial_index": trial.trial_index,
        "assignment": {
            "pairs": dict(trial.assignment.pairs),
            "scores": dict(trial.assignment.scores),
            "total_cost": str(trial.assignment.total_cost),
        },
        "outcomes": [
            {
                "subtask_id": out.subtask_id,
                "agent_id": out.agent_id,
                "success_probability": out.success_probability,
                "succeeded": out.succeeded,
                "quality": out.quality,
                "cost": str(out.cost),
            }
            for out in trial.outcomes
        ],
        "task_quality": trial.task_quality,
        "total_cost": str(trial.total_cost),
        "success_rate": trial.success_rate,
    }


def trial_from_record(record: dict) -> TrialOutcome:
    """Rebuild a TrialOutcome from its JSON record."""
    from .allocation import Assignment

    a = record["assignment"]
    assignment = Assignment(
        task_id=record["task_id"],
        pairs=dict(a["pairs"]),
        scores={k: float(v) for k, v in a["scores"].items()},
        total_cost=Decimal(a["total_cost"]),
        algorithm=record["algorithm"],
    )
    outcomes = tuple(
        SubtaskOutcome(
            subtask_id=o["subtask_id"],
            agent_id=o["agent_id"],
            success_probability=float(o["success_probability"]),
            succeeded=bool(o["succeeded"]),
            quality=float(o["quality"]),
            cost=Decimal(o["cost"]),
        )
        for o in record["outcomes"]
    )
    return TrialOutcome(
        task_id=record["task_id"],
        algorithm=record["algorithm"],
        market_label=record["market"],
        trial_index=int(record["trial_index"]),
        assignment=assignment,
        outcomes=outcomes,
        task_quality=float(record["task_quality"]),
        total_cost=Decimal(record["total_cost"]),
        success_rate=float(record["success_rate"]),
    )
