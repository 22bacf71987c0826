"""Collaborative value attribution: Shapley shares and feasibility checks.

Exact Shapley values come from full subset enumeration (bounded at 12
players); larger games use Monte-Carlo permutation sampling. Both satisfy
efficiency: the per-permutation marginals telescope, so sampled shares sum
to the grand-coalition value at every sample count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .capability import capability_match
from .domain import AgentProfile, TaskSpec
from .errors import TooManyPlayersForExact
from .execsim import RandomStream, TrialOutcome, quality_outcome, success_probability

MAX_EXACT_PLAYERS = 12


@dataclass(frozen=True)
class CoalitionGame:
    """An ordered player list and a deterministic subset value function."""

    players: tuple[str, ...]
    value_fn: Callable[[frozenset[str]], float]

    def __post_init__(self):
        if len(set(self.players)) != len(self.players):
            raise ValueError("players must be distinct")
        empty = self.value_fn(frozenset())
        if abs(empty) > 1e-12:
            raise ValueError(f"value of the empty coalition must be 0, got {empty!r}")

    @classmethod
    def from_table(cls, players: Iterable[str], table: Mapping[frozenset[str], float]) -> "CoalitionGame":
        """Game backed by an explicit subset -> value table."""
        normalized = {frozenset(k): float(v) for k, v in table.items()}
        normalized.setdefault(frozenset(), 0.0)

        def value_fn(subset: frozenset[str]) -> float:
            return normalized[frozenset(subset)]

        return cls(players=tuple(players), value_fn=value_fn)

    def value(self, subset: Iterable[str]) -> float:
        return self.value_fn(frozenset(subset))


@dataclass(frozen=True)
class AttributionResult:
    """Per-player shares, how they were computed, and the efficiency residual."""

    shares: dict[str, float]
    method: str  # "exact" or "monte_carlo"
    permutations: int | None
    residual: float


def _mask_values(game: CoalitionGame) -> list[float]:
    """Value of every player subset, indexed by bitmask."""
    n = len(game.players)
    values = [0.0] * (1 << n)
    for mask in range(1, 1 << n):
        subset = frozenset(game.players[i] for i in range(n) if mask >> i & 1)
        values[mask] = game.value_fn(subset)
    return values


def shapley_exact(game: CoalitionGame) -> AttributionResult:
    """Exact Shapley values by subset enumeration.

    ``phi_i = sum over S not containing i of
    |S|! (n - |S| - 1)! / n! * (v(S + i) - v(S))``.
    """
    n = len(game.players)
    if n > MAX_EXACT_PLAYERS:
        raise TooManyPlayersForExact(f"{n} players exceeds exact bound {MAX_EXACT_PLAYERS}")
    values = _mask_values(game)
    fact = [math.factorial(k) for k in range(n + 1)]
    weight = [fact[s] * fact[n - s - 1] / fact[n] for s in range(n)]

    shares = {}
    for i, player in enumerate(game.players):
        bit = 1 << i
        terms = []
        for mask in range(1 << n):
            if mask & bit:
                continue
            terms.append(weight[mask.bit_count()] * (values[mask | bit] - values[mask]))
        shares[player] = math.fsum(terms)
    residual = abs(math.fsum(shares.values()) - values[(1 << n) - 1])
    return AttributionResult(shares=shares, method="exact", permutations=None, residual=residual)


def shapley_monte_carlo(
    game: CoalitionGame,
    permutations: int,
    stream: RandomStream,
    *,
    enumerate_all: bool = False,
) -> AttributionResult:
    """Shapley values estimated as mean marginal contributions over orderings.

    Samples ``permutations`` uniform orderings from the stream. With
    ``enumerate_all`` every distinct ordering is visited exactly once
    instead (a test hook: the mean then equals the exact value). Shares sum
    to ``v(all)`` for any sample count because each ordering's marginals
    telescope.
    """
    if permutations < 1 and not enumerate_all:
        raise ValueError("permutations must be >= 1")
    n = len(game.players)
    full = frozenset(game.players)

    if enumerate_all:
        orderings = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    else:
        rng = stream.generator()
        orderings = rng.permuted(np.tile(np.arange(n, dtype=np.intp), (permutations, 1)), axis=1)
    count = len(orderings)

    if n <= MAX_EXACT_PLAYERS:
        table = np.asarray(_mask_values(game))
        bits = np.left_shift(1, orderings)
        grown = np.bitwise_or.accumulate(bits, axis=1)
        preceding = np.concatenate([np.zeros((count, 1), dtype=grown.dtype), grown[:, :-1]], axis=1)
        marginals = table[grown] - table[preceding]
        totals = np.zeros(n)
        np.add.at(totals, orderings, marginals)
        shares = {player: float(totals[i]) / count for i, player in enumerate(game.players)}
        v_full = float(table[-1])
    else:
        memo: dict[frozenset[str], float] = {frozenset(): 0.0}

        def value(subset: frozenset[str]) -> float:
            cached = memo.get(subset)
            if cached is None:
                cached = memo[subset] = game.value_fn(subset)
            return cached

        totals_by_player = {player: [] for player in game.players}
        for ordering in orderings:
            members: set[str] = set()
            previous = 0.0
            for idx in ordering:
                player = game.players[idx]
                members.add(player)
                current = value(frozenset(members))
                totals_by_player[player].append(current - previous)
                previous = current
        shares = {player: math.fsum(margs) / count for player, margs in totals_by_player.items()}
        v_full = value(full)

    residual = abs(math.fsum(shares.values()) - v_full)
    return AttributionResult(shares=shares, method="monte_carlo", permutations=count, residual=residual)


def surplus(game: CoalitionGame) -> float:
    """Superadditive surplus: grand-coalition value minus the solo values."""
    solo = math.fsum(game.value(frozenset({p})) for p in game.players)
    return game.value(frozenset(game.players)) - solo


def check_cost_bound(costs: Mapping[str, object], total_value) -> bool:
    """True iff the summed agent costs stay within the total value generated."""
    total = math.fsum(float(c) for c in costs.values())
    return total <= float(total_value)


def deterministic_quality(agent: AgentProfile, subtask) -> float:
    """Zero-noise, unit-draw replay quality of one subtask execution."""
    p = success_probability(agent, subtask, 0.0)
    return quality_outcome(p, 1.0, capability_match(agent, subtask))


def outcome_game(
    trial: TrialOutcome,
    task: TaskSpec,
    agents: Mapping[str, AgentProfile],
    replay: Callable[[AgentProfile, object], float] = deterministic_quality,
) -> CoalitionGame:
    """Coalition game over the distinct agents of a trial's assignment.

    ``v(S)`` is the budget times the importance-weighted quality of a
    deterministic replay restricted to the subtasks whose assigned agent is
    in ``S``; excluded subtasks score zero. The replay hook defaults to the
    zero-noise execution model, making attribution a pure function of the
    trial.
    """
    players: list[str] = []
    for subtask in task.subtasks:
        agent_id = trial.assignment.pairs[subtask.id]
        if agent_id not in players:
            players.append(agent_id)

    budget = float(task.budget)
    contribution = {player: 0.0 for player in players}
    for subtask in task.subtasks:
        agent_id = trial.assignment.pairs[subtask.id]
        contribution[agent_id] += subtask.importance * replay(agents[agent_id], subtask)

    def value_fn(subset: frozenset[str]) -> float:
        return budget * math.fsum(contribution[p] for p in subset)

    return CoalitionGame(players=tuple(players), value_fn=value_fn)
