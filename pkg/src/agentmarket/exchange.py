"""Auction lifecycle: announce, collect bids, award, settle.

An :class:`AuctionRound` walks the state machine
``announced -> bidding_closed -> awarded -> settled`` (any state may fail),
recording a transcript entry at every transition. Awards use a generalized
second-price rule on composite scores; settlement converts the payment
score into currency, enforces the cost bound, and splits the payment
across agents by their attribution shares, exact to the cent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping, Sequence

from .allocation import (
    AttributeWeights,
    allocate_capability_first,
    allocate_enhanced_auction,
)
from .capability import capability_match
from .domain import AgentProfile, TaskSpec, money
from .errors import CostBoundViolation, IllegalTransition, NoBids, UnnormalizedShares

AUCTION, DIRECT = "auction", "direct"

ANNOUNCED = "announced"
BIDDING_CLOSED = "bidding_closed"
AWARDED = "awarded"
SETTLED = "settled"
FAILED = "failed"

_TRANSITIONS = {
    ANNOUNCED: {BIDDING_CLOSED, FAILED},
    BIDDING_CLOSED: {AWARDED, FAILED},
    AWARDED: {SETTLED, FAILED},
    SETTLED: set(),
    FAILED: set(),
}

DEFAULT_EPSILON = 0.01
DEFAULT_RESERVE = 0.0
DEFAULT_MIN_PARTICIPANTS = 3

SHARE_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TaskAnnouncement:
    """A broadcast task with its hub qualification bar and logical deadline."""

    task: TaskSpec
    qualification_rule: float = 0.0
    bid_deadline: int = 1

    def __post_init__(self):
        if not 0.0 <= self.qualification_rule <= 1.0:
            raise ValueError("qualification_rule must lie in [0, 1]")


@dataclass(frozen=True)
class Bid:
    bidder_id: str
    composite_score: float
    quoted_cost: Decimal
    quoted_time: float
    quoted_quality: float

    def __post_init__(self):
        if self.composite_score < 0 or self.quoted_cost < 0 or self.quoted_time < 0:
            raise ValueError("bid fields must be non-negative")
        if not 0.0 <= self.quoted_quality <= 1.0:
            raise ValueError("quoted_quality must lie in [0, 1]")


@dataclass(frozen=True)
class Hub:
    """A coordination unit: member agents plus its internal assignment mechanism."""

    id: str
    members: tuple[AgentProfile, ...]
    internal_mechanism: str = DIRECT

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"hub {self.id!r} must have at least one member")
        if self.internal_mechanism not in (AUCTION, DIRECT):
            raise ValueError(f"unknown internal mechanism {self.internal_mechanism!r}")


@dataclass
class AuctionRound:
    """Mutable lifecycle state of one auction; single-owner during mutation."""

    round_id: str
    announcement: TaskAnnouncement
    received_bids: list[Bid] = field(default_factory=list)
    state: str = ANNOUNCED
    winner: str | None = None
    payment_score: float | None = None
    configuration: str | None = None
    transcript: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self._record()

    def _record(self):
        self.transcript.append(
            {
                "round_id": self.round_id,
                "state": self.state,
                "bids": [
                    {
                        "bidder_id": b.bidder_id,
                        "composite_score": b.composite_score,
                        "quoted_cost": str(b.quoted_cost),
                        "quoted_time": b.quoted_time,
                        "quoted_quality": b.quoted_quality,
                    }
                    for b in self.received_bids
                ],
                "winner": self.winner,
                "payment_score": self.payment_score,
                "configuration": self.configuration,
            }
        )

    def _transition(self, new_state: str):
        if new_state not in _TRANSITIONS[self.state]:
            raise IllegalTransition(f"cannot move round {self.round_id!r} from {self.state} to {new_state}")
        self.state = new_state
        self._record()

    def add_bid(self, bid: Bid):
        if self.state != ANNOUNCED:
            raise IllegalTransition(f"bids are only accepted while announced, round is {self.state}")
        self.received_bids.append(bid)

    def close_bidding(self):
        self._transition(BIDDING_CLOSED)

    def fail(self):
        self._transition(FAILED)


def transcript_jsonl(round_: AuctionRound) -> str:
    """One JSON line per recorded state transition."""
    return "".join(json.dumps(entry) + "\n" for entry in round_.transcript)


def hub_qualification_score(hub: Hub, task: TaskSpec) -> float:
    """Best member's mean capability match over the task's subtasks."""
    return max(
        math.fsum(capability_match(m, s) for s in task.subtasks) / len(task.subtasks)
        for m in hub.members
    )


def qualify(hubs: Sequence[Hub], announcement: TaskAnnouncement) -> list[Hub]:
    """Hubs whose qualification score meets the announcement's bar."""
    threshold = announcement.qualification_rule
    return [h for h in hubs if hub_qualification_score(h, announcement.task) >= threshold]


def select_mechanism(n_qualified: int, min_participants: int = DEFAULT_MIN_PARTICIPANTS) -> str:
    """Competitive auction when enough participants qualify, else direct assignment."""
    return AUCTION if n_qualified >= min_participants else DIRECT


def configuration_of(hub_mechanism: str, agent_mechanism: str) -> str:
    """Map the hub-level and agent-level mechanisms onto configurations I-IV."""
    table = {
        (AUCTION, DIRECT): "I",
        (DIRECT, AUCTION): "II",
        (AUCTION, AUCTION): "III",
        (DIRECT, DIRECT): "IV",
    }
    try:
        return table[(hub_mechanism, agent_mechanism)]
    except KeyError:
        raise ValueError(f"unknown mechanism pair ({hub_mechanism!r}, {agent_mechanism!r})") from None


def gsp_outcome(
    bids: Sequence[Bid],
    reserve: float = DEFAULT_RESERVE,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[Bid, float]:
    """Generalized second-price outcome: (winning bid, payment score).

    The winner is the highest composite score, ties to the lowest bidder id.
    Payment is the second-highest score plus epsilon (reserve plus epsilon
    for a lone bid), never exceeding the winner's own score.
    """
    if not bids:
        raise NoBids("auction requires at least one bid")
    ranked = sorted(bids, key=lambda b: (-b.composite_score, b.bidder_id))
    winner = ranked[0]
    runner_up = ranked[1].composite_score if len(ranked) > 1 else reserve
    payment = min(runner_up + epsilon, winner.composite_score)
    return winner, payment


def run_hub_auction(
    round_: AuctionRound,
    reserve: float = DEFAULT_RESERVE,
    epsilon: float = DEFAULT_EPSILON,
) -> AuctionRound:
    """Award a bidding-closed round by GSP; no bids fails the round."""
    if round_.state != BIDDING_CLOSED:
        raise IllegalTransition(f"auction requires a bidding_closed round, got {round_.state}")
    if not round_.received_bids:
        round_.fail()
        raise NoBids(f"round {round_.round_id!r} closed with no bids")
    winner, payment = gsp_outcome(round_.received_bids, reserve=reserve, epsilon=epsilon)
    round_.winner = winner.bidder_id
    round_.payment_score = payment
    round_._transition(AWARDED)
    return round_


def award_direct(round_: AuctionRound) -> AuctionRound:
    """Direct assignment: hand the round to the best bidder at their own score."""
    if round_.state != BIDDING_CLOSED:
        raise IllegalTransition(f"direct award requires a bidding_closed round, got {round_.state}")
    if not round_.received_bids:
        round_.fail()
        raise NoBids(f"round {round_.round_id!r} closed with no bids")
    best = sorted(round_.received_bids, key=lambda b: (-b.composite_score, b.bidder_id))[0]
    round_.winner = best.bidder_id
    round_.payment_score = best.composite_score
    round_._transition(AWARDED)
    return round_


@dataclass(frozen=True)
class SettlementRecord:
    task_id: str
    winner_id: str
    payment: Decimal
    per_agent_payouts: dict[str, Decimal]


def _split_cents(total_cents: int, shares: Mapping[str, float]) -> dict[str, int]:
    """Split cents by share with largest-remainder correction; sums exactly."""
    raw = {agent: total_cents * share for agent, share in shares.items()}
    base = {agent: int(math.floor(r)) for agent, r in raw.items()}
    leftover = total_cents - sum(base.values())
    by_remainder = sorted(shares, key=lambda a: (-(raw[a] - base[a]), a))
    for agent in by_remainder[:leftover]:
        base[agent] += 1
    return base


def settle(round_: AuctionRound, task: TaskSpec, attribution: Mapping[str, float]) -> SettlementRecord:
    """Convert the payment score to currency and split it by attribution share.

    Payment is ``budget * payment_score / winner_score`` capped at the
    budget. Settlement is refused when the winner's quoted cost exceeds the
    payment (the collaboration would run at a loss), or when the shares are
    negative or fail to sum to one.
    """
    if round_.state != AWARDED:
        raise IllegalTransition(f"settlement requires an awarded round, got {round_.state}")
    if not attribution or any(share < 0 for share in attribution.values()):
        raise UnnormalizedShares("attribution shares must be non-negative and non-empty")
    share_sum = math.fsum(attribution.values())
    if abs(share_sum - 1.0) > SHARE_SUM_TOLERANCE:
        raise UnnormalizedShares(f"attribution shares sum to {share_sum!r}, expected 1.0")

    winner_bids = [b for b in round_.received_bids if b.bidder_id == round_.winner]
    winner_bid = max(winner_bids, key=lambda b: b.composite_score)
    winner_score = winner_bid.composite_score
    ratio = 0.0 if winner_score == 0 else round_.payment_score / winner_score
    payment = min(money(task.budget * Decimal(str(ratio))), task.budget)
    if winner_bid.quoted_cost > payment:
        raise CostBoundViolation(
            f"quoted cost {winner_bid.quoted_cost} exceeds payment {payment} for round {round_.round_id!r}"
        )

    cents = _split_cents(int(payment * 100), attribution)
    payouts = {agent: Decimal(c) / 100 for agent, c in sorted(cents.items())}
    round_._transition(SETTLED)
    return SettlementRecord(
        task_id=task.id,
        winner_id=round_.winner,
        payment=payment,
        per_agent_payouts=payouts,
    )


# --- end-to-end orchestration -------------------------------------------------


@dataclass(frozen=True)
class ExchangeResult:
    round: AuctionRound
    winner_hub: Hub
    configuration: str
    assignment: "Assignment"  # noqa: F821
    trial: "TrialOutcome | None" = None  # noqa: F821
    attribution: "AttributionResult | None" = None  # noqa: F821
    settlement: SettlementRecord | None = None


def hub_bid(hub: Hub, task: TaskSpec, weights: AttributeWeights = AttributeWeights()) -> tuple[Bid, "Assignment"]:  # noqa: F821
    """A hub's bid, backed by the internal assignment it plans to execute.

    The composite score is the mean winning score of the provisional
    assignment; the quote carries its total cost and mean capability match.
    """
    members = list(hub.members)
    if hub.internal_mechanism == AUCTION:
        assignment = allocate_enhanced_auction(task, members, weights)
    else:
        assignment = allocate_capability_first(task, members)
    by_id = {m.id: m for m in members}
    mean_score = math.fsum(assignment.scores.values()) / len(assignment.scores)
    mean_cap = math.fsum(
        capability_match(by_id[assignment.pairs[s.id]], s) for s in task.subtasks
    ) / len(task.subtasks)
    bid = Bid(
        bidder_id=hub.id,
        composite_score=mean_score,
        quoted_cost=assignment.total_cost,
        quoted_time=task.timeline_hours,
        quoted_quality=min(mean_cap, 1.0),
    )
    return bid, assignment


def run_exchange(
    task: TaskSpec,
    hubs: Sequence[Hub],
    *,
    weights: AttributeWeights = AttributeWeights(),
    q_min: float = 0.0,
    min_participants: int = DEFAULT_MIN_PARTICIPANTS,
    reserve: float = DEFAULT_RESERVE,
    epsilon: float = DEFAULT_EPSILON,
    market: "MarketCondition | None" = None,  # noqa: F821
    stream: "RandomStream | None" = None,  # noqa: F821
    round_id: str | None = None,
) -> ExchangeResult:
    """Run one full exchange cycle for a task across hubs.

    Qualification filters the hubs, the participant count picks auction or
    direct assignment at the hub level, and the winning hub's declared
    internal mechanism fixes the agent level; together they name the
    coordination configuration. When ``market`` and ``stream`` are given the
    winning assignment is executed, attributed by exact Shapley shares, and
    settled against the round's payment.
    """
    from .attribution import outcome_game, shapley_exact, shapley_monte_carlo
    from .execsim import execute_trial

    announcement = TaskAnnouncement(task=task, qualification_rule=q_min)
    round_ = AuctionRound(round_id=round_id or f"{task.id}-round", announcement=announcement)
    qualified = qualify(hubs, announcement)
    hub_mechanism = select_mechanism(len(qualified), min_participants)

    proposals = {}
    for hub in qualified:
        bid, assignment = hub_bid(hub, task, weights)
        proposals[hub.id] = (hub, assignment)
        round_.add_bid(bid)
    round_.close_bidding()

    if hub_mechanism == AUCTION:
        run_hub_auction(round_, reserve=reserve, epsilon=epsilon)
    else:
        award_direct(round_)

    winner_hub, assignment = proposals[round_.winner]
    configuration = configuration_of(hub_mechanism, winner_hub.internal_mechanism)
    round_.configuration = configuration

    trial = attribution = settlement = None
    if market is not None and stream is not None:
        members_by_id = {m.id: m for m in winner_hub.members}
        trial = execute_trial(assignment, task, market, stream, members_by_id)
        game = outcome_game(trial, task, members_by_id)
        if len(game.players) <= 12:
            attribution = shapley_exact(game)
        else:
            attribution = shapley_monte_carlo(game, 20_000, stream.child("attribution"))
        total = math.fsum(attribution.shares.values())
        shares = (
            {a: 1.0 / len(game.players) for a in game.players}
            if total == 0
            else {a: v / total for a, v in attribution.shares.items()}
        )
        settlement = settle(round_, task, shares)

    return ExchangeResult(
        round=round_,
        winner_hub=winner_hub,
        configuration=configuration,
        assignment=assignment,
        trial=trial,
        attribution=attribution,
        settlement=settlement,
    )
