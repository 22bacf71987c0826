"""Core data model: agents, tasks, markets, and the money convention.

All types are immutable after construction and safe to share across
concurrent trial workers. Currency is a ``decimal.Decimal`` quantized to
cents so budget comparisons are exact; probabilities, weights, and scores
stay plain floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from .errors import ConfigError, TaskValidationError, UnknownCapability

CENT = Decimal("0.01")

#: Objective types named in the task model; any other string is a custom objective.
KNOWN_OBJECTIVES = frozenset({"analysis", "planning", "execution", "strategy_development"})

#: Market labels used by the bundled datasets; custom labels are allowed.
KNOWN_MARKET_LABELS = frozenset({"high", "medium", "low"})

WEIGHT_SUM_TOLERANCE = 1e-9


def money(value) -> Decimal:
    """Coerce a number (or numeric string) to a cent-quantized Decimal."""
    return Decimal(str(value)).quantize(CENT, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class ToolDescriptor:
    """One tool exposed by an agent; the description drives capability inference."""

    name: str
    description: str = ""


@dataclass(frozen=True)
class CapabilityTaxonomy:
    """Capability ids mapped to their keyword sets, plus the baseline floor.

    ``entries`` values must already be lowercase token sets; use
    :meth:`from_keywords` to normalize raw keyword lists.
    """

    entries: dict[str, frozenset[str]]
    theta_min: float = 0.05

    def __post_init__(self):
        if not self.entries:
            raise ValueError("taxonomy must define at least one capability")
        for cap, keywords in self.entries.items():
            if not cap:
                raise ValueError("capability ids must be non-empty")
            if not keywords:
                raise ValueError(f"capability {cap!r} has an empty keyword set")
        if not 0.0 <= self.theta_min < 1.0:
            raise ValueError(f"theta_min must lie in [0, 1), got {self.theta_min}")

    @classmethod
    def from_keywords(cls, keyword_map: dict[str, list[str]], theta_min: float = 0.05) -> "CapabilityTaxonomy":
        """Build a taxonomy from raw keyword lists, tokenizing each entry."""
        from .capability import tokenize

        entries = {}
        for cap, keywords in keyword_map.items():
            tokens = frozenset().union(*(tokenize(k) for k in keywords)) if keywords else frozenset()
            entries[cap] = tokens
        return cls(entries=entries, theta_min=theta_min)

    def __contains__(self, capability: str) -> bool:
        return capability in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class AgentProfile:
    """An agent's identity, reliability, tool inventory, and cost parameters.

    ``capabilities`` is populated by ``capability.infer_profile``; it maps
    every taxonomy capability to a strength in [theta_min, 1]. ``unit_cost``
    is the per-subtask price; when ``None`` the allocation layer derives a
    task-scaled default (see ``domain.effective_unit_cost``).
    """

    id: str
    display_name: str
    use_count: int
    base_success_rate: float
    tools: tuple[ToolDescriptor, ...]
    capabilities: dict[str, float] = field(default_factory=dict)
    unit_cost: Decimal | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("agent id must be non-empty")
        if len(self.tools) < 1:
            raise ValueError(f"agent {self.id!r} must expose at least one tool")
        if self.use_count < 0:
            raise ValueError(f"agent {self.id!r} has negative use_count")
        if not 0.0 <= self.base_success_rate <= 1.0:
            raise ValueError(f"agent {self.id!r} base_success_rate outside [0, 1]")
        for cap, value in self.capabilities.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"agent {self.id!r} capability {cap!r} outside [0, 1]")
        if self.unit_cost is not None and self.unit_cost < 0:
            raise ValueError(f"agent {self.id!r} has negative unit_cost")


@dataclass(frozen=True)
class SubtaskSpec:
    """One subtask: required capability set, importance weight, complexity."""

    id: str
    required_capabilities: frozenset[str]
    importance: float
    complexity: float

    def __post_init__(self):
        if not self.id:
            raise ValueError("subtask id must be non-empty")


@dataclass(frozen=True)
class TaskSpec:
    """A structured task: objective, constraints, quality targets, subtasks.

    Construction is permissive so that invalid specs can still be built and
    handed to :func:`validate_task` for a complete violation report.
    """

    id: str
    objective: str
    domain_tags: tuple[str, ...]
    budget: Decimal
    timeline_hours: float
    quality_requirements: dict[str, float]
    subtasks: tuple[SubtaskSpec, ...]


@dataclass(frozen=True)
class MarketCondition:
    """A liquidity scenario: how many agents show up and how noisy they are."""

    label: str
    available_agents: int
    quality_variance: float

    def __post_init__(self):
        if self.available_agents < 1:
            raise ValueError("available_agents must be >= 1")
        if self.quality_variance < 0:
            raise ValueError("quality_variance must be >= 0")


@dataclass(frozen=True)
class Violation:
    """One violated task invariant, identified by a stable code."""

    code: str
    message: str


def task_violations(task: TaskSpec) -> list[Violation]:
    """Check every task invariant; returns an empty list iff the task is valid."""
    violations: list[Violation] = []
    if task.budget <= 0:
        violations.append(Violation("NonPositiveBudget", f"budget {task.budget} must be > 0"))
    if task.timeline_hours <= 0:
        violations.append(Violation("NonPositiveTimeline", f"timeline {task.timeline_hours} must be > 0"))
    if not task.subtasks:
        violations.append(Violation("EmptySubtasks", "task must declare at least one subtask"))
        return violations

    seen: set[str] = set()
    for sub in task.subtasks:
        if sub.id in seen:
            violations.append(Violation("DuplicateSubtaskId", f"subtask id {sub.id!r} appears more than once"))
        seen.add(sub.id)
        if sub.complexity < 1.0:
            violations.append(
                Violation("ComplexityBelowOne", f"subtask {sub.id!r} complexity {sub.complexity} must be >= 1")
            )
        if not 0.0 <= sub.importance <= 1.0:
            violations.append(
                Violation("ImportanceOutOfRange", f"subtask {sub.id!r} importance {sub.importance} outside [0, 1]")
            )
    weight_sum = math.fsum(sub.importance for sub in task.subtasks)
    if abs(weight_sum - 1.0) > WEIGHT_SUM_TOLERANCE:
        violations.append(
            Violation("WeightSumViolation", f"subtask importances sum to {weight_sum!r}, expected 1.0")
        )
    return violations


def validate_task(task: TaskSpec) -> TaskSpec:
    """Return the task unchanged if valid, else raise with every violation listed."""
    violations = task_violations(task)
    if violations:
        raise TaskValidationError(task.id, violations)
    return task


def liquidity(condition: MarketCondition) -> float:
    """Market liquidity: agent availability damped by quality variance."""
    return condition.available_agents / (condition.quality_variance + 1.0)


def effective_unit_cost(agent: AgentProfile, task: TaskSpec) -> Decimal:
    """Per-subtask price of an agent for a task.

    Explicit ``unit_cost`` wins; otherwise the default scales the per-subtask
    budget slice by reliability, ``(budget / n_subtasks) * (0.5 + 0.5 * rho)``,
    so that a full assignment lands near the budget and the cost bound stays
    a live constraint.
    """
    if agent.unit_cost is not None:
        return agent.unit_cost
    slice_ = task.budget / len(task.subtasks)
    factor = Decimal(str(0.5 + 0.5 * agent.base_success_rate))
    return money(slice_ * factor)


# --- JSON loaders -----------------------------------------------------------
#
# File formats (all JSON):
#   taxonomy: {"<capability>": ["kw", ...], ..., "theta_min": 0.05}
#   agents:   [{"id", "display_name", "use_count", "success_rate",
#               "tools": [{"name", "description"}], "unit_cost"?}, ...]
#   task:     {"id", "objective", "domain_tags", "budget", "timeline_hours",
#              "quality_requirements", "subtasks": [{"id",
#              "required_capabilities", "importance", "complexity"}]}
#   markets:  [{"label", "available_agents", "quality_variance"}, ...]


def _read_json(path: Path):
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def load_taxonomy(path: str | Path) -> CapabilityTaxonomy:
    raw = _read_json(Path(path))
    if not isinstance(raw, dict):
        raise ConfigError(f"taxonomy file {path} must hold a JSON object")
    theta_min = float(raw.pop("theta_min", 0.05))
    return CapabilityTaxonomy.from_keywords(raw, theta_min=theta_min)


def load_agents(path: str | Path, taxonomy: CapabilityTaxonomy) -> list[AgentProfile]:
    """Load agent profiles and infer their capability vectors.

    Capabilities are always recomputed against the given taxonomy at load
    time; nothing stale is ever read from disk.
    """
    from .capability import infer_profile

    raw = _read_json(Path(path))
    if not isinstance(raw, list):
        raise ConfigError(f"agents file {path} must hold a JSON array")
    profiles = []
    for entry in raw:
        tools = tuple(ToolDescriptor(t["name"], t.get("description", "")) for t in entry["tools"])
        profile = AgentProfile(
            id=entry["id"],
            display_name=entry.get("display_name", entry["id"]),
            use_count=int(entry.get("use_count", 0)),
            base_success_rate=float(entry["success_rate"]),
            tools=tools,
            unit_cost=money(entry["unit_cost"]) if "unit_cost" in entry else None,
        )
        profiles.append(infer_profile(profile, taxonomy))
    return profiles


def load_task(path: str | Path, taxonomy: CapabilityTaxonomy | None = None) -> TaskSpec:
    raw = _read_json(Path(path))
    subtasks = tuple(
        SubtaskSpec(
            id=s["id"],
            required_capabilities=frozenset(s.get("required_capabilities", [])),
            importance=float(s["importance"]),
            complexity=float(s["complexity"]),
        )
        for s in raw.get("subtasks", [])
    )
    task = TaskSpec(
        id=raw["id"],
        objective=raw.get("objective", "analysis"),
        domain_tags=tuple(raw.get("domain_tags", [])),
        budget=money(raw["budget"]),
        timeline_hours=float(raw["timeline_hours"]),
        quality_requirements=dict(raw.get("quality_requirements", {})),
        subtasks=subtasks,
    )
    validate_task(task)
    if taxonomy is not None:
        for sub in task.subtasks:
            for cap in sorted(sub.required_capabilities):
                if cap not in taxonomy:
                    raise UnknownCapability(
                        f"task {task.id!r} subtask {sub.id!r} requires unknown capability {cap!r}"
                    )
    return task


def load_tasks(path: str | Path, taxonomy: CapabilityTaxonomy | None = None) -> list[TaskSpec]:
    """Load one task file, or every ``*.json`` in a directory (sorted by name)."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        if not files:
            raise ConfigError(f"no task files found in {p}")
        return [load_task(f, taxonomy) for f in files]
    return [load_task(p, taxonomy)]


def load_markets(path: str | Path) -> list[MarketCondition]:
    raw = _read_json(Path(path))
    if not isinstance(raw, list):
        raise ConfigError(f"markets file {path} must hold a JSON array")
    return [
        MarketCondition(
            label=entry["label"],
            available_agents=int(entry["available_agents"]),
            quality_variance=float(entry["quality_variance"]),
        )
        for entry in raw
    ]


def bundled_data_dir() -> Path:
    """Directory holding the packaged default datasets."""
    return Path(__file__).resolve().parent / "data"
