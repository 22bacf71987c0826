"""Capability inference from tool descriptions, and capability-match scoring.

Matching is exact-token: text is lowercased, split on runs of
non-alphanumeric characters, and compared by set membership. There is no
stemming or substring matching, so "files" does not match the keyword
"file". This keeps the keyword-overlap computation reproducible.
"""

from __future__ import annotations

import re
from dataclasses import replace
from math import fsum

from .domain import AgentProfile, CapabilityTaxonomy, SubtaskSpec
from .errors import UnknownCapability

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> frozenset[str]:
    """Lowercase, split on non-alphanumerics, drop empty fragments."""
    return frozenset(_TOKEN.findall(text.lower()))


def capability_strength(agent: AgentProfile, capability: str, taxonomy: CapabilityTaxonomy) -> float:
    """Mean over the agent's tools of the floored keyword-overlap fraction.

    Each tool contributes ``max(|K ∩ tokens(description)| / |K|, theta_min)``,
    so the result always lies in [theta_min, 1] and an agent with no matching
    tools still receives the baseline floor.
    """
    keywords = taxonomy.entries.get(capability)
    if keywords is None:
        raise UnknownCapability(f"capability {capability!r} is not in the taxonomy")
    denom = len(keywords)
    terms = [
        max(len(keywords & tokenize(tool.description)) / denom, taxonomy.theta_min)
        for tool in agent.tools
    ]
    return fsum(terms) / len(terms)


def infer_profile(agent: AgentProfile, taxonomy: CapabilityTaxonomy) -> AgentProfile:
    """Return a copy of the agent with one capability score per taxonomy entry."""
    capabilities = {cap: capability_strength(agent, cap, taxonomy) for cap in taxonomy.entries}
    return replace(agent, capabilities=capabilities)


def capability_match(agent: AgentProfile, subtask: SubtaskSpec) -> float:
    """Normalized overlap of an agent against a subtask's required capabilities.

    Mean of the agent's scores over the required set, capped at 1.0. An empty
    requirement set is vacuously satisfied and scores 1.0. Requires the
    agent's capability vector to be populated (see :func:`infer_profile`).
    """
    required = subtask.required_capabilities
    if not required:
        return 1.0
    mean = fsum(agent.capabilities[cap] for cap in required) / len(required)
    return min(mean, 1.0)
