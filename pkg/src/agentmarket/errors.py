"""Exception types shared across the package."""


class MarketError(Exception):
    """Base class for all agentmarket errors."""


class TaskValidationError(MarketError):
    """A task spec violated one or more invariants.

    Carries the full list of violations so callers can report every
    problem at once instead of fixing them one by one.
    """

    def __init__(self, task_id: str, violations):
        self.task_id = task_id
        self.violations = list(violations)
        detail = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"task {task_id!r} is invalid: {detail}")


class UnknownCapability(MarketError):
    """A capability id is not present in the active taxonomy."""


class EmptyPool(MarketError):
    """An allocation was requested against an empty agent pool."""


class PoolTooLargeForExact(MarketError):
    """Exact subset enumeration was requested beyond its size bound."""


class TooManyPlayersForExact(MarketError):
    """Exact Shapley enumeration was requested beyond its size bound."""


class NoBids(MarketError):
    """An auction round closed without any bids."""


class IllegalTransition(MarketError):
    """An auction-round operation was applied in the wrong state."""


class CostBoundViolation(MarketError):
    """Quoted collaboration costs exceed the value available to pay them."""


class UnnormalizedShares(MarketError):
    """Attribution shares are negative or do not sum to one."""


class TrialNotFound(MarketError):
    """A trial selector did not match any record in the trial log."""


class ConfigError(MarketError):
    """A CLI configuration problem: missing file, bad flag value, unknown id."""
