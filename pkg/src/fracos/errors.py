"""Package exception types."""


class PlacementError(ValueError):
    """Spawn/goal placement violates the layout (wall, out of bounds, unreachable)."""


class ContractError(RuntimeError):
    """An operation was invoked outside its contract (e.g. empty initiation set)."""


class SearchSpaceError(RuntimeError):
    """The |A|^b candidate enumeration exceeds the configured cap."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
