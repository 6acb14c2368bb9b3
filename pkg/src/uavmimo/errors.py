"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration. CLI maps this to exit code 2."""


class SchedulingError(ValueError):
    """Scheduler invariant violated (bad PRB count, negative user count, ...)."""


class EstimationError(ValueError):
    """Channel estimation called with inconsistent shapes or powers."""


class AggregationError(ValueError):
    """Metric aggregation over an empty or malformed sample set."""
