"""Triple-differences (DDD) estimation for staggered adoption designs."""

from ddd._core import (
    ConfigError,
    EstimationError,
    PanelDataset,
    ValidationError,
    estimate,
    event_study,
    generate,
    load,
    save,
    simulate,
    validate,
)

__all__ = [
    "ConfigError",
    "EstimationError",
    "PanelDataset",
    "ValidationError",
    "estimate",
    "event_study",
    "generate",
    "load",
    "save",
    "simulate",
    "validate",
]
