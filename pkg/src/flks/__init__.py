"""Traveling fronts and patterns in the 1-d flux-limited Keller-Segel model
with logistic-type growth."""

from .exceptions import ConfigError, DomainError, FLKSError, FrontNotFound, NoRootError, PositivityError
from .model import (
    FluxKind,
    FluxModel,
    ModelParams,
    ProliferationModel,
    critical_stiffness,
    flux_slope_at_zero,
    flux_velocity,
    is_linearly_stable,
    linear_stability_margin,
    proliferation_rate,
)

__version__ = "0.1.0"
