"""Arbitrarily varying relay channels: capacity bounds, symmetrizability and simulation."""
from __future__ import annotations

__version__ = "0.1.0"

from .channel import RelayChannel, StateUncertainty, example1_channel, validate
from .errors import (
    AVRCError,
    ChannelError,
    ConsistencyError,
    ResourceCapError,
    SolverError,
    SpecError,
    StructureError,
    ValidationError,
)
from .probability import CondPmf, Pmf, Sequence

__all__ = [
    "__version__",
    "RelayChannel",
    "StateUncertainty",
    "example1_channel",
    "validate",
    "Pmf",
    "CondPmf",
    "Sequence",
    "AVRCError",
    "ChannelError",
    "ConsistencyError",
    "ResourceCapError",
    "SolverError",
    "SpecError",
    "StructureError",
    "ValidationError",
]
