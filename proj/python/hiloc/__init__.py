"""Hierarchical Wi-Fi fingerprint localization."""

from ._hiloc import (
    DivergenceError,
    FormatError,
    Model,
    RunConfig,
    UnknownFloorError,
    localize,
    output_width,
    prepare,
    select_candidates,
    train,
)

__all__ = [
    "DivergenceError",
    "FormatError",
    "Model",
    "RunConfig",
    "UnknownFloorError",
    "localize",
    "output_width",
    "prepare",
    "select_candidates",
    "train",
]
