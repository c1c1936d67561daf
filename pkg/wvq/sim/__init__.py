"""Monte Carlo oracle."""

from __future__ import annotations

from .checks import Estimate, FrequencyReport, transition_frequency_check
from .simulator import SimConfig, SimResult, simulate, tagged_sojourn

__all__ = [
    "Estimate",
    "FrequencyReport",
    "SimConfig",
    "SimResult",
    "simulate",
    "tagged_sojourn",
    "transition_frequency_check",
]
