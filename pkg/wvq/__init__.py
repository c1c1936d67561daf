"""wvq.

Equilibrium and socially optimal joining strategies in the discrete-time
Geo/Geo/1 queue with multiple working vacations, under observable, partially
observable and unobservable information.
"""

from __future__ import annotations

from .model import EconParams, QueueParams, ServerPhase, SystemState, validate
from .strategy import BlindJoin, MixedPair, Strategy, ThresholdPair

__all__ = [
    "BlindJoin",
    "EconParams",
    "MixedPair",
    "QueueParams",
    "ServerPhase",
    "Strategy",
    "SystemState",
    "ThresholdPair",
    "validate",
]
