"""Finite-chain construction and scalar search used by the analysis modules."""
