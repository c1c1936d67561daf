"""Closed-form analysis, one module per information regime."""
