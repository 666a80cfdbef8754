"""plateauplots: renders paper-style figures from plateaulab CSV outputs."""

__version__ = "0.1.0"
