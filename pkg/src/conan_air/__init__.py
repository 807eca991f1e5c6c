"""Trace construction, curriculum sampling and reward verification for
multi-round evidence-grounded video reasoning."""

__version__ = "0.1.0"
