"""Thermal-aware differential fuzzing of compute-graph runtimes."""

__version__ = "0.1.0"
