"""Continual-learning benchmark harness for sequential spoof detection tasks."""

__version__ = "0.1.0"
