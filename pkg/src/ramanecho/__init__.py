"""Simulator for optically driven nuclear-spin coherence in a four-level double-lambda emitter."""

__version__ = "0.1.0"
