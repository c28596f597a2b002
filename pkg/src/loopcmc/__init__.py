"""Timelike CMC surfaces from loop-group potentials."""

__version__ = "0.1.0"
