"""Dual-scale aerial navigation: simulator, mapping, scene graph, staged agent."""

__version__ = "0.1.0"
