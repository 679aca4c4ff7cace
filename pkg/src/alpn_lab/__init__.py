"""Adaptive learning path navigation laboratory."""
