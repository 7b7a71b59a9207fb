"""Generative skills that sample action and predicate-belief trajectories jointly."""

__version__ = "0.1.0"
