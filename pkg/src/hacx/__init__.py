"""Hierarchical goal-conditioned RL with a novelty-curriculum exploration
policy, on continuous 2D point-mass navigation."""

__version__ = "0.1.0"
