"""Temporal-logic-guided hybrid-policy RL on an analytic tabletop world."""

__version__ = "0.1.0"
