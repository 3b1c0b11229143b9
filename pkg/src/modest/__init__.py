"""Sequential community-mode estimation: estimators, bounds and simulation."""

__version__ = "0.1.0"
