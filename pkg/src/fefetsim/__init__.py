"""Monte Carlo simulator for multi-level FeFET embedded memory."""

__version__ = "0.1.0"
