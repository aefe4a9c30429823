"""Joint friendship-network and binary-action potential game."""
__version__ = "0.1.0"
