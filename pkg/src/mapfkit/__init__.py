"""Decentralized multi-agent path finding on grid maps."""

__version__ = "0.1.0"
