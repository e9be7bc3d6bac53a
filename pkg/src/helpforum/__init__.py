"""Decentralized multi-robot help requests with STL-priced offers."""

__version__ = "0.1.0"
