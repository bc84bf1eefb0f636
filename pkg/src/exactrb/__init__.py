"""Exact unitary t-designs and higher-order randomized benchmarking."""

__version__ = "0.1.0"
