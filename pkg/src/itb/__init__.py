"""Integration test bench for a simulated online-retail order pipeline."""

__version__ = "0.1.0"
