"""Collision-recovery MAC simulation and analysis for single-hop erasure networks."""

__version__ = "0.1.0"
