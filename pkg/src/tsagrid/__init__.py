"""Phasor-domain simulation of GPS time-stamp attacks on PMU applications."""

__version__ = "0.1.0"
