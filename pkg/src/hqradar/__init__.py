"""Radar micro-Doppler drone detection/classification with classical and
hybrid quantum neural networks."""

__version__ = "0.1.0"
