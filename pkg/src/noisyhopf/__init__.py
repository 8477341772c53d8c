"""Additive-noise shift of a delay-induced Hopf bifurcation."""

__version__ = "0.1.0"
