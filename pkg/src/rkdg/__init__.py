"""Runge-Kutta discontinuous Galerkin solver for advection-diffusion-reaction systems."""
__version__ = "0.1.0"
