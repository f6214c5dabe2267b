"""Statevector simulation and measurement-based diffusion generative learning."""

__version__ = "0.1.0"
