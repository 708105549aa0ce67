"""Variational traveling vortex pairs for the inviscid 2D Boussinesq system."""
__version__ = "0.1.0"
