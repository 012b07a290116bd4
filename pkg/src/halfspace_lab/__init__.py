"""Simulation lab for relative-error testing of halfspaces over the Boolean hypercube."""
__version__ = "0.1.0"
