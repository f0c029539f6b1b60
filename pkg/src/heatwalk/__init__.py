"""Random-walk approximation of the heat equation and its convergence checks."""

__version__ = "0.1.0"
