"""Point-impact functional linear regression with fractional Brownian trajectories."""

__version__ = "0.1.0"

__all__ = ["__version__"]
