"""Estimation, resampling, limit-law and experiment services."""
