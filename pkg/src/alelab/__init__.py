"""Conformal aggregation laboratory: ALE, multinomial and Laplacian path models."""

__version__ = "0.1.0"
