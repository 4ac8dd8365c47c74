"""Separable physics-informed networks on numpy: Taylor jets for PDE
residuals, a reverse tape for training."""

__version__ = "0.1.0"
