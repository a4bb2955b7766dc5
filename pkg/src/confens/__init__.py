"""Conformal prediction intervals for ensemble regressors.

Trains snapshot ensembles of small feed-forward networks (plus an
independently-trained ensemble and a random-forest baseline), converts
validation residuals and ensemble spread into calibrated prediction
intervals, and evaluates their validity and efficiency.
"""

__version__ = "0.1.0"


class ConfensError(Exception):
    """Base class for all package-specific errors."""
