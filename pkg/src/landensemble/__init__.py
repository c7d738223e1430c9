"""Ensemble feature selection for multispectral land-cover classification."""

from .svm import BACKEND as SMO_BACKEND

__version__ = "0.1.0"

__all__ = ["SMO_BACKEND", "__version__"]
