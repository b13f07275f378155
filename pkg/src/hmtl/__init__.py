"""Hierarchical multi-task learning for longitudinal progression risk."""

from hmtl.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
