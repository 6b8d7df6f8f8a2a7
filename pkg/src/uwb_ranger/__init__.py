"""UWB ranging from channel parameters with GPR, kernel PCA and hybrid estimators."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
