"""Top-level package for qshs, the quadratic hyper-surface 0-1 loss SVM."""

__all__ = [
    "__version__",
]

__version__ = "0.1.0"
