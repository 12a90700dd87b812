"""Synthetic dataset surfaces."""

from .base import Surface
from .surfaces import SURFACES, surface_kinds

__all__ = ["SURFACES", "Surface", "surface_kinds"]
