"""Gaussian-process surrogates for learning melt electrowritten jet behaviour."""

__version__ = "0.1.0"
