"""Compressed-image super-resolution by recursive unfolding of an
artefacts-removal module and a resolution-enhancement module."""

__version__ = "0.1.0"
