"""qkdlab: a seedable laboratory for quantum key distribution and friends."""

__version__ = "0.1.0"
