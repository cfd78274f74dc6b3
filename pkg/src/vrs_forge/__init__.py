"""Virtual reference station correction engine."""

__version__ = "0.1.0"
