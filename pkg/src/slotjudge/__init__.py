"""Single-forward-pass multi-requirement judging on a synthetic scene world."""

__version__ = "0.1.0"
