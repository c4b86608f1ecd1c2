"""Exact boundary-trace computations on the Whitney tree of the von Koch snowflake."""

__version__ = "0.1.0"
