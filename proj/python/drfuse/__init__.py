"""Fusion of dimension-reduced estimates: maps, fusion rules, message codec and scenarios."""

from ._drfuse import *  # noqa: F401,F403
from ._drfuse import DrfuseError

__all__ = [name for name in dir() if not name.startswith("_")]
