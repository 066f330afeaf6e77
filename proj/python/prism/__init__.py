"""Interpretable political-bias embeddings over mined controversial topics."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
