"""Command-line orchestration of the train, mediate, classify and validate stages."""

from .main import main

__all__ = ["main"]
