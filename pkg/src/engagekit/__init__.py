"""Engagement estimation from remote pulse signals and behavioral features."""

__version__ = "0.1.0"
