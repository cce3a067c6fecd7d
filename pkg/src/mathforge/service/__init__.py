"""HTTP service exposing runs, stages, reports, and fixture checks."""

from .app import create_app

__all__ = ["create_app"]
