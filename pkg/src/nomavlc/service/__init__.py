"""HTTP service wrapping the simulator: request/response schemas and the app."""

from .app import create_app

__all__ = ["create_app"]
