"""HTTP service exposing the running simulation."""

from fabula.service.app import EngineQueue, create_app

__all__ = ["EngineQueue", "create_app"]
