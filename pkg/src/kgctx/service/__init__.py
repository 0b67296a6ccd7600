from .app import GraphNotFoundError, create_app

__all__ = ["GraphNotFoundError", "create_app"]
