from .app import ShowRegistry, create_app

__all__ = ["ShowRegistry", "create_app"]
