"""HTTP service: experiment endpoints plus interactive battle sessions."""

from pokegauntlet.service.app import create_app

__all__ = ["create_app"]
