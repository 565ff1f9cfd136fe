"""Thin client used by the CLI.

By default the app runs in-process (no sockets); ``--server`` swaps in a
real HTTP client against a running ``pokegauntlet serve``. Either way the
CLI only ever talks to the service surface.
"""

from __future__ import annotations

from typing import Optional

import httpx


class ServiceError(RuntimeError):
    """Non-2xx response, with the server's error detail attached."""

    def __init__(self, status_code: int, detail):
        self.status_code = status_code
        self.detail = detail if isinstance(detail, dict) else {"message": str(detail)}
        message = self.detail.get("message", str(detail))
        error_type = self.detail.get("type", "ServiceError")
        super().__init__(f"{error_type}: {message}")

    @property
    def error_type(self) -> str:
        return self.detail.get("type", "ServiceError")


class ServiceClient:
    def __init__(self, server_url: Optional[str] = None, root: Optional[str] = None):
        if server_url:
            self._client = httpx.Client(base_url=server_url.rstrip("/"), timeout=600.0)
        else:
            # In-process ASGI transport: same service code, no network.
            from starlette.testclient import TestClient

            from pokegauntlet.service.app import create_app

            self._client = TestClient(create_app(root), raise_server_exceptions=False)

    def close(self) -> None:
        self._client.close()

    def _handle(self, response: httpx.Response) -> dict:
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail")
            except Exception:  # noqa: BLE001 - non-JSON error body
                detail = response.text
            raise ServiceError(response.status_code, detail)
        return response.json()

    def get(self, path: str, **params) -> dict:
        return self._request("GET", path, params=params or None)

    def post(self, path: str, payload: Optional[dict] = None) -> dict:
        return self._request("POST", path, json=payload or {})

    def delete(self, path: str) -> dict:
        return self._request("DELETE", path)

    def _request(self, method: str, path: str, **kwargs) -> dict:
        try:
            response = self._client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            raise ServiceError(
                502, {"type": "TransportUnavailable", "message": str(exc)}
            ) from exc
        return self._handle(response)
