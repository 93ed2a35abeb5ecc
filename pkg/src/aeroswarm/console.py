"""Plain-HTTP client plumbing shared by the terminal tools.

The terminal tools are service clients only: every effect they have goes
through the ground-control HTTP API.  Each request is appended to
``calls`` so tests can verify nothing bypasses the service.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Any, Optional


class ApiError(Exception):
    """Non-2xx reply; carries the parsed body so callers can show the reason."""

    def __init__(self, status: int, body: Any):
        self.status = status
        self.body = body if isinstance(body, dict) else {}
        reason = self.body.get("reason") or self.body.get("error") or str(body)
        super().__init__(f"HTTP {status}: {reason}")

    @property
    def reason(self) -> str:
        return self.body.get("reason") or self.body.get("error") or f"HTTP {self.status}"


class GcsClient:
    def __init__(self, endpoint: str, timeout_s: float = 2.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.calls: list[tuple[str, str]] = []

    def _request(self, method: str, path: str, body: Optional[dict] = None) -> Any:
        self.calls.append((method, path))
        data = None if body is None else json.dumps(body).encode()
        req = urllib.request.Request(
            self.endpoint + path,
            data=data,
            method=method,
            headers={"content-type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as reply:
                return json.loads(reply.read().decode())
        except urllib.error.HTTPError as e:
            raw = e.read().decode()
            try:
                parsed = json.loads(raw)
            except json.JSONDecodeError:
                parsed = {"error": raw}
            raise ApiError(e.code, parsed) from None
        except (urllib.error.URLError, TimeoutError, OSError) as e:
            raise ConnectionError(f"service unreachable: {e}") from None

    def get(self, path: str) -> Any:
        return self._request("GET", path)

    def post(self, path: str, body: Optional[dict] = None) -> Any:
        return self._request("POST", path, body if body is not None else {})

    # -- convenience wrappers --

    def drones(self) -> list[dict]:
        return self.get("/drones")["drones"]

    def drone(self, ns: str) -> dict:
        return self.get(f"/drones/{ns}")

    def teleop(self, ns: str, command: dict) -> dict:
        return self.post(f"/teleop/{ns}", command)
