"""HTTP client for an external text-generation service.

The request body follows the llama.cpp server ``/completion`` shape:
``prompt``, ``n_predict``, ``temperature`` and, when constrained decoding is
wanted, ``grammar`` (GBNF text).  The reply's ``content`` field is returned.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import httpx

ENDPOINT_ENV = "HELPFORUM_ENDPOINT"


class ServiceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ServiceClient:
    endpoint: str
    timeout: float = 60.0
    n_predict: int = 256
    temperature: float = 0.0
    path: str = "/completion"

    @classmethod
    def from_env(cls, default: Optional[str] = None, **kw) -> "ServiceClient":
        url = os.environ.get(ENDPOINT_ENV, default)
        if not url:
            raise ServiceError(f"no endpoint configured (set {ENDPOINT_ENV})")
        return cls(url, **kw)

    def complete(self, prompt: str, grammar: Optional[str] = None, transport: Optional[httpx.BaseTransport] = None) -> str:
        body = {"prompt": prompt, "n_predict": self.n_predict, "temperature": self.temperature}
        if grammar is not None:
            body["grammar"] = grammar
        url = self.endpoint.rstrip("/") + self.path
        try:
            with httpx.Client(timeout=self.timeout, transport=transport) as client:
                resp = client.post(url, json=body)
        except httpx.TimeoutException as exc:
            raise ServiceError(f"request to {url} timed out") from exc
        except httpx.HTTPError as exc:
            raise ServiceError(f"request to {url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceError(f"service returned HTTP {resp.status_code}")
        try:
            data = resp.json()
        except ValueError as exc:
            raise ServiceError("service reply is not JSON") from exc
        text = data.get("content") if isinstance(data, dict) else None
        if not isinstance(text, str):
            raise ServiceError("service reply has no text 'content' field")
        return text


def call_service(prompt: str, grammar: Optional[str] = None, endpoint: Optional[str] = None, transport=None, **kw) -> str:
    client = ServiceClient(endpoint, **kw) if endpoint else ServiceClient.from_env(**kw)
    return client.complete(prompt, grammar, transport)
