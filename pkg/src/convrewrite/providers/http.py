"""Vendor-neutral HTTP provider for chat/completion style endpoints.

Config file (JSON)::

    {
      "base_url": "https://llm.example.com",
      "path": "/v1/chat/completions",
      "model_name": "my-model",
      "auth_env_var": "LLM_API_KEY",
      "timeout_ms": 30000,
      "max_retries": 3,
      "field_map": {"model": "model", "prompt": "messages",
                    "prompt_style": "chat", "response": "choices.0.message.content"},
      "params": {"temperature": 0}
    }

The token is only ever read from the environment variable named by
``auth_env_var``.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import httpx

from ..errors import ProviderError, ProviderErrorKind
from .base import ProviderDescriptor

log = logging.getLogger(__name__)

DEFAULT_FIELD_MAP = {
    "model": "model",
    "prompt": "messages",
    "prompt_style": "chat",
    "response": "choices.0.message.content",
}
DEFAULT_BACKOFF = (0.5, 1.0, 2.0)
_RETRY_STATUS = {429} | set(range(500, 600))


@dataclass(frozen=True)
class HttpProviderConfig:
    base_url: str
    path: str = "/v1/chat/completions"
    model_name: str = ""
    auth_env_var: Optional[str] = None
    timeout_ms: int = 30_000
    max_retries: int = 3
    field_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_FIELD_MAP))
    params: Mapping[str, Any] = field(default_factory=dict)
    max_concurrency: int = 4
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "HttpProviderConfig":
        if "base_url" not in doc:
            raise ValueError("provider config needs base_url")
        leaked = {"api_key", "token", "auth_token"} & set(doc)
        if leaked:
            raise ValueError(f"credentials must come from the environment, not the config ({', '.join(sorted(leaked))})")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown provider config keys: {', '.join(sorted(unknown))}")
        kwargs = dict(doc)
        kwargs["field_map"] = {**DEFAULT_FIELD_MAP, **doc.get("field_map", {})}
        return cls(**kwargs)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "HttpProviderConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/" + self.path.lstrip("/")


def _dig(doc: Any, dotted: str) -> Any:
    cur = doc
    for part in dotted.split("."):
        if isinstance(cur, list) and part.isdigit():
            cur = cur[int(part)]
        elif isinstance(cur, Mapping):
            cur = cur[part]
        else:
            raise KeyError(part)
    return cur


class HttpProvider:
    """Calls a remote model over HTTP with retries on transient failures.

    Retries cover transport errors, timeouts, 429 and 5xx; each retry waits
    ``backoff[i]`` seconds (last value repeats). Auth failures and malformed
    bodies are not retried.
    """

    def __init__(
        self,
        config: HttpProviderConfig,
        *,
        client: Optional[httpx.Client] = None,
        backoff: Sequence[float] = DEFAULT_BACKOFF,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        self.descriptor = ProviderDescriptor(
            f"http:{config.url}", config.model_name, deterministic=False
        )
        self._client = client or httpx.Client(timeout=config.timeout_ms / 1000.0)
        self._backoff = tuple(backoff) or (0.0,)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_concurrency))

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpProvider":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def _error(self, kind: ProviderErrorKind, detail: str, **kw: Any) -> ProviderError:
        return ProviderError(kind, detail, provider_id=self.descriptor.provider_id, **kw)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        var = self.config.auth_env_var
        if var:
            token = os.environ.get(var)
            if not token:
                raise self._error(ProviderErrorKind.AUTH, f"environment variable {var} is not set")
            headers[self.config.auth_header] = f"{self.config.auth_scheme} {token}".strip()
        return headers

    def build_body(self, prompt: str) -> dict[str, Any]:
        fm = self.config.field_map
        body: dict[str, Any] = dict(self.config.params)
        if fm.get("model") and self.config.model_name:
            body[fm["model"]] = self.config.model_name
        if fm.get("prompt_style", "chat") == "chat":
            body[fm["prompt"]] = [{"role": "user", "content": prompt}]
        else:
            body[fm["prompt"]] = prompt
        return body

    def extract(self, response: httpx.Response) -> str:
        raw = response.text
        try:
            text = _dig(response.json(), self.config.field_map["response"])
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise self._error(
                ProviderErrorKind.MALFORMED,
                f"cannot read {self.config.field_map['response']!r} from response: {exc!r}",
                status=response.status_code,
                raw=raw,
            ) from None
        if not isinstance(text, str):
            raise self._error(
                ProviderErrorKind.MALFORMED, "completion field is not a string",
                status=response.status_code, raw=raw,
            )
        return text

    def generate(self, prompt: str) -> str:
        headers = self._headers()
        body = self.build_body(prompt)
        attempts = self.config.max_retries + 1
        last: Optional[ProviderError] = None
        for attempt in range(attempts):
            if attempt:
                delay = self._backoff[min(attempt - 1, len(self._backoff) - 1)]
                log.debug("retrying %s in %.2fs after %s", self.config.url, delay, last)
                self._sleep(delay)
            try:
                with self._slots:
                    response = self._client.post(self.config.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = self._error(ProviderErrorKind.TIMEOUT, f"request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last = self._error(ProviderErrorKind.TRANSPORT, f"transport failure: {exc}")
                continue
            status = response.status_code
            if status in (401, 403):
                raise self._error(ProviderErrorKind.AUTH, f"HTTP {status}", status=status, raw=response.text)
            if status == 429:
                last = self._error(ProviderErrorKind.RATE_LIMITED, "HTTP 429", status=status, raw=response.text)
                continue
            if status >= 500:
                last = self._error(ProviderErrorKind.SERVER, f"HTTP {status}", status=status, raw=response.text)
                continue
            if status >= 400:
                raise self._error(ProviderErrorKind.OTHER, f"HTTP {status}", status=status, raw=response.text)
            return self.extract(response)
        assert last is not None
        raise last
