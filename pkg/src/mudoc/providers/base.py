"""Shared adapter plumbing: retries, in-flight caps, HTTP transport."""

from __future__ import annotations

import base64
import io
import threading
import time
from typing import Any, Callable

import httpx
from PIL import Image

from ..errors import ProviderUnavailable

DEFAULT_BACKOFF = (0.5, 1.0, 2.0)


class ProviderStats:
    """Thread-safe call counters, one bucket per provider kind."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.counts: dict[str, int] = {}

    def bump(self, kind: str) -> None:
        with self._lock:
            self.counts[kind] = self.counts.get(kind, 0) + 1

    def total(self) -> int:
        with self._lock:
            return sum(self.counts.values())

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self.counts)


def call_with_retries(
    fn: Callable[[], Any],
    backoff: tuple[float, ...] = DEFAULT_BACKOFF,
    sleep: Callable[[float], None] = time.sleep,
) -> Any:
    """Run fn, retrying transient transport failures with backoff.

    Transient means connection errors, timeouts, and 5xx responses.
    After the final attempt the last failure surfaces as
    ProviderUnavailable.
    """
    last: Exception | None = None
    for attempt in range(len(backoff) + 1):
        try:
            return fn()
        except httpx.HTTPStatusError as exc:
            if exc.response.status_code < 500:
                raise
            last = exc
        except (httpx.TransportError, ConnectionError, TimeoutError) as exc:
            last = exc
        if attempt < len(backoff):
            sleep(backoff[attempt])
    raise ProviderUnavailable(f"backend unreachable after retries: {last}") from last


class HttpAdapter:
    """Base for HTTP-backed providers: client, auth, concurrency cap."""

    def __init__(
        self,
        base_url: str,
        timeout_s: float = 60.0,
        api_key: str = "",
        max_inflight: int = 4,
        backoff: tuple[float, ...] = DEFAULT_BACKOFF,
        sleep: Callable[[float], None] = time.sleep,
        stats: ProviderStats | None = None,
        stats_key: str = "http",
    ):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout_s)
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._gate = threading.BoundedSemaphore(max(1, max_inflight))
        self._backoff = backoff
        self._sleep = sleep
        self._stats = stats
        self._stats_key = stats_key

    def post_json(self, path: str, payload: dict) -> dict:
        if self._stats is not None:
            self._stats.bump(self._stats_key)

        def attempt() -> dict:
            with self._gate:
                resp = self._client.post(self.base_url + path, json=payload, headers=self._headers)
            resp.raise_for_status()
            return resp.json()

        return call_with_retries(attempt, self._backoff, self._sleep)

    def close(self) -> None:
        self._client.close()


def image_to_b64(image: Image.Image) -> str:
    buf = io.BytesIO()
    image.convert("RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def b64_to_image(data: str) -> Image.Image:
    return Image.open(io.BytesIO(base64.b64decode(data)))
