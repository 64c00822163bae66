"""Completion client for OpenAI-compatible endpoints.

Three modes:
  live    -- query the endpoint, nothing persisted
  record  -- query the endpoint, persist each completion under its prompt
             hash so later runs can replay it
  replay  -- serve completions from the cache directory only; a miss is a
             MissingFixture error and no network I/O ever happens

The cache key is a SHA-256 digest over (model, temperature, max_tokens,
prompt), serialized as canonical JSON, so keys are byte-stable across
platforms. One file per hash, containing the raw completion text.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from .errors import LlmError, MissingFixture
from .prompts import Identity, Prompt

# transport(url, payload, headers) -> (status_code, parsed_json_body)
Transport = Callable[[str, dict, dict], tuple[int, dict]]

RETRY_BASE_SECONDS = 1.0
RETRY_FACTOR = 2.0
MAX_ATTEMPTS = 5


@dataclass(frozen=True)
class LlmParams:
    model: str
    temperature: float = 0.7
    max_tokens: int = 128
    endpoint: str = "https://api.openai.com/v1/completions"

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.max_tokens <= 4096):
            raise ValueError("max_tokens must be in (0, 4096]")


@dataclass(frozen=True)
class Generation:
    bio_id: str
    identity: str
    prompt_hash: str
    text: str
    from_cache: bool


def prompt_hash(params: LlmParams, prompt_text: str) -> str:
    canonical = json.dumps(
        {
            "max_tokens": params.max_tokens,
            "model": params.model,
            "prompt": prompt_text,
            "temperature": params.temperature,
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _requests_transport(url: str, payload: dict, headers: dict) -> tuple[int, dict]:
    resp = requests.post(url, json=payload, headers=headers, timeout=60)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


class LlmClient:
    """Thread-safe client with bounded parallelism and per-key single-flight
    (duplicate concurrent prompts trigger one upstream call in record mode)."""

    def __init__(
        self,
        params: LlmParams,
        mode: str = "replay",
        cache_dir: str | Path | None = None,
        api_key_env: str = "OPENAI_API_KEY",
        transport: Transport | None = None,
        max_in_flight: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("record", "replay") and cache_dir is None:
            raise ValueError(f"{mode} mode requires a cache directory")
        if mode in ("live", "record") and not os.environ.get(api_key_env):
            raise LlmError(
                f"{mode} mode requires an API key in the {api_key_env} environment variable")
        self.params = params
        self.mode = mode
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.api_key_env = api_key_env
        self.transport = transport or _requests_transport
        self.max_in_flight = max_in_flight
        self._sleep = sleep
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _key_lock(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def _cache_path(self, key: str) -> Path:
        assert self.cache_dir is not None
        return self.cache_dir / f"{key}.txt"

    def _read_cache(self, key: str) -> str | None:
        path = self._cache_path(key)
        if path.is_file():
            return path.read_text(encoding="utf-8")
        return None

    def _write_cache(self, key: str, text: str) -> None:
        assert self.cache_dir is not None
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, self._cache_path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _call_endpoint(self, prompt_text: str) -> str:
        payload = {
            "model": self.params.model,
            "prompt": prompt_text,
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_tokens,
        }
        headers = {"Authorization": f"Bearer {os.environ.get(self.api_key_env, '')}"}
        delay = RETRY_BASE_SECONDS
        last_error = "no attempts made"
        for attempt in range(MAX_ATTEMPTS):
            try:
                status, body = self.transport(self.params.endpoint, payload, headers)
            except Exception as exc:  # network failure: retry with backoff
                last_error = f"network error: {exc}"
                status = None
            else:
                if status == 200:
                    try:
                        text = body["choices"][0]["text"]
                    except (KeyError, IndexError, TypeError) as exc:
                        raise LlmError(f"malformed completion response: {exc}") from exc
                    if not text:
                        raise LlmError("endpoint returned an empty completion")
                    return text
                if status == 429 or status >= 500:
                    last_error = f"HTTP {status}"
                else:
                    raise LlmError(f"completion request failed with HTTP {status}")
            if attempt < MAX_ATTEMPTS - 1:
                self._sleep(delay)
                delay *= RETRY_FACTOR
        raise LlmError(f"completion failed after {MAX_ATTEMPTS} attempts ({last_error})")

    def complete(self, prompt: Prompt) -> Generation:
        key = prompt_hash(self.params, prompt.text)

        def gen(text: str, from_cache: bool) -> Generation:
            return Generation(
                bio_id=prompt.bio_id,
                identity=prompt.identity.value,
                prompt_hash=key,
                text=text,
                from_cache=from_cache,
            )

        if self.mode == "replay":
            cached = self._read_cache(key)
            if cached is None:
                raise MissingFixture(key)
            if not cached:
                raise LlmError(f"replay fixture {key} is empty")
            return gen(cached, True)
        if self.mode == "record":
            with self._key_lock(key):
                cached = self._read_cache(key)
                if cached is not None:
                    return gen(cached, True)
                text = self._call_endpoint(prompt.text)
                self._write_cache(key, text)
                return gen(text, False)
        return gen(self._call_endpoint(prompt.text), False)

    def complete_many(self, prompts: list[Prompt]) -> list[Generation]:
        if not prompts:
            return []
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(self.complete, prompts))

    def complete_text(self, prompt_text: str) -> str:
        """Completion for a bare prompt string (used by the rewrite loop)."""
        return self.complete(
            Prompt(bio_id="", identity=Identity.CONTROL, text=prompt_text)).text
