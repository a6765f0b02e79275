"""Chat-completion client with rate limiting, retries, and record/replay.

Cassettes are the primary test surface: replay mode answers entirely from
the recorded transcripts and never opens a connection, which makes whole
pipeline runs reproducible byte for byte. Credentials come from
environment variables (OPENAI_API_KEY, GEMINI_API_KEY) and are never
stored in transcripts.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .prompts import JudgePrompt, PromptBundle


class GatewayError(RuntimeError):
    def __init__(self, message: str, status: int | None = None, raw: str | None = None):
        super().__init__(message)
        self.status = status
        self.raw = raw


PROVIDER_DEFAULTS = {
    "openai": "https://api.openai.com/v1",
    "google": "https://generativelanguage.googleapis.com/v1beta",
}


@dataclass(frozen=True)
class ModelSpec:
    provider: str
    model_name: str
    temperature: float = 0.0
    max_output_tokens: int = 512
    base_url: str | None = None

    def __post_init__(self):
        if self.provider not in PROVIDER_DEFAULTS:
            raise GatewayError(f"unknown provider: {self.provider!r}")
        if not self.model_name:
            raise GatewayError("model_name must be non-empty")
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")

    def digest(self) -> str:
        payload = f"{self.provider}|{self.model_name}|{self.temperature!r}|{self.max_output_tokens}"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def endpoint(self) -> str:
        base = self.base_url or os.environ.get(
            f"KGREX_{self.provider.upper()}_BASE_URL", PROVIDER_DEFAULTS[self.provider]
        )
        return base.rstrip("/")


def request_hash(prompt_render_hash: str, model: ModelSpec) -> str:
    h = hashlib.sha256()
    h.update(prompt_render_hash.encode("utf-8"))
    h.update(b":")
    h.update(model.digest().encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class Transcript:
    request_hash: str
    prompt_hash: str
    template_id: str
    provider: str
    model_name: str
    response_text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = 0.0
    timestamp: str = ""

    def to_json(self) -> dict:
        return {
            "request_hash": self.request_hash,
            "prompt_hash": self.prompt_hash,
            "template_id": self.template_id,
            "provider": self.provider,
            "model_name": self.model_name,
            "response_text": self.response_text,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "latency_s": self.latency_s,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, record: dict) -> "Transcript":
        return cls(**record)


RECORD = "record"
REPLAY = "replay"
PASSTHROUGH = "passthrough"


class Cassette:
    """JSONL transcript store keyed by request hash.

    Replay answers from the file and performs no network activity;
    record persists every new transcript, sorted by hash on flush.
    """

    def __init__(self, path: str | Path | None, mode: str = REPLAY):
        if mode not in (RECORD, REPLAY, PASSTHROUGH):
            raise GatewayError(f"unknown cassette mode: {mode!r}")
        if mode in (RECORD, REPLAY) and path is None:
            raise GatewayError(f"{mode} mode needs a cassette path")
        self.mode = mode
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, Transcript] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    t = Transcript.from_json(json.loads(line))
                    self.entries[t.request_hash] = t

    def get(self, key: str) -> Transcript | None:
        return self.entries.get(key)

    def put(self, transcript: Transcript) -> None:
        with self._lock:
            self.entries[transcript.request_hash] = transcript
            self._flush_locked()

    def _flush_locked(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lines = [
            json.dumps(self.entries[k].to_json(), sort_keys=True)
            for k in sorted(self.entries)
        ]
        self.path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class RateLimiter:
    """Sliding-window limiter: at most requests_per_minute calls per provider."""

    def __init__(self, requests_per_minute: int = 60, time_fn=time.monotonic,
                 sleep_fn=time.sleep):
        self.rpm = requests_per_minute
        self.time_fn = time_fn
        self.sleep_fn = sleep_fn
        self._windows: dict[str, list[float]] = {}
        self._lock = threading.Lock()

    def acquire(self, provider: str) -> None:
        with self._lock:
            now = self.time_fn()
            window = self._windows.setdefault(provider, [])
            window[:] = [t for t in window if now - t < 60.0]
            if len(window) >= self.rpm:
                wait = 60.0 - (now - window[0])
                if wait > 0:
                    self.sleep_fn(wait)
                now = self.time_fn()
                window[:] = [t for t in window if now - t < 60.0]
            window.append(now)


_TRANSIENT_STATUSES = {408, 429, 500, 502, 503, 504}


def _call_provider(prompt_text: str, model: ModelSpec, timeout: float) -> tuple[str, int, int]:
    """One provider round trip; returns (text, prompt_tokens, completion_tokens)."""
    if model.provider == "openai":
        url = f"{model.endpoint()}/chat/completions"
        headers = {"Authorization": f"Bearer {os.environ.get('OPENAI_API_KEY', '')}"}
        body = {
            "model": model.model_name,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": model.temperature,
            "max_tokens": model.max_output_tokens,
        }
        resp = requests.post(url, json=body, headers=headers, timeout=timeout)
        if resp.status_code != 200:
            raise GatewayError(
                f"openai call failed with status {resp.status_code}",
                status=resp.status_code,
                raw=resp.text[:2000],
            )
        data = resp.json()
        usage = data.get("usage", {})
        return (
            data["choices"][0]["message"]["content"],
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
        )

    url = f"{model.endpoint()}/models/{model.model_name}:generateContent"
    params = {"key": os.environ.get("GEMINI_API_KEY", "")}
    body = {
        "contents": [{"parts": [{"text": prompt_text}]}],
        "generationConfig": {
            "temperature": model.temperature,
            "maxOutputTokens": model.max_output_tokens,
        },
    }
    resp = requests.post(url, json=body, params=params, timeout=timeout)
    if resp.status_code != 200:
        raise GatewayError(
            f"google call failed with status {resp.status_code}",
            status=resp.status_code,
            raw=resp.text[:2000],
        )
    data = resp.json()
    usage = data.get("usageMetadata", {})
    return (
        data["candidates"][0]["content"]["parts"][0]["text"],
        int(usage.get("promptTokenCount", 0)),
        int(usage.get("candidatesTokenCount", 0)),
    )


class Gateway:
    """Uniform completion client over one cassette."""

    def __init__(self, cassette: Cassette, requests_per_minute: int = 60,
                 max_attempts: int = 3, base_delay: float = 1.0,
                 timeout: float = 60.0, time_fn=time.monotonic, sleep_fn=time.sleep):
        self.cassette = cassette
        self.limiter = RateLimiter(requests_per_minute, time_fn=time_fn, sleep_fn=sleep_fn)
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.timeout = timeout
        self.time_fn = time_fn
        self.sleep_fn = sleep_fn
        self.network_calls = 0

    def complete(self, prompt: PromptBundle | JudgePrompt, model: ModelSpec) -> Transcript:
        """Resolve a prompt to a transcript through the cassette discipline."""
        key = request_hash(prompt.render_hash, model)
        if self.cassette.mode == REPLAY:
            hit = self.cassette.get(key)
            if hit is None:
                raise GatewayError(f"replay miss for request_hash {key}")
            return hit

        transcript = self._network_complete(key, prompt, model)
        if self.cassette.mode == RECORD:
            self.cassette.put(transcript)
        return transcript

    def _network_complete(self, key: str, prompt, model: ModelSpec) -> Transcript:
        last_error: GatewayError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self.sleep_fn(self.base_delay * (2 ** (attempt - 1)))
            self.limiter.acquire(model.provider)
            start = self.time_fn()
            self.network_calls += 1
            try:
                text, p_tokens, c_tokens = _call_provider(
                    prompt.user_message, model, self.timeout
                )
            except GatewayError as exc:
                last_error = exc
                if exc.status in _TRANSIENT_STATUSES:
                    continue
                raise
            except requests.RequestException as exc:
                last_error = GatewayError(f"connection failure: {exc}")
                continue
            return Transcript(
                request_hash=key,
                prompt_hash=prompt.render_hash,
                template_id=prompt.template_id,
                provider=model.provider,
                model_name=model.model_name,
                response_text=text,
                prompt_tokens=p_tokens,
                completion_tokens=c_tokens,
                latency_s=round(self.time_fn() - start, 6),
                timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            )
        raise GatewayError(
            f"provider {model.provider} failed after {self.max_attempts} attempts: {last_error}",
            status=last_error.status if last_error else None,
            raw=last_error.raw if last_error else None,
        )

    def judge_score(self, prompt: JudgePrompt, model: ModelSpec) -> int:
        """Correctness score in [1, 5]; one strict reprompt on parse failure."""
        transcript = self.complete(prompt, model)
        score = parse_score(transcript.response_text)
        if score is not None:
            return score
        retry = JudgePrompt(
            template_id=prompt.template_id,
            background=prompt.background,
            user_message=prompt.user_message
            + "\n\nYour previous answer could not be parsed."
            + " Reply with ONLY one integer from 1 to 5.",
            render_hash=hashlib.sha256(
                (prompt.render_hash + ":reprompt").encode("utf-8")
            ).hexdigest(),
            output_contract=prompt.output_contract,
        )
        transcript2 = self.complete(retry, model)
        score = parse_score(transcript2.response_text)
        if score is None:
            raise GatewayError(
                "judge response not parseable as an integer in [1, 5]",
                raw=transcript2.response_text,
            )
        return score


_SCORE_RE = re.compile(r"(?<!\d)([1-5])(?!\d)")


def parse_score(text: str) -> int | None:
    """First standalone integer 1..5 in the text, or None."""
    m = _SCORE_RE.search(text)
    return int(m.group(1)) if m else None


def complete(prompt: PromptBundle | JudgePrompt, model: ModelSpec,
             cassette: Cassette, **gateway_kwargs) -> Transcript:
    return Gateway(cassette, **gateway_kwargs).complete(prompt, model)


def judge_score(prompt: JudgePrompt, model: ModelSpec, cassette: Cassette,
                **gateway_kwargs) -> int:
    return Gateway(cassette, **gateway_kwargs).judge_score(prompt, model)
