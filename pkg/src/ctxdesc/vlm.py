"""Vision-language-model clients: live HTTP and deterministic scripted mock.

Every prompt stage goes through the same `complete` interface. The mock
replays a stage-tagged transcript in strict order, which lets golden tests
pin the whole prompt chain without a network. `parse_structured` repairs
the usual model-output contamination (code fences, surrounding prose)
before JSON parsing.
"""

from __future__ import annotations

import base64
import json
import os
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import requests

from .snapshot import ImageRef


class VlmError(RuntimeError):
    """Base class for VLM client failures."""


class VlmTransportError(VlmError):
    """The live provider could not be reached within the retry budget."""


class TranscriptError(VlmError):
    """Scripted replay diverged: exhausted transcript or stage mismatch."""


class StructuredParseError(VlmError):
    """Model output held no parseable structured value, even after repair."""


@dataclass(frozen=True)
class VlmRequest:
    stage: str
    prompt: str
    image: ImageRef | None = None
    attachments: Any = None  # JSON-serializable payloads (scored segments, word lists)
    deterministic: bool = True

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")


@dataclass(frozen=True)
class VlmResponse:
    raw_text: str
    parsed: Any = None
    attempts: int = 1


@dataclass(frozen=True)
class TranscriptEntry:
    stage: str
    response: str


def load_transcript(path: str | Path) -> list[TranscriptEntry]:
    """Load an ordered (stage, response) fixture file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return transcript_from_records(doc)


def transcript_from_records(records: list[dict]) -> list[TranscriptEntry]:
    if not isinstance(records, list):
        raise ValueError("transcript must be a list of {stage, response} records")
    entries = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "stage" not in rec or "response" not in rec:
            raise ValueError(f"transcript record #{i} must carry stage and response")
        entries.append(TranscriptEntry(stage=str(rec["stage"]), response=str(rec["response"])))
    return entries


class MockVlm:
    """Replays a scripted transcript, enforcing stage order.

    Each pipeline run owns its own instance: the call counter and request
    log back cache and information-flow assertions in tests.
    """

    def __init__(self, transcript: list[TranscriptEntry]):
        self._pending = list(transcript)
        self.calls = 0
        self.requests: list[VlmRequest] = []

    def complete(self, req: VlmRequest) -> VlmResponse:
        self.calls += 1
        self.requests.append(req)
        if not self._pending:
            raise TranscriptError(
                f"transcript exhausted: no response scripted for stage {req.stage!r}"
            )
        entry = self._pending.pop(0)
        if entry.stage != req.stage:
            raise TranscriptError(
                f"stage mismatch: transcript expects {entry.stage!r}, request is {req.stage!r}"
            )
        return VlmResponse(raw_text=entry.response)

    @property
    def remaining(self) -> int:
        return len(self._pending)

    def healthy(self) -> bool:
        return True


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*(.*?)```", re.DOTALL)


def parse_structured(raw_text: str):
    """Extract the first JSON object or array from model output.

    Strips code fences and surrounding prose. Raises StructuredParseError
    when nothing parseable remains; the caller decides whether to re-ask.
    """
    text = raw_text.strip()
    if not text:
        raise StructuredParseError("empty model output")
    candidates = [text]
    for m in _FENCE_RE.finditer(text):
        candidates.append(m.group(1).strip())
    decoder = json.JSONDecoder()
    for candidate in candidates:
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            pass
        # Prose-wrapped value: parse from the first structural character on.
        for i, ch in enumerate(candidate):
            if ch in "[{":
                try:
                    value, _ = decoder.raw_decode(candidate[i:])
                    return value
                except json.JSONDecodeError:
                    break
    raise StructuredParseError(f"no structured value in model output: {raw_text[:200]!r}")


REPAIR_SUFFIX = "\n\nReturn only the structured value with no additional text."


def complete_structured(client, req: VlmRequest) -> tuple[Any, VlmResponse]:
    """Run a stage expecting structured output, with one repair re-ask."""
    resp = client.complete(req)
    try:
        return parse_structured(resp.raw_text), resp
    except StructuredParseError:
        repair = replace(req, prompt=req.prompt + REPAIR_SUFFIX)
        resp2 = client.complete(repair)
        value = parse_structured(resp2.raw_text)  # raises after the single repair
        return value, VlmResponse(raw_text=resp2.raw_text, attempts=2)


ENV_ENDPOINT = "CTXDESC_VLM_ENDPOINT"
ENV_API_KEY = "CTXDESC_VLM_API_KEY"
ENV_MODEL = "CTXDESC_VLM_MODEL"


@dataclass
class LiveVlm:
    """OpenAI-style chat-completions client.

    Configured from the environment by default. Sends the image by bytes
    when the snapshot carries them, else by URL, and bounds transport
    retries; it is safe to share across concurrent pipeline runs.
    """

    endpoint: str = field(default_factory=lambda: os.environ.get(ENV_ENDPOINT, ""))
    api_key: str = field(default_factory=lambda: os.environ.get(ENV_API_KEY, ""))
    model: str = field(default_factory=lambda: os.environ.get(ENV_MODEL, "gpt-4-vision-preview"))
    timeout: float = 120.0
    transport_retries: int = 2

    def __post_init__(self) -> None:
        if not self.endpoint:
            raise VlmError(f"live VLM endpoint not configured (set {ENV_ENDPOINT})")

    def _content_parts(self, req: VlmRequest) -> list[dict]:
        text = req.prompt
        if req.attachments is not None:
            text += "\n\n" + json.dumps(req.attachments, ensure_ascii=False)
        parts: list[dict] = [{"type": "text", "text": text}]
        if req.image is not None:
            if req.image.data is not None:
                b64 = base64.b64encode(req.image.data).decode("ascii")
                url = f"data:image/jpeg;base64,{b64}"
            else:
                url = req.image.src or ""
            parts.append({"type": "image_url", "image_url": {"url": url}})
        return parts

    def complete(self, req: VlmRequest) -> VlmResponse:
        payload = {
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": self._content_parts(req)}],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_exc: Exception | None = None
        for attempt in range(self.transport_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                return VlmResponse(raw_text=text, attempts=attempt + 1)
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_exc = exc
                if attempt < self.transport_retries:
                    time.sleep(0.5 * (attempt + 1))
        raise VlmTransportError(
            f"VLM request failed after {self.transport_retries + 1} attempts: {last_exc}"
        ) from last_exc

    def healthy(self) -> bool:
        return bool(self.endpoint and self.api_key)
