"""Image-text similarity providers.

Two providers sit behind one small interface: an HTTP client for an
embedding-based similarity service, and a lexical fallback so the whole
pipeline can run deterministically offline. The fallback is a test
stand-in — normalized token overlap against the image's alt text and the
page title — and makes no fidelity claim against embedding-based scores.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from .snapshot import ImageRef

DEFAULT_MAX_TOKENS = 77  # embedding-model input limit the pipeline truncates to


class SimilarityTransportError(RuntimeError):
    """The embedding service could not be reached or answered garbage."""


@dataclass(frozen=True)
class SimilarityConfig:
    max_tokens: int = DEFAULT_MAX_TOKENS
    provider_kind: str = "lexical-fallback"  # or "embedding-service"

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")


def truncate_tokens(text: str, max_tokens: int = DEFAULT_MAX_TOKENS) -> str:
    """Return the prefix of text holding at most max_tokens whitespace tokens.

    Idempotent: truncating twice equals truncating once.
    """
    if max_tokens <= 0:
        raise ValueError(f"max_tokens must be positive, got {max_tokens}")
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


def clamp01(value: float) -> float:
    """Clamp into [0, 1]; downstream scoring math assumes that range."""
    return 0.0 if value < 0.0 else 1.0 if value > 1.0 else float(value)


class SimilarityProvider(Protocol):
    """Scores a batch of texts against one image, order-preserving."""

    def score_texts(self, image: ImageRef, texts: Sequence[str]) -> list[float]: ...


def _lexical_tokens(text: str) -> set[str]:
    # Lowercase and strip surrounding punctuation so "Sofa," matches "sofa".
    tokens = set()
    for raw in text.lower().split():
        token = raw.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")
        if token:
            tokens.add(token)
    return tokens


@dataclass(frozen=True)
class LexicalSimilarity:
    """Deterministic offline fallback provider.

    Score = |A ∩ B| / |B| where A is the token set of the image alt text
    plus the page title and B is the token set of the candidate text
    (0 when B is empty). Pure and safe to share across threads.
    """

    title: str = ""

    def score_texts(self, image: ImageRef, texts: Sequence[str]) -> list[float]:
        anchor = _lexical_tokens(f"{image.alt or ''} {self.title}")
        scores = []
        for text in texts:
            own = _lexical_tokens(text)
            scores.append(len(anchor & own) / len(own) if own else 0.0)
        return scores


@dataclass(frozen=True)
class EmbeddingServiceClient:
    """HTTP client for an embedding-based similarity service.

    Request carries the image (bytes when available, else URL) and the
    already-truncated texts; the response must return one numeric score per
    text in the same order.
    """

    endpoint: str
    timeout: float = 30.0

    def score_texts(self, image: ImageRef, texts: Sequence[str]) -> list[float]:
        payload: dict = {"texts": list(texts)}
        if image.data is not None:
            payload["image_b64"] = base64.b64encode(image.data).decode("ascii")
        else:
            payload["image_url"] = image.src
        try:
            resp = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise SimilarityTransportError(f"embedding service failed: {exc}") from exc
        scores = body.get("scores") if isinstance(body, dict) else None
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise SimilarityTransportError(
                f"embedding service returned {len(scores) if isinstance(scores, list) else 'no'} "
                f"scores for {len(texts)} texts"
            )
        try:
            return [float(s) for s in scores]
        except (TypeError, ValueError) as exc:
            raise SimilarityTransportError(f"non-numeric score in response: {exc}") from exc


def similarity(
    image: ImageRef,
    text: str,
    cfg: SimilarityConfig,
    provider: SimilarityProvider,
) -> float:
    """Score one text against the image, truncating before the provider call.

    Provider output is clamped into [0, 1]; transport failures raise, they
    never degrade to a silent 0.
    """
    truncated = truncate_tokens(text, cfg.max_tokens)
    return clamp01(provider.score_texts(image, [truncated])[0])
