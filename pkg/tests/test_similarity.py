"""Similarity providers: truncation, lexical fallback, clamping, transport."""

import pytest
import requests
from hypothesis import given, strategies as st

from ctxdesc.similarity import (
    EmbeddingServiceClient,
    LexicalSimilarity,
    SimilarityConfig,
    SimilarityTransportError,
    clamp01,
    similarity,
    truncate_tokens,
)
from ctxdesc.snapshot import BoundingBox, ImageRef


def make_image(alt=None):
    return ImageRef(src="https://img.example/x.jpg", alt=alt, bbox=BoundingBox(0, 0, 10, 10))


def test_truncate_long_text_to_77():
    text = " ".join(f"w{i}" for i in range(100))
    out = truncate_tokens(text, 77)
    assert out.split() == [f"w{i}" for i in range(77)]


def test_truncate_short_text_unchanged():
    assert truncate_tokens("one two three four five", 77) == "one two three four five"


def test_truncate_prefix_semantics():
    assert truncate_tokens("a b c d", 2) == "a b"


def test_truncate_rejects_nonpositive_limit():
    with pytest.raises(ValueError):
        truncate_tokens("a", 0)


@given(st.text(), st.integers(min_value=1, max_value=100))
def test_truncate_idempotent(text, limit):
    once = truncate_tokens(text, limit)
    assert truncate_tokens(once, limit) == once


def test_lexical_overlap_score():
    provider = LexicalSimilarity()
    score = provider.score_texts(make_image(alt="red sofa"), ["red sofa sale"])[0]
    assert score == pytest.approx(2 / 3)


def test_lexical_zero_overlap():
    provider = LexicalSimilarity(title="couch catalogue")
    assert provider.score_texts(make_image(alt="red sofa"), ["privacy policy"])[0] == 0.0


def test_lexical_uses_title_tokens():
    provider = LexicalSimilarity(title="garden party")
    assert provider.score_texts(make_image(), ["garden"]) == [1.0]


def test_lexical_strips_punctuation_and_case():
    provider = LexicalSimilarity()
    assert provider.score_texts(make_image(alt="Easter Sunday,"), ["easter Sunday."])[0] == 1.0


def test_lexical_deterministic():
    provider = LexicalSimilarity(title="t")
    img = make_image(alt="a b")
    assert provider.score_texts(img, ["a b c"]) == provider.score_texts(img, ["a b c"])


@given(st.text(max_size=40), st.text(max_size=40), st.text(max_size=40))
def test_lexical_score_in_unit_interval(alt, title, text):
    provider = LexicalSimilarity(title=title)
    score = provider.score_texts(make_image(alt=alt or None), [text])[0]
    assert 0.0 <= score <= 1.0


class _FixedProvider:
    def __init__(self, values):
        self.values = values
        self.seen = []

    def score_texts(self, image, texts):
        self.seen.extend(texts)
        return list(self.values[: len(texts)])


def test_similarity_clamps_out_of_range():
    img = make_image()
    cfg = SimilarityConfig()
    assert similarity(img, "x", cfg, _FixedProvider([1.7])) == 1.0
    assert similarity(img, "x", cfg, _FixedProvider([-0.3])) == 0.0


def test_similarity_truncates_before_provider():
    provider = _FixedProvider([0.5])
    similarity(make_image(), " ".join(["tok"] * 200), SimilarityConfig(), provider)
    assert len(provider.seen[0].split()) == 77


def test_clamp01():
    assert clamp01(0.5) == 0.5
    assert clamp01(2.0) == 1.0
    assert clamp01(-1.0) == 0.0


def test_embedding_client_scores(monkeypatch):
    captured = {}

    class _Resp:
        def raise_for_status(self):
            pass

        def json(self):
            return {"scores": [0.1, 0.9]}

    def fake_post(url, json=None, timeout=None):
        captured["url"] = url
        captured["payload"] = json
        return _Resp()

    monkeypatch.setattr(requests, "post", fake_post)
    client = EmbeddingServiceClient(endpoint="http://embed.local/score")
    scores = client.score_texts(make_image(alt="a"), ["one", "two"])
    assert scores == [0.1, 0.9]
    assert captured["payload"]["texts"] == ["one", "two"]
    assert captured["payload"]["image_url"] == "https://img.example/x.jpg"


def test_embedding_client_sends_bytes_when_present(monkeypatch):
    captured = {}

    class _Resp:
        def raise_for_status(self):
            pass

        def json(self):
            return {"scores": [0.2]}

    monkeypatch.setattr(
        requests, "post", lambda url, json=None, timeout=None: captured.update(p=json) or _Resp()
    )
    img = ImageRef(src=None, alt=None, bbox=BoundingBox(0, 0, 1, 1), data=b"\x01\x02")
    EmbeddingServiceClient(endpoint="http://embed.local").score_texts(img, ["t"])
    assert "image_b64" in captured["p"]


def test_embedding_client_transport_error_is_typed(monkeypatch):
    def boom(url, json=None, timeout=None):
        raise requests.ConnectionError("no route")

    monkeypatch.setattr(requests, "post", boom)
    client = EmbeddingServiceClient(endpoint="http://down.local")
    with pytest.raises(SimilarityTransportError):
        client.score_texts(make_image(), ["t"])


def test_embedding_client_rejects_wrong_cardinality(monkeypatch):
    class _Resp:
        def raise_for_status(self):
            pass

        def json(self):
            return {"scores": [0.1]}

    monkeypatch.setattr(requests, "post", lambda *a, **k: _Resp())
    client = EmbeddingServiceClient(endpoint="http://embed.local")
    with pytest.raises(SimilarityTransportError, match="scores"):
        client.score_texts(make_image(), ["a", "b"])
