"""Image-relevance scoring of page text segments.

Each visible text segment gets a proximity score (how close its nearest
edge is to the image center, normalized over the surviving segments), a
layout score (which side of the image it sits on), and a content-similarity
score. The final score is their fixed weighted combination; segments whose
similarity falls below a floor are discarded before normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .similarity import SimilarityConfig, SimilarityProvider, clamp01, truncate_tokens
from .snapshot import BoundingBox, PageSnapshot, TextSegment, image_center

Side = Literal["top", "bottom", "left", "right"]

# Sides close in value on purpose: layout mostly breaks proximity ties, with a
# slight edge for left/right placements, which tend to carry image details.
LAYOUT_SCORES: dict[str, float] = {"top": 0.8, "bottom": 0.8, "left": 0.9, "right": 0.9}

_WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RelevanceWeights:
    """Weights of the final-score combination; must be non-negative and sum to 1."""

    w_proximity: float = 0.55
    w_layout: float = 0.1
    w_similarity: float = 0.35

    def __post_init__(self) -> None:
        if min(self.w_proximity, self.w_layout, self.w_similarity) < 0:
            raise ValueError("relevance weights must be non-negative")
        total = self.w_proximity + self.w_layout + self.w_similarity
        if abs(total - 1.0) > _WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"relevance weights must sum to 1.0, got {total!r}")


@dataclass(frozen=True)
class FilterConfig:
    """Similarity floor; segments scoring below it never enter the ranking."""

    min_similarity: float = 0.001

    def __post_init__(self) -> None:
        if self.min_similarity < 0:
            raise ValueError("min_similarity must be >= 0")


@dataclass(frozen=True)
class ScoredSegment:
    segment: TextSegment
    distance_px: float
    proximity: float
    layout_side: Side
    layout: float
    similarity: float
    final_score: float


def point_to_rect_distance(p: tuple[float, float], r: BoundingBox) -> float:
    """Euclidean distance from p to the nearest point of r; 0 inside."""
    qx = min(max(p[0], r.x), r.x + r.w)
    qy = min(max(p[1], r.y), r.y + r.h)
    return math.hypot(qx - p[0], qy - p[1])


def classify_side(center: tuple[float, float], r: BoundingBox) -> Side:
    """Which side of the image center the rectangle's nearest point lies on.

    The dominant displacement axis decides; exact ties go to the vertical
    axis, and a center inside the rectangle counts as "top".
    """
    qx = min(max(center[0], r.x), r.x + r.w)
    qy = min(max(center[1], r.y), r.y + r.h)
    dx = qx - center[0]
    dy = qy - center[1]
    if abs(dx) > abs(dy):
        return "right" if dx > 0 else "left"
    if dx == 0 and dy == 0:
        return "top"
    return "bottom" if dy > 0 else "top"


def combine_score(
    proximity: float,
    layout: float,
    sim: float,
    weights: RelevanceWeights = RelevanceWeights(),
) -> float:
    return weights.w_proximity * proximity + weights.w_layout * layout + weights.w_similarity * sim


def score_segments(
    snapshot: PageSnapshot,
    weights: RelevanceWeights = RelevanceWeights(),
    filter_cfg: FilterConfig = FilterConfig(),
    provider: SimilarityProvider | None = None,
    sim_cfg: SimilarityConfig = SimilarityConfig(),
) -> list[ScoredSegment]:
    """Rank the snapshot's visible segments by image relevance.

    Invisible segments are excluded up front. Similarity is computed on
    token-truncated text and low-similarity segments are dropped before
    proximity normalization, so the farthest *surviving* segment defines the
    denominator. Output is sorted by final score descending, ties broken by
    ascending segment id.
    """
    if provider is None:
        from .similarity import LexicalSimilarity

        provider = LexicalSimilarity(title=snapshot.title)

    visible = [seg for seg in snapshot.segments if seg.visible]
    if not visible:
        return []

    texts = [truncate_tokens(seg.text, sim_cfg.max_tokens) for seg in visible]
    raw_scores = provider.score_texts(snapshot.image, texts)
    sims = [clamp01(s) for s in raw_scores]

    survivors = [
        (seg, sim) for seg, sim in zip(visible, sims) if sim >= filter_cfg.min_similarity
    ]
    if not survivors:
        return []

    center = image_center(snapshot.image)
    distances = [point_to_rect_distance(center, seg.bbox) for seg, _ in survivors]
    d_max = max(distances)

    scored = []
    for (seg, sim), dist in zip(survivors, distances):
        proximity = 1.0 if d_max == 0 or len(survivors) == 1 else 1.0 - dist / d_max
        side = classify_side(center, seg.bbox)
        layout = LAYOUT_SCORES[side]
        scored.append(
            ScoredSegment(
                segment=seg,
                distance_px=dist,
                proximity=proximity,
                layout_side=side,
                layout=layout,
                similarity=sim,
                final_score=combine_score(proximity, layout, sim, weights),
            )
        )
    scored.sort(key=lambda s: (-s.final_score, s.segment.id))
    return scored


def serialize_scored(scored: list[ScoredSegment]) -> list[dict]:
    """Wire shape consumed by the prompt chain and by debugging dumps."""
    return [
        {"id": s.segment.id, "text": s.segment.text, "final_score": s.final_score}
        for s in scored
    ]
