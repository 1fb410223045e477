"""Page-snapshot data model, wire format, and ingestion.

The browser side captures a page as a versioned JSON document; this module
validates and ingests those documents so the rest of the pipeline never
touches a DOM. Parsing is pure: the same bytes always yield the same
snapshot, and serialization round-trips losslessly.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import dataclass, field
from urllib.parse import urlparse

WIRE_VERSION = 1

# The only tags the capture side extracts text from.
TEXT_TAGS = frozenset({"a", "p", "span", "h1", "h2", "h3", "h4", "h5", "h6"})


class SnapshotError(ValueError):
    """A snapshot document failed validation."""


def normalize_text(text: str) -> str:
    """Collapse internal whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


@dataclass(frozen=True)
class BoundingBox:
    """Pixel rectangle: top-left corner plus non-negative size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise SnapshotError(f"bbox field {name!r} is not a number: {value!r}")
            if not math.isfinite(value):
                raise SnapshotError(f"bbox field {name!r} is not finite: {value!r}")
        if self.w < 0 or self.h < 0:
            raise SnapshotError(f"bbox has negative size: w={self.w}, h={self.h}")

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class TextSegment:
    """One extracted text element with its layout geometry."""

    id: int
    text: str
    tag: str
    bbox: BoundingBox
    visible: bool = True

    def __post_init__(self) -> None:
        if self.tag not in TEXT_TAGS:
            raise SnapshotError(
                f"segment tag {self.tag!r} is not an extractable text tag "
                f"(allowed: {', '.join(sorted(TEXT_TAGS))})"
            )
        if not self.text:
            raise SnapshotError("segment text is empty")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "tag": self.tag,
            "bbox": self.bbox.to_dict(),
            "visible": self.visible,
        }


@dataclass(frozen=True)
class ImageRef:
    """The selected image: source URL and/or raw bytes, alt text, geometry."""

    src: str | None
    alt: str | None
    bbox: BoundingBox
    data: bytes | None = None

    def __post_init__(self) -> None:
        if not self.src and self.data is None:
            raise SnapshotError("image needs at least one of src or data")

    def to_dict(self) -> dict:
        return {
            "src": self.src,
            "alt": self.alt,
            "bbox": self.bbox.to_dict(),
            "data": base64.b64encode(self.data).decode("ascii") if self.data is not None else None,
        }


@dataclass(frozen=True)
class PageSnapshot:
    """Everything the pipeline consumes about one page + selected image."""

    url: str
    title: str
    viewport: BoundingBox
    image: ImageRef
    segments: tuple[TextSegment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        parsed = urlparse(self.url)
        if not parsed.scheme or not parsed.netloc:
            raise SnapshotError(f"url is not absolute: {self.url!r}")
        if self.viewport.x != 0 or self.viewport.y != 0:
            raise SnapshotError("viewport origin must be (0, 0)")
        seen_ids: set[int] = set()
        for seg in self.segments:
            if seg.id in seen_ids:
                raise SnapshotError(f"duplicate segment id: {seg.id}")
            seen_ids.add(seg.id)

    def visible_segments(self) -> tuple[TextSegment, ...]:
        return tuple(seg for seg in self.segments if seg.visible)

    def to_dict(self) -> dict:
        return {
            "version": WIRE_VERSION,
            "url": self.url,
            "title": self.title,
            "viewport": self.viewport.to_dict(),
            "image": self.image.to_dict(),
            "segments": [seg.to_dict() for seg in self.segments],
        }


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SnapshotError(f"missing field {key!r} in {where}")
    return obj[key]


def _bbox_from_dict(obj, where: str) -> BoundingBox:
    if not isinstance(obj, dict):
        raise SnapshotError(f"{where} bbox is not an object")
    return BoundingBox(
        x=_require(obj, "x", f"{where} bbox"),
        y=_require(obj, "y", f"{where} bbox"),
        w=_require(obj, "w", f"{where} bbox"),
        h=_require(obj, "h", f"{where} bbox"),
    )


def snapshot_from_dict(doc: dict) -> PageSnapshot:
    """Build a validated snapshot from an already-parsed wire document.

    Unknown fields are ignored. Segments with non-whitelisted tags reject
    the whole document; segments whose text is empty after whitespace
    normalization are dropped silently; exact duplicate (text, bbox) pairs
    are collapsed to their first occurrence.
    """
    if not isinstance(doc, dict):
        raise SnapshotError("snapshot document is not an object")
    version = _require(doc, "version", "snapshot")
    if version != WIRE_VERSION:
        raise SnapshotError(f"unsupported snapshot version: {version!r}")

    url = _require(doc, "url", "snapshot")
    if not isinstance(url, str):
        raise SnapshotError("url is not a string")
    title = _require(doc, "title", "snapshot")
    if not isinstance(title, str):
        raise SnapshotError("title is not a string")
    viewport = _bbox_from_dict(_require(doc, "viewport", "snapshot"), "viewport")

    image_obj = _require(doc, "image", "snapshot")
    if not isinstance(image_obj, dict):
        raise SnapshotError("image is not an object")
    data_b64 = image_obj.get("data")
    data: bytes | None = None
    if data_b64 is not None:
        if not isinstance(data_b64, str):
            raise SnapshotError("image data is not a base64 string")
        try:
            data = base64.b64decode(data_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise SnapshotError(f"image data is not valid base64: {exc}") from exc
    image = ImageRef(
        src=image_obj.get("src"),
        alt=image_obj.get("alt"),
        bbox=_bbox_from_dict(_require(image_obj, "bbox", "image"), "image"),
        data=data,
    )

    raw_segments = doc.get("segments", [])
    if not isinstance(raw_segments, list):
        raise SnapshotError("segments is not a list")
    segments: list[TextSegment] = []
    seen_pairs: set[tuple[str, tuple]] = set()
    for i, raw in enumerate(raw_segments):
        if not isinstance(raw, dict):
            raise SnapshotError(f"segment #{i} is not an object")
        tag = _require(raw, "tag", f"segment #{i}")
        if tag not in TEXT_TAGS:
            raise SnapshotError(
                f"segment #{i} has tag {tag!r}, which is not an extractable text tag "
                f"(allowed: {', '.join(sorted(TEXT_TAGS))})"
            )
        text = normalize_text(str(_require(raw, "text", f"segment #{i}")))
        if not text:
            continue  # empty after normalization: dropped, not an error
        bbox = _bbox_from_dict(_require(raw, "bbox", f"segment #{i}"), f"segment #{i}")
        pair = (text, (bbox.x, bbox.y, bbox.w, bbox.h))
        if pair in seen_pairs:
            continue  # capture side may emit overlapping duplicates
        seen_pairs.add(pair)
        segments.append(
            TextSegment(
                id=_require(raw, "id", f"segment #{i}"),
                text=text,
                tag=tag,
                bbox=bbox,
                visible=bool(raw.get("visible", True)),
            )
        )

    return PageSnapshot(
        url=url,
        title=normalize_text(title),
        viewport=viewport,
        image=image,
        segments=tuple(segments),
    )


def parse_snapshot(raw: bytes | str) -> PageSnapshot:
    """Parse and validate a snapshot wire document (UTF-8 JSON)."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SnapshotError(f"snapshot is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
    return snapshot_from_dict(doc)


def serialize_snapshot(snapshot: PageSnapshot) -> bytes:
    """Serialize to the wire format. parse_snapshot(serialize_snapshot(s)) == s."""
    return json.dumps(snapshot.to_dict(), ensure_ascii=False, sort_keys=True).encode("utf-8")


def image_center(img: ImageRef) -> tuple[float, float]:
    """Midpoint of the image's bounding box."""
    return (img.bbox.x + img.bbox.w / 2, img.bbox.y + img.bbox.h / 2)
