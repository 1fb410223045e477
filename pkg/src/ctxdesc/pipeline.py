"""Description pipeline: drives the full prompt chain over one snapshot.

Stage order is fixed: website purpose, initial context-aware description,
visually concrete word (VCW) extraction from alt/title/description, segment
scoring, VCW extraction from scored context, merge, filter, placeholder
assignment, three candidate long descriptions with name restoration,
selection, shortening, and the context-free (and optionally context-HTML)
baselines. A scripted VLM replays this exact order, so golden tests pin the
chain end to end.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .prompts import (
    PromptCatalog,
    STAGE_ASSIGN_PLACEHOLDERS,
    STAGE_CF_LONG,
    STAGE_CF_SHORT,
    STAGE_FILTER_VCW,
    STAGE_HTML_LONG,
    STAGE_HTML_SHORT,
    STAGE_INITIAL_DESCRIPTION,
    STAGE_LONG_CA,
    STAGE_MERGE_VCW,
    STAGE_PURPOSE,
    STAGE_RESTORE_NAMES,
    STAGE_SELECT_BEST,
    STAGE_SHORTEN_CA,
    STAGE_VCW_CONTEXT,
    STAGE_VCW_TEXT,
    default_catalog,
)
from .relevance import (
    FilterConfig,
    RelevanceWeights,
    ScoredSegment,
    score_segments,
    serialize_scored,
)
from .similarity import LexicalSimilarity, SimilarityConfig, SimilarityProvider
from .snapshot import ImageRef, PageSnapshot, normalize_text
from .vlm import VlmRequest, VlmTransportError, complete_structured

CATEGORIES = frozenset(
    {
        "ecommerce",
        "news",
        "educational",
        "social media",
        "entertainment",
        "lifestyle",
        "dating",
        "job portals",
        "services",
    }
)

PLACEHOLDER_LETTERS = "MNOPQRSTUVWXYZ"

# Element values the filter stage must never let through.
_ABSENT_ELEMENTS = frozenset({"none", "not present"})

STAGE_SCORE_SEGMENTS = "score_segments"  # local stage, no model call


class PipelineError(RuntimeError):
    """Base class for pipeline failures."""


class ResponseValidationError(PipelineError):
    """A model response parsed but violated a stage contract."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class EmptyOutputError(PipelineError):
    """A stage that must produce text returned nothing."""


class PipelineStageError(PipelineError):
    """Aborts a run, carrying the identity of the failing stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class WebsitePurpose:
    website: str
    category: str
    purpose: str

    def to_dict(self) -> dict:
        return {"website": self.website, "category": self.category, "purpose": self.purpose}

    @classmethod
    def from_dict(cls, obj: dict) -> "WebsitePurpose":
        return cls(website=obj["website"], category=obj["category"], purpose=obj["purpose"])


@dataclass(frozen=True)
class VisuallyConcreteWord:
    """A word or phrase from the context tied to a visible image element."""

    vcw: str
    element: str
    score: float | None = None

    def to_dict(self) -> dict:
        return {"vcw": self.vcw, "element": self.element, "score": self.score}

    @classmethod
    def from_dict(cls, obj: dict) -> "VisuallyConcreteWord":
        return cls(vcw=obj["vcw"], element=obj["element"], score=obj.get("score"))


class PlaceholderError(ResponseValidationError):
    """Placeholder assignment violated uniqueness or letter sequencing."""


@dataclass(frozen=True)
class PlaceholderMap:
    """Ordered letter-to-name assignments, letters running M, N, O, ..."""

    pairs: tuple[tuple[str, str], ...] = ()

    @classmethod
    def from_records(cls, records: list, raw_text: str = "") -> "PlaceholderMap":
        pairs: list[tuple[str, str]] = []
        for rec in records:
            if not isinstance(rec, dict):
                continue
            letter = str(rec.get("placeholder") or "").strip()
            name = str(rec.get("name") or "").strip()
            if not letter and not name:
                continue
            if not letter or not name:
                raise PlaceholderError(
                    f"placeholder record needs both letter and name: {rec!r}", raw_text
                )
            pairs.append((letter, name))
        letters = [p[0] for p in pairs]
        names = [p[1] for p in pairs]
        if len(set(letters)) != len(letters):
            raise PlaceholderError(f"duplicate placeholder letters: {letters}", raw_text)
        if len(set(names)) != len(names):
            raise PlaceholderError(f"duplicate placeholder names: {names}", raw_text)
        expected = list(PLACEHOLDER_LETTERS[: len(letters)])
        if letters != expected:
            raise PlaceholderError(
                f"placeholder letters must run {expected}, got {letters}", raw_text
            )
        return cls(pairs=tuple(pairs))

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def letters(self) -> tuple[str, ...]:
        return tuple(p[0] for p in self.pairs)

    def name_for(self, letter: str) -> str | None:
        for l, name in self.pairs:
            if l == letter:
                return name
        return None

    def records(self) -> list[dict]:
        return [{"placeholder": l, "name": n} for l, n in self.pairs]

    @classmethod
    def from_record_dicts(cls, records: list[dict]) -> "PlaceholderMap":
        return cls(pairs=tuple((r["placeholder"], r["name"]) for r in records))


@dataclass(frozen=True)
class DescriptionSet:
    """The four deliverable descriptions plus run provenance."""

    ca_long: str
    ca_short: str
    cf_long: str
    cf_short: str
    purpose: WebsitePurpose
    vcw_final: tuple[VisuallyConcreteWord, ...]
    placeholder_map: PlaceholderMap
    candidates: tuple[str, ...]
    selected_index: int
    timings: dict[str, float]
    pipeline_version: str
    provenance: dict
    html_long: str | None = None
    html_short: str | None = None

    def is_complete(self) -> bool:
        return bool(self.ca_long and self.ca_short and self.cf_long and self.cf_short)

    def to_dict(self) -> dict:
        return {
            "ca_long": self.ca_long,
            "ca_short": self.ca_short,
            "cf_long": self.cf_long,
            "cf_short": self.cf_short,
            "html_long": self.html_long,
            "html_short": self.html_short,
            "purpose": self.purpose.to_dict(),
            "vcw_final": [v.to_dict() for v in self.vcw_final],
            "placeholder_map": self.placeholder_map.records(),
            "candidates": list(self.candidates),
            "selected_index": self.selected_index,
            "timings": dict(self.timings),
            "pipeline_version": self.pipeline_version,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DescriptionSet":
        return cls(
            ca_long=obj["ca_long"],
            ca_short=obj["ca_short"],
            cf_long=obj["cf_long"],
            cf_short=obj["cf_short"],
            html_long=obj.get("html_long"),
            html_short=obj.get("html_short"),
            purpose=WebsitePurpose.from_dict(obj["purpose"]),
            vcw_final=tuple(VisuallyConcreteWord.from_dict(v) for v in obj["vcw_final"]),
            placeholder_map=PlaceholderMap.from_record_dicts(obj["placeholder_map"]),
            candidates=tuple(obj["candidates"]),
            selected_index=obj["selected_index"],
            timings=dict(obj["timings"]),
            pipeline_version=obj["pipeline_version"],
            provenance=dict(obj["provenance"]),
        )


@dataclass(frozen=True)
class PipelineConfig:
    weights: RelevanceWeights = RelevanceWeights()
    filter: FilterConfig = FilterConfig()
    similarity: SimilarityConfig = SimilarityConfig()
    catalog: PromptCatalog = field(default_factory=default_catalog)
    include_html_baseline: bool = False
    raw_html: str | None = None
    candidate_count: int = 3

    @property
    def pipeline_version(self) -> str:
        payload = json.dumps(
            {
                "weights": [
                    self.weights.w_proximity,
                    self.weights.w_layout,
                    self.weights.w_similarity,
                ],
                "min_similarity": self.filter.min_similarity,
                "max_tokens": self.similarity.max_tokens,
                "candidates": self.candidate_count,
            },
            sort_keys=True,
        )
        digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:8]
        return f"{self.catalog.version}+{digest}"


def _word_count(text: str) -> int:
    return len(text.split())


def _require_text(raw_text: str, stage: str) -> str:
    text = raw_text.strip()
    if not text:
        raise EmptyOutputError(f"stage {stage!r} produced empty output")
    return text


def _parse_vcw_list(
    value: Any,
    raw_text: str,
    keep_scores: bool,
    warnings: list[str] | None = None,
) -> list[VisuallyConcreteWord]:
    """Normalize a model-returned VCW array.

    Tolerates an empty object standing in for an empty array, and skips
    entries lacking a usable word or element. Uncoercible scores become
    absent; out-of-range scores are clamped, both with a warning record.
    """
    if value is None or value == {}:
        return []
    if not isinstance(value, list):
        raise ResponseValidationError(
            f"expected an array of visually concrete words, got {type(value).__name__}",
            raw_text,
        )
    out: list[VisuallyConcreteWord] = []
    for entry in value:
        if not isinstance(entry, dict):
            continue
        vcw = str(entry.get("vcw") or "").strip()
        element = str(entry.get("element") or "").strip()
        if not vcw or not element:
            continue
        score: float | None = None
        if keep_scores and entry.get("score") is not None:
            try:
                score = float(entry["score"])
            except (TypeError, ValueError):
                if warnings is not None:
                    warnings.append(f"uncoercible score dropped for vcw {vcw!r}: {entry['score']!r}")
                score = None
            else:
                if score < 0.0 or score > 1.0:
                    if warnings is not None:
                        warnings.append(f"score for vcw {vcw!r} clamped from {score!r}")
                    score = min(max(score, 0.0), 1.0)
        out.append(VisuallyConcreteWord(vcw=vcw, element=element, score=score))
    return out


def classify_purpose(url: str, vlm, catalog: PromptCatalog) -> WebsitePurpose:
    """Determine website, category, and purpose from the page URL."""
    req = VlmRequest(stage=STAGE_PURPOSE, prompt=catalog.render(STAGE_PURPOSE, url=url))
    value, resp = complete_structured(vlm, req)
    if not isinstance(value, dict):
        raise ResponseValidationError("purpose response is not an object", resp.raw_text)
    website = str(value.get("website") or "").strip()
    category = str(value.get("category") or "").strip().lower()
    purpose = str(value.get("purpose") or "").strip()
    if not website or not purpose:
        raise ResponseValidationError("purpose response missing website or purpose", resp.raw_text)
    if category not in CATEGORIES:
        raise ResponseValidationError(
            f"category {category!r} is outside the known set {sorted(CATEGORIES)}",
            resp.raw_text,
        )
    return WebsitePurpose(website=website, category=category, purpose=purpose)


def initial_ca_description(image: ImageRef, purpose: WebsitePurpose, vlm, catalog: PromptCatalog) -> str:
    """First-pass description of the in-focus elements, guided by purpose."""
    req = VlmRequest(
        stage=STAGE_INITIAL_DESCRIPTION,
        prompt=catalog.render(
            STAGE_INITIAL_DESCRIPTION, purpose=json.dumps(purpose.to_dict(), ensure_ascii=False)
        ),
        image=image,
    )
    return _require_text(vlm.complete(req).raw_text, STAGE_INITIAL_DESCRIPTION)


def extract_vcw_text(image: ImageRef, source_text: str, vlm, catalog: PromptCatalog) -> list[VisuallyConcreteWord]:
    """Pull visually concrete words out of one flat text source.

    An empty source short-circuits to an empty list without a model call.
    Scores never come from flat text sources.
    """
    source = normalize_text(source_text or "")
    if not source:
        return []
    req = VlmRequest(
        stage=STAGE_VCW_TEXT,
        prompt=catalog.render(STAGE_VCW_TEXT, source_text=source),
        image=image,
    )
    value, resp = complete_structured(vlm, req)
    return _parse_vcw_list(value, resp.raw_text, keep_scores=False)


def extract_vcw_context(
    image: ImageRef,
    scored: list[ScoredSegment],
    vlm,
    catalog: PromptCatalog,
    warnings: list[str] | None = None,
) -> list[VisuallyConcreteWord]:
    """Pull visually concrete words out of the relevance-scored segments.

    Entries carry scores the model copies from their source segment's
    final score; the values pass through untouched apart from clamping.
    """
    if not scored:
        return []
    req = VlmRequest(
        stage=STAGE_VCW_CONTEXT,
        prompt=catalog.render(STAGE_VCW_CONTEXT),
        image=image,
        attachments=serialize_scored(scored),
    )
    value, resp = complete_structured(vlm, req)
    return _parse_vcw_list(value, resp.raw_text, keep_scores=True, warnings=warnings)


def merge_vcw(
    image: ImageRef,
    lists: tuple[
        list[VisuallyConcreteWord],
        list[VisuallyConcreteWord],
        list[VisuallyConcreteWord],
        list[VisuallyConcreteWord],
    ],
    vlm,
    catalog: PromptCatalog,
    warnings: list[str] | None = None,
) -> list[VisuallyConcreteWord]:
    """Merge the four VCW lists (alt, title, initial description, context).

    Four empty inputs short-circuit to an empty list without a model call;
    any element that had a score in any source keeps it.
    """
    alt, title, desc, context = lists
    if not any((alt, title, desc, context)):
        return []
    req = VlmRequest(
        stage=STAGE_MERGE_VCW,
        prompt=catalog.render(STAGE_MERGE_VCW),
        image=image,
        attachments={
            "alt": [v.to_dict() for v in alt],
            "title": [v.to_dict() for v in title],
            "initial_description": [v.to_dict() for v in desc],
            "context": [v.to_dict() for v in context],
        },
    )
    value, resp = complete_structured(vlm, req)
    return _parse_vcw_list(value, resp.raw_text, keep_scores=True, warnings=warnings)


def filter_vcw(
    image: ImageRef,
    merged: list[VisuallyConcreteWord],
    vlm,
    catalog: PromptCatalog,
    warnings: list[str] | None = None,
) -> list[VisuallyConcreteWord]:
    """Drop entries whose element is absent from the image.

    The model does the visual check; entries whose element field literally
    reads "none" or "not present" are additionally dropped here so the
    contract holds even under an echoing model.
    """
    if not merged:
        return []
    req = VlmRequest(
        stage=STAGE_FILTER_VCW,
        prompt=catalog.render(STAGE_FILTER_VCW),
        image=image,
        attachments=[v.to_dict() for v in merged],
    )
    value, resp = complete_structured(vlm, req)
    parsed = _parse_vcw_list(value, resp.raw_text, keep_scores=True, warnings=warnings)
    return [v for v in parsed if v.element.strip().lower() not in _ABSENT_ELEMENTS]


def _replace_tokens(text: str, replacements: list[tuple[str, str]]) -> str:
    for old, new in replacements:
        text = re.sub(rf"\b{re.escape(old)}\b", new, text)
    return text


def assign_placeholders(
    filtered: list[VisuallyConcreteWord], vlm, catalog: PromptCatalog
) -> tuple[PlaceholderMap, list[VisuallyConcreteWord]]:
    """Map person names to placeholder letters and rewrite the VCW list.

    Without named people the map is empty and the list returns unchanged.
    The substitution itself is deterministic whole-token replacement.
    """
    if not filtered:
        return PlaceholderMap(), []
    req = VlmRequest(
        stage=STAGE_ASSIGN_PLACEHOLDERS,
        prompt=catalog.render(STAGE_ASSIGN_PLACEHOLDERS),
        attachments=[v.to_dict() for v in filtered],
    )
    value, resp = complete_structured(vlm, req)
    if value in ([], {}, None):
        return PlaceholderMap(), list(filtered)
    if not isinstance(value, list):
        raise ResponseValidationError("placeholder response is not an array", resp.raw_text)
    pmap = PlaceholderMap.from_records(value, resp.raw_text)
    if not pmap:
        return pmap, list(filtered)
    name_to_letter = [(name, letter) for letter, name in pmap.pairs]
    rewritten = [
        VisuallyConcreteWord(
            vcw=_replace_tokens(v.vcw, name_to_letter),
            element=_replace_tokens(v.element, name_to_letter),
            score=v.score,
        )
        for v in filtered
    ]
    return pmap, rewritten


def generate_long_ca(
    image: ImageRef,
    vcw_with_placeholders: list[VisuallyConcreteWord],
    pmap: PlaceholderMap,
    vlm,
    catalog: PromptCatalog,
    purpose: WebsitePurpose | None = None,
) -> str:
    """Generate one long context-aware candidate description.

    With no surviving VCWs the stage degrades to an image-plus-purpose
    description rather than failing; run_pipeline records that in
    provenance.
    """
    if vcw_with_placeholders:
        req = VlmRequest(
            stage=STAGE_LONG_CA,
            prompt=catalog.render(
                STAGE_LONG_CA, placeholder_map_json=json.dumps(pmap.records(), ensure_ascii=False)
            ),
            image=image,
            attachments=[v.to_dict() for v in vcw_with_placeholders],
        )
    else:
        prompt = catalog.render(STAGE_CF_LONG)
        if purpose is not None:
            prompt += f"\n\nWebpage purpose: {json.dumps(purpose.to_dict(), ensure_ascii=False)}"
        req = VlmRequest(stage=STAGE_LONG_CA, prompt=prompt, image=image)
    return _require_text(vlm.complete(req).raw_text, STAGE_LONG_CA)


@dataclass(frozen=True)
class RestoreOutcome:
    text: str
    attempts: int
    fallback: bool  # deterministic substitution had to finish the job


def _standalone_letters(text: str, letters: tuple[str, ...]) -> set[str]:
    if not letters:
        return set()
    pattern = re.compile(rf"\b(?:{'|'.join(re.escape(l) for l in letters)})\b")
    return set(pattern.findall(text))


def _names_missing(text: str, pmap: PlaceholderMap, referenced: set[str]) -> set[str]:
    missing = set()
    for letter, name in pmap.pairs:
        if letter in referenced and not re.search(rf"\b{re.escape(name)}\b", text):
            missing.add(name)
    return missing


RESTORE_REPAIR_SUFFIX = (
    "\n\nEvery placeholder letter must be replaced with its corresponding name "
    "from the JSON. Return only the corrected description."
)


def restore_names(desc: str, pmap: PlaceholderMap, vlm, catalog: PromptCatalog) -> RestoreOutcome:
    """Swap placeholder letters back to names, with a guaranteed landing.

    The model gets one pass and one re-ask; if an assigned letter still
    survives as a standalone token, or a referenced name is missing,
    deterministic whole-token substitution over the original description
    takes over and the outcome is flagged.
    """
    if not pmap:
        return RestoreOutcome(text=desc, attempts=0, fallback=False)

    letters = pmap.letters()
    referenced = _standalone_letters(desc, letters)
    prompt = catalog.render(STAGE_RESTORE_NAMES, description=desc)
    req = VlmRequest(stage=STAGE_RESTORE_NAMES, prompt=prompt, attachments=pmap.records())

    def verify(text: str) -> bool:
        return not _standalone_letters(text, letters) and not _names_missing(
            text, pmap, referenced
        )

    first = _require_text(vlm.complete(req).raw_text, STAGE_RESTORE_NAMES)
    if verify(first):
        return RestoreOutcome(text=first, attempts=1, fallback=False)

    repair_req = VlmRequest(
        stage=STAGE_RESTORE_NAMES,
        prompt=prompt + RESTORE_REPAIR_SUFFIX,
        attachments=pmap.records(),
    )
    second = _require_text(vlm.complete(repair_req).raw_text, STAGE_RESTORE_NAMES)
    if verify(second):
        return RestoreOutcome(text=second, attempts=2, fallback=False)

    substituted = _replace_tokens(desc, list(pmap.pairs))
    return RestoreOutcome(text=substituted, attempts=2, fallback=True)


@dataclass(frozen=True)
class SelectionOutcome:
    index: int
    attempts: int
    fallback: bool  # defaulted to 0 after unparseable responses


def _parse_index(raw_text: str, count: int) -> int | None:
    text = raw_text.strip()
    try:
        idx = int(text)
    except ValueError:
        found = re.findall(r"\d+", text)
        if len(found) != 1:
            return None
        idx = int(found[0])
    return idx if 0 <= idx < count else None


def select_best(candidates: list[str], vlm, catalog: PromptCatalog) -> SelectionOutcome:
    """Pick the best candidate description by index.

    A single survivor wins without a model call; unparseable responses get
    one re-ask and then default to index 0 with a provenance flag.
    """
    if len(candidates) == 1:
        return SelectionOutcome(index=0, attempts=0, fallback=False)
    prompt = catalog.render(STAGE_SELECT_BEST)
    req = VlmRequest(stage=STAGE_SELECT_BEST, prompt=prompt, attachments=list(candidates))
    first = vlm.complete(req)
    idx = _parse_index(first.raw_text, len(candidates))
    if idx is not None:
        return SelectionOutcome(index=idx, attempts=1, fallback=False)
    repair_req = VlmRequest(
        stage=STAGE_SELECT_BEST,
        prompt=prompt + "\n\nReturn only the index number.",
        attachments=list(candidates),
    )
    second = vlm.complete(repair_req)
    idx = _parse_index(second.raw_text, len(candidates))
    if idx is not None:
        return SelectionOutcome(index=idx, attempts=2, fallback=False)
    return SelectionOutcome(index=0, attempts=2, fallback=True)


@dataclass(frozen=True)
class ShortenOutcome:
    text: str
    clamped: bool  # model output was longer than the input and got discarded
    fallback: bool  # placeholder hygiene needed deterministic substitution


def shorten(
    desc: str,
    pmap: PlaceholderMap,
    vlm,
    catalog: PromptCatalog,
    stage: str = STAGE_SHORTEN_CA,
) -> ShortenOutcome:
    """Condense a description; the result never exceeds the input length.

    On the context-aware path the placeholder map rides along and the
    output is re-checked for leaked placeholder letters.
    """
    req = VlmRequest(
        stage=stage,
        prompt=catalog.render(stage, description=desc),
        attachments=pmap.records() if pmap else None,
    )
    text = _require_text(vlm.complete(req).raw_text, stage)
    clamped = False
    if _word_count(text) > _word_count(desc):
        text = desc
        clamped = True
    fallback = False
    if pmap:
        leaked = _standalone_letters(text, pmap.letters())
        if leaked:
            text = _replace_tokens(text, [(l, n) for l, n in pmap.pairs if l in leaked])
            fallback = True
    return ShortenOutcome(text=text, clamped=clamped, fallback=fallback)


def generate_context_free(image: ImageRef, vlm, catalog: PromptCatalog) -> tuple[str, str]:
    """Long and short descriptions from the image alone.

    This path must stay blind to the page: requests carry no snapshot
    text, title, or URL.
    """
    long_req = VlmRequest(stage=STAGE_CF_LONG, prompt=catalog.render(STAGE_CF_LONG), image=image)
    long_text = _require_text(vlm.complete(long_req).raw_text, STAGE_CF_LONG)
    outcome = shorten(long_text, PlaceholderMap(), vlm, catalog, stage=STAGE_CF_SHORT)
    return long_text, outcome.text


def generate_context_html(
    image: ImageRef, page_text: str, vlm, catalog: PromptCatalog
) -> tuple[str, str]:
    """Evaluation baseline: describe the image given the raw page text."""
    long_req = VlmRequest(
        stage=STAGE_HTML_LONG,
        prompt=catalog.render(STAGE_HTML_LONG),
        image=image,
        attachments={"context": page_text},
    )
    long_text = _require_text(vlm.complete(long_req).raw_text, STAGE_HTML_LONG)
    outcome = shorten(long_text, PlaceholderMap(), vlm, catalog, stage=STAGE_HTML_SHORT)
    return long_text, outcome.text


def _snapshot_text_block(snapshot: PageSnapshot) -> str:
    # Stand-in for raw page HTML, so hidden segments are included too.
    lines = [snapshot.title]
    lines.extend(seg.text for seg in snapshot.segments)
    return "\n".join(line for line in lines if line)


def run_pipeline(
    snapshot: PageSnapshot,
    config: PipelineConfig = PipelineConfig(),
    vlm=None,
    similarity_provider: SimilarityProvider | None = None,
) -> DescriptionSet:
    """Execute the full chain for one snapshot and assemble the result.

    Stage failures abort the run with the stage identity attached. The
    three candidate generations tolerate individual transport or
    empty-output failures as long as at least one candidate survives.
    """
    if vlm is None:
        raise ValueError("run_pipeline needs a VLM client")
    catalog = config.catalog
    if similarity_provider is None:
        similarity_provider = LexicalSimilarity(title=snapshot.title)

    timings: dict[str, float] = {}
    warnings: list[str] = []

    def timed(stage: str, fn: Callable):
        start = time.perf_counter()
        try:
            return fn()
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(stage, exc) from exc
        finally:
            timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start)

    purpose = timed(STAGE_PURPOSE, lambda: classify_purpose(snapshot.url, vlm, catalog))
    initial = timed(
        STAGE_INITIAL_DESCRIPTION,
        lambda: initial_ca_description(snapshot.image, purpose, vlm, catalog),
    )
    vcw_alt = timed(
        STAGE_VCW_TEXT,
        lambda: extract_vcw_text(snapshot.image, snapshot.image.alt or "", vlm, catalog),
    )
    vcw_title = timed(
        STAGE_VCW_TEXT, lambda: extract_vcw_text(snapshot.image, snapshot.title, vlm, catalog)
    )
    vcw_desc = timed(
        STAGE_VCW_TEXT, lambda: extract_vcw_text(snapshot.image, initial, vlm, catalog)
    )
    scored = timed(
        STAGE_SCORE_SEGMENTS,
        lambda: score_segments(
            snapshot, config.weights, config.filter, similarity_provider, config.similarity
        ),
    )
    vcw_context = timed(
        STAGE_VCW_CONTEXT,
        lambda: extract_vcw_context(snapshot.image, scored, vlm, catalog, warnings),
    )
    merged = timed(
        STAGE_MERGE_VCW,
        lambda: merge_vcw(
            snapshot.image, (vcw_alt, vcw_title, vcw_desc, vcw_context), vlm, catalog, warnings
        ),
    )
    vcw_final = timed(
        STAGE_FILTER_VCW, lambda: filter_vcw(snapshot.image, merged, vlm, catalog, warnings)
    )
    pmap, vcw_placeholders = timed(
        STAGE_ASSIGN_PLACEHOLDERS, lambda: assign_placeholders(vcw_final, vlm, catalog)
    )

    empty_context = not vcw_placeholders

    raw_candidates: list[str] = []
    first_failure: PipelineStageError | None = None
    for _ in range(config.candidate_count):
        try:
            raw_candidates.append(
                timed(
                    STAGE_LONG_CA,
                    lambda: generate_long_ca(
                        snapshot.image, vcw_placeholders, pmap, vlm, catalog, purpose
                    ),
                )
            )
        except PipelineStageError as exc:
            if isinstance(exc.cause, (VlmTransportError, EmptyOutputError)):
                first_failure = first_failure or exc
                continue
            raise

    restored: list[str] = []
    restore_fallbacks: list[bool] = []
    for candidate in raw_candidates:
        try:
            outcome = timed(
                STAGE_RESTORE_NAMES, lambda: restore_names(candidate, pmap, vlm, catalog)
            )
        except PipelineStageError as exc:
            if isinstance(exc.cause, (VlmTransportError, EmptyOutputError)):
                first_failure = first_failure or exc
                continue
            raise
        restored.append(outcome.text)
        restore_fallbacks.append(outcome.fallback)

    if not restored:
        raise first_failure or PipelineStageError(
            STAGE_LONG_CA, EmptyOutputError("no candidate descriptions survived")
        )

    selection = timed(STAGE_SELECT_BEST, lambda: select_best(restored, vlm, catalog))
    ca_long = restored[selection.index]
    shorten_outcome = timed(STAGE_SHORTEN_CA, lambda: shorten(ca_long, pmap, vlm, catalog))
    cf_long, cf_short = timed(
        STAGE_CF_LONG, lambda: generate_context_free(snapshot.image, vlm, catalog)
    )

    html_long = html_short = None
    html_source = None
    if config.include_html_baseline:
        if config.raw_html is not None:
            page_text, html_source = config.raw_html, "raw_html"
        else:
            page_text, html_source = _snapshot_text_block(snapshot), "snapshot_text"
        html_long, html_short = timed(
            STAGE_HTML_LONG,
            lambda: generate_context_html(snapshot.image, page_text, vlm, catalog),
        )

    provenance = {
        "empty_context_fallback": empty_context,
        "placeholder_fallback": (
            restore_fallbacks[selection.index] or shorten_outcome.fallback
        ),
        "candidate_restore_fallbacks": restore_fallbacks,
        "dropped_candidates": config.candidate_count - len(restored),
        "select_best_fallback": selection.fallback,
        "shorten_clamped": shorten_outcome.clamped,
        "html_context_source": html_source,
        "warnings": warnings,
    }

    return DescriptionSet(
        ca_long=ca_long,
        ca_short=shorten_outcome.text,
        cf_long=cf_long,
        cf_short=cf_short,
        html_long=html_long,
        html_short=html_short,
        purpose=purpose,
        vcw_final=tuple(vcw_final),
        placeholder_map=pmap,
        candidates=tuple(restored),
        selected_index=selection.index,
        timings=timings,
        pipeline_version=config.pipeline_version,
        provenance=provenance,
    )
