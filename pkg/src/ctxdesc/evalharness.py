"""Batch evaluation harness: description metrics over a snapshot manifest.

For each manifest entry the harness generates descriptions with the
context-free and context-aware methods (plus the context-HTML baseline on
request) and measures word counts, sentence counts, and named-entity
density. Accuracy/objectivity/relevance stay human judgments: the harness
emits a blank annotation template instead of pretending to automate them.

Word and sentence definitions are deliberately simple and documented here:
words are whitespace-delimited tokens; sentences are maximal segments ended
by '.', '!' or '?' (abbreviation-naive). Published per-method averages are
reference points under their authors' counters, not assertions this
harness reproduces.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import statistics
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

from .pipeline import PipelineConfig, run_pipeline
from .service import TranscriptLibrary
from .snapshot import parse_snapshot
from .vlm import LiveVlm, MockVlm, load_transcript

logger = logging.getLogger(__name__)

MANIFEST_CATEGORIES = frozenset({"ecommerce", "news", "social media", "blogs"})

METHOD_CONTEXT_FREE = "context-free"
METHOD_CONTEXT_HTML = "context-HTML"
METHOD_CONTEXT_AWARE = "context-aware"

METRICS_HEADER = [
    "label",
    "category",
    "method",
    "length",
    "words",
    "sentences",
    "entity_tokens",
    "entity_ratio",
]

ANNOTATION_HEADER = [
    "label",
    "method",
    "length",
    "sentence_index",
    "sentence",
    "accuracy",
    "objectivity",
    "relevance",
]


@dataclass(frozen=True)
class ManifestEntry:
    snapshot_path: str
    category: str
    label: str
    transcript_path: str | None = None  # per-entry override for mock mode


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        raw_entries = doc["entries"] if isinstance(doc, dict) else doc
        entries = []
        for i, raw in enumerate(raw_entries):
            category = raw.get("category", "")
            if category not in MANIFEST_CATEGORIES:
                raise ValueError(
                    f"manifest entry #{i} has category {category!r}; "
                    f"expected one of {sorted(MANIFEST_CATEGORIES)}"
                )
            entries.append(
                ManifestEntry(
                    snapshot_path=raw["snapshot_path"],
                    category=category,
                    label=raw.get("label") or f"entry-{i}",
                    transcript_path=raw.get("transcript_path"),
                )
            )
        return cls(entries=tuple(entries))


@dataclass(frozen=True)
class MetricsRow:
    label: str
    category: str
    method: str
    length: str
    words: int
    sentences: int
    entity_tokens: int
    entity_ratio: float

    def as_csv_row(self) -> list:
        return [
            self.label,
            self.category,
            self.method,
            self.length,
            self.words,
            self.sentences,
            self.entity_tokens,
            self.entity_ratio,
        ]


def count_words(text: str) -> int:
    return len(text.split())


_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s|$)")


def count_sentences(text: str) -> int:
    """Maximal segments ending in . ! or ? — abbreviation-naive by design."""
    return len(split_sentences(text))


def split_sentences(text: str) -> list[str]:
    text = text.strip()
    if not text:
        return []
    sentences = []
    start = 0
    for m in _SENTENCE_END_RE.finditer(text):
        chunk = text[start : m.end()].strip()
        if chunk:
            sentences.append(chunk)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


class NerProvider(Protocol):
    """Returns entity spans as lists of token counts per detected entity."""

    def entity_token_count(self, text: str) -> int: ...


# Sentence-initial capitalized tokens only count as entities when they are
# not ordinary function words; a crude test, but it keeps "The cat sat" at
# zero while keeping a leading proper name.
_FUNCTION_WORDS = frozenset(
    """
    the a an this that these those it its he she they we i you his her their
    our my your in on at to of for with and but or so as if when while after
    before there here what who how why where is are was were be been being
    do does did not no yes
    """.split()
)

_CAP_TOKEN_RE = re.compile(r"^[\"'(\[]*([A-Z][\w'-]*)")


class HeuristicNer:
    """Capitalization-based fallback detector.

    Crude and explicitly non-comparable to a trained named-entity detector;
    live comparisons require an external provider.
    """

    def entity_token_count(self, text: str) -> int:
        total = 0
        for sentence in split_sentences(text):
            tokens = sentence.split()
            run = 0
            for i, token in enumerate(tokens):
                m = _CAP_TOKEN_RE.match(token)
                capitalized = bool(m)
                if capitalized and i == 0 and m.group(1).lower() in _FUNCTION_WORDS:
                    capitalized = False
                if capitalized:
                    run += 1
                else:
                    total += run
                    run = 0
            total += run
        return total


def entity_density(text: str, ner: NerProvider | None = None) -> tuple[int, float]:
    """Tokens covered by detected entities and their ratio over words."""
    if ner is None:
        ner = HeuristicNer()
    words = count_words(text)
    if words == 0:
        return 0, 0.0
    entity_tokens = ner.entity_token_count(text)
    return entity_tokens, entity_tokens / words


def _rows_for_entry(
    entry: ManifestEntry,
    description_set,
    include_html: bool,
    ner: NerProvider,
) -> list[tuple[MetricsRow, str]]:
    texts = [
        (METHOD_CONTEXT_FREE, "long", description_set.cf_long),
        (METHOD_CONTEXT_FREE, "short", description_set.cf_short),
    ]
    if include_html:
        texts.append((METHOD_CONTEXT_HTML, "long", description_set.html_long or ""))
        texts.append((METHOD_CONTEXT_HTML, "short", description_set.html_short or ""))
    texts.append((METHOD_CONTEXT_AWARE, "long", description_set.ca_long))
    texts.append((METHOD_CONTEXT_AWARE, "short", description_set.ca_short))

    rows = []
    for method, length, text in texts:
        entity_tokens, ratio = entity_density(text, ner)
        rows.append(
            (
                MetricsRow(
                    label=entry.label,
                    category=entry.category,
                    method=method,
                    length=length,
                    words=count_words(text),
                    sentences=count_sentences(text),
                    entity_tokens=entity_tokens,
                    entity_ratio=ratio,
                ),
                text,
            )
        )
    return rows


def aggregate_rows(rows: list[MetricsRow]) -> list[dict]:
    """Recompute aggregates from rows alone — no hidden state.

    Word-count spread uses the sample standard deviation (0.0 for a single
    row).
    """
    aggregates: list[dict] = []
    by_method_length: dict[tuple[str, str], list[int]] = {}
    for row in rows:
        by_method_length.setdefault((row.method, row.length), []).append(row.words)
    for (method, length), words in sorted(by_method_length.items()):
        aggregates.append(
            {
                "group": "words",
                "method": method,
                "length": length,
                "category": "",
                "mean": statistics.mean(words),
                "stdev": statistics.stdev(words) if len(words) > 1 else 0.0,
                "n": len(words),
            }
        )
    by_category_method: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        by_category_method.setdefault((row.category, row.method), []).append(row.entity_ratio)
    for (category, method), ratios in sorted(by_category_method.items()):
        aggregates.append(
            {
                "group": "entity_ratio",
                "method": method,
                "length": "",
                "category": category,
                "mean": statistics.mean(ratios),
                "stdev": statistics.stdev(ratios) if len(ratios) > 1 else 0.0,
                "n": len(ratios),
            }
        )
    return aggregates


@dataclass
class EvalResult:
    rows: list[MetricsRow]
    aggregates: list[dict]
    failures: list[tuple[str, str]]  # (label, error)


def run_eval(
    manifest: Manifest,
    out_dir: str | Path,
    mode: str = "mock",
    transcript_path: str | Path | None = None,
    include_html_baseline: bool = False,
    config: PipelineConfig | None = None,
    ner: NerProvider | None = None,
) -> EvalResult:
    """Generate descriptions for every entry and write the report files.

    Per-entry failures are recorded and skipped; the caller decides the
    exit status. Metrics are pure functions of the description texts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ner = ner or HeuristicNer()
    if config is None:
        config = PipelineConfig()
    if include_html_baseline != config.include_html_baseline:
        config = replace(config, include_html_baseline=include_html_baseline)

    library = None
    if mode == "mock" and transcript_path is not None:
        library = TranscriptLibrary.from_file(transcript_path)

    rows: list[MetricsRow] = []
    annotation_rows: list[list] = []
    failures: list[tuple[str, str]] = []

    for entry in manifest.entries:
        try:
            snapshot = parse_snapshot(Path(entry.snapshot_path).read_bytes())
            if mode == "mock":
                if entry.transcript_path:
                    vlm = MockVlm(load_transcript(entry.transcript_path))
                elif library is not None:
                    vlm = MockVlm(library.for_url(snapshot.url))
                else:
                    raise ValueError(f"no transcript available for entry {entry.label!r}")
            elif mode == "live":
                vlm = LiveVlm()
            else:
                raise ValueError(f"unknown mode: {mode!r}")
            description_set = run_pipeline(snapshot, config, vlm)
        except Exception as exc:
            logger.warning("entry %s failed: %s", entry.label, exc)
            failures.append((entry.label, str(exc)))
            continue

        for row, text in _rows_for_entry(entry, description_set, include_html_baseline, ner):
            rows.append(row)
            for i, sentence in enumerate(split_sentences(text)):
                annotation_rows.append(
                    [entry.label, row.method, row.length, i, sentence, "", "", ""]
                )

    aggregates = aggregate_rows(rows)

    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow(row.as_csv_row())

    with open(out / "aggregates.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "method", "length", "category", "mean", "stdev", "n"])
        for agg in aggregates:
            writer.writerow(
                [
                    agg["group"],
                    agg["method"],
                    agg["length"],
                    agg["category"],
                    agg["mean"],
                    agg["stdev"],
                    agg["n"],
                ]
            )

    with open(out / "annotation_template.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANNOTATION_HEADER)
        writer.writerows(annotation_rows)

    if failures:
        with open(out / "failures.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "error"])
            writer.writerows(failures)

    return EvalResult(rows=rows, aggregates=aggregates, failures=failures)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Description metrics over a snapshot manifest")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--mode", choices=["mock", "live"], default="mock")
    parser.add_argument("--out", required=True, help="report output directory")
    parser.add_argument("--include-html-baseline", action="store_true")
    parser.add_argument("--transcript", help="transcript library file (mock mode)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO)
    manifest = Manifest.load(args.manifest)
    result = run_eval(
        manifest,
        out_dir=args.out,
        mode=args.mode,
        transcript_path=args.transcript,
        include_html_baseline=args.include_html_baseline,
    )
    print(f"{len(result.rows)} metric rows, {len(result.failures)} failures -> {args.out}")
    if result.failures:
        for label, error in result.failures:
            print(f"FAILED {label}: {error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
