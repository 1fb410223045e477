"""HTTP boundary: accepts snapshots, runs or replays the pipeline.

Endpoints: POST /describe, GET /health, GET /cache/{digest}. Concurrent
identical requests coalesce onto a single pipeline run (runs take tens of
seconds against a live model), and overall pipeline concurrency is bounded
by a worker limit. Request content is never logged unless verbose logging
is switched on explicitly.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field, replace
from pathlib import Path

import anyio
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .cache import CacheKey, CacheStore, make_key
from .pipeline import PipelineConfig, PipelineStageError, run_pipeline
from .similarity import EmbeddingServiceClient, LexicalSimilarity, SimilarityTransportError
from .snapshot import PageSnapshot, SnapshotError, snapshot_from_dict
from .vlm import LiveVlm, MockVlm, TranscriptEntry, VlmError, VlmTransportError

logger = logging.getLogger(__name__)

MAX_SNAPSHOT_BYTES = 2 * 1024 * 1024
MAX_IMAGE_BYTES = 8 * 1024 * 1024

_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")


class TranscriptLibrary:
    """Scripted responses for mock mode, keyed by page URL.

    The fixture file is either a bare transcript list (used for every URL)
    or {"version": 1, "transcripts": {url: [...]}}.
    """

    def __init__(self, by_url: dict[str, list[TranscriptEntry]], default: list[TranscriptEntry] | None = None):
        self.by_url = by_url
        self.default = default

    @classmethod
    def from_file(cls, path: str | Path) -> "TranscriptLibrary":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_obj(doc)

    @classmethod
    def from_obj(cls, doc) -> "TranscriptLibrary":
        from .vlm import transcript_from_records

        if isinstance(doc, list):
            return cls(by_url={}, default=transcript_from_records(doc))
        if isinstance(doc, dict) and "transcripts" in doc:
            by_url = {
                url: transcript_from_records(records)
                for url, records in doc["transcripts"].items()
            }
            return cls(by_url=by_url)
        raise ValueError("transcript file must be a list or carry a 'transcripts' map")

    def for_url(self, url: str) -> list[TranscriptEntry]:
        if url in self.by_url:
            return list(self.by_url[url])
        if self.default is not None:
            return list(self.default)
        raise VlmError(f"no scripted transcript for url: {url}")


class ScriptedVlmFactory:
    """Hands each pipeline run its own replay client; keeps call telemetry."""

    def __init__(self, library: TranscriptLibrary):
        self.library = library
        self.clients: list[MockVlm] = []
        self._lock = threading.Lock()

    def for_snapshot(self, snapshot: PageSnapshot) -> MockVlm:
        client = MockVlm(self.library.for_url(snapshot.url))
        with self._lock:
            self.clients.append(client)
        return client

    @property
    def total_calls(self) -> int:
        with self._lock:
            return sum(c.calls for c in self.clients)

    def healthy(self) -> bool:
        return True


class LiveVlmFactory:
    def __init__(self, client: LiveVlm):
        self.client = client

    def for_snapshot(self, snapshot: PageSnapshot) -> LiveVlm:
        return self.client

    def healthy(self) -> bool:
        return self.client.healthy()


@dataclass
class ServiceSettings:
    cache_path: str = ".ctxdesc-cache"
    mode: str = "mock"  # or "live"
    transcript_path: str | None = None
    worker_limit: int = 4
    config: PipelineConfig = field(default_factory=PipelineConfig)
    embedding_endpoint: str | None = None
    verbose: bool = False
    max_snapshot_bytes: int = MAX_SNAPSHOT_BYTES
    max_image_bytes: int = MAX_IMAGE_BYTES


class _SingleFlight:
    """Coalesce concurrent work on the same key onto one execution."""

    def __init__(self):
        self._lock = threading.Lock()
        self._inflight: dict[str, Future] = {}

    def run(self, key: str, fn):
        with self._lock:
            future = self._inflight.get(key)
            leader = future is None
            if leader:
                future = Future()
                self._inflight[key] = future
        if not leader:
            return future.result(), False
        try:
            result = fn()
            future.set_result(result)
            return result, True
        except BaseException as exc:
            future.set_exception(exc)
            raise
        finally:
            with self._lock:
                self._inflight.pop(key, None)


def _check_size_caps(snapshot_obj: dict, settings: ServiceSettings) -> None:
    image = snapshot_obj.get("image") if isinstance(snapshot_obj, dict) else None
    data_b64 = image.get("data") if isinstance(image, dict) else None
    if isinstance(data_b64, str) and len(data_b64) * 3 // 4 > settings.max_image_bytes:
        raise SnapshotError(f"image exceeds {settings.max_image_bytes} byte cap")
    slim = dict(snapshot_obj)
    if isinstance(image, dict) and data_b64 is not None:
        slim["image"] = {k: v for k, v in image.items() if k != "data"}
    body = json.dumps(slim, ensure_ascii=False).encode("utf-8")
    if len(body) > settings.max_snapshot_bytes:
        raise SnapshotError(f"snapshot exceeds {settings.max_snapshot_bytes} byte cap")


def create_app(settings: ServiceSettings, vlm_factory=None) -> FastAPI:
    """Assemble the service with its cache, providers, and coalescing state."""
    app = FastAPI(title="ctxdesc", version="0.1.0")
    cache = CacheStore(settings.cache_path)

    if vlm_factory is None:
        if settings.mode == "mock":
            if not settings.transcript_path:
                raise ValueError("mock mode needs a transcript path")
            vlm_factory = ScriptedVlmFactory(TranscriptLibrary.from_file(settings.transcript_path))
        elif settings.mode == "live":
            vlm_factory = LiveVlmFactory(LiveVlm())
        else:
            raise ValueError(f"unknown provider mode: {settings.mode!r}")

    state = app.state
    state.settings = settings
    state.cache = cache
    state.vlm_factory = vlm_factory
    state.single_flight = _SingleFlight()
    state.workers = threading.BoundedSemaphore(settings.worker_limit)
    state.pipeline_runs = 0
    state.runs_lock = threading.Lock()

    def _similarity_provider(snapshot: PageSnapshot):
        if settings.embedding_endpoint:
            return EmbeddingServiceClient(endpoint=settings.embedding_endpoint)
        return LexicalSimilarity(title=snapshot.title)

    def _execute(
        snapshot: PageSnapshot, config: PipelineConfig, key: CacheKey, recheck: bool = True
    ) -> dict:
        # Double-check inside the flight: a just-finished leader may have
        # cached the set after our first lookup. Bypass requests skip it.
        if recheck:
            record = cache.get(key)
            if record is not None and (not config.include_html_baseline or record.set.html_long):
                return record.set.to_dict()
        with state.workers:
            with state.runs_lock:
                state.pipeline_runs += 1
            vlm = vlm_factory.for_snapshot(snapshot)
            result = run_pipeline(snapshot, config, vlm, _similarity_provider(snapshot))
        cache.put(key, result)
        return result.to_dict()

    @app.post("/describe")
    async def describe(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "body is not valid JSON"})
        if not isinstance(body, dict) or "snapshot" not in body:
            return JSONResponse(status_code=400, content={"detail": "missing snapshot field"})
        options = body.get("options") or {}
        include_html = bool(options.get("include_html_baseline", False))
        bypass_cache = bool(options.get("bypass_cache", False))

        try:
            _check_size_caps(body["snapshot"], settings)
            snapshot = snapshot_from_dict(body["snapshot"])
        except SnapshotError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})

        config = settings.config
        if include_html != config.include_html_baseline:
            config = replace(config, include_html_baseline=include_html)

        key = make_key(snapshot.url, snapshot.image, config.pipeline_version)
        if settings.verbose:
            logger.debug("describe url=%s digest=%s", snapshot.url, key.digest)

        def work():
            if bypass_cache:
                return _execute(snapshot, config, key, recheck=False), False
            record = cache.get(key)
            if record is not None and (not include_html or record.set.html_long):
                return record.set.to_dict(), True
            set_dict, _ = state.single_flight.run(
                key.digest, lambda: _execute(snapshot, config, key)
            )
            return set_dict, False

        try:
            set_dict, cached = await anyio.to_thread.run_sync(work)
        except (VlmTransportError, SimilarityTransportError) as exc:
            return JSONResponse(status_code=502, content={"detail": str(exc)})
        except PipelineStageError as exc:
            return JSONResponse(
                status_code=500, content={"detail": str(exc), "stage": exc.stage}
            )
        except VlmError as exc:
            return JSONResponse(status_code=500, content={"detail": str(exc)})

        return {"set": set_dict, "cached": cached, "key": key.digest}

    @app.get("/health")
    def health():
        provider_ok = bool(vlm_factory.healthy())
        cache_status = cache.status()
        degraded = not provider_ok or cache_status != "ok"
        return {
            "status": "degraded" if degraded else "ok",
            "provider": {"mode": settings.mode, "reachable": provider_ok},
            "cache": {"status": cache_status, "path": str(cache.path)},
        }

    @app.get("/cache/{digest}")
    def cache_lookup(digest: str):
        if not _DIGEST_RE.fullmatch(digest):
            return JSONResponse(
                status_code=400, content={"detail": "digest must be 64 lowercase hex chars"}
            )
        record = cache.get(CacheKey(digest))
        if record is None:
            return JSONResponse(status_code=404, content={"detail": "not cached"})
        return {"set": record.set.to_dict(), "cached": True, "key": digest}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Context-aware image description service")
    parser.add_argument("--listen", default="127.0.0.1:8000", help="host:port to bind")
    parser.add_argument("--mode", choices=["mock", "live"], default="live")
    parser.add_argument("--transcript", help="scripted transcript file (mock mode)")
    parser.add_argument("--cache-path", default=".ctxdesc-cache")
    parser.add_argument("--workers", type=int, default=4, help="max concurrent pipeline runs")
    parser.add_argument("--embedding-endpoint", help="similarity service URL (live mode)")
    parser.add_argument("--verbose", action="store_true", help="log request details")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    host, _, port = args.listen.partition(":")
    settings = ServiceSettings(
        cache_path=args.cache_path,
        mode=args.mode,
        transcript_path=args.transcript,
        worker_limit=args.workers,
        embedding_endpoint=args.embedding_endpoint,
        verbose=args.verbose,
    )
    app = create_app(settings)

    import uvicorn

    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
