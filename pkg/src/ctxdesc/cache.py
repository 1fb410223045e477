"""Persistent cache of description sets keyed by (page, image, pipeline).

An embedded directory store: one JSON record per key, atomic replace on
write, last-write-wins under racing puts. A remote shared backend stays a
pluggable protocol and is off by default — shared descriptions are an
opt-in, not a default.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol
from urllib.parse import urlsplit, urlunsplit

from .pipeline import DescriptionSet
from .snapshot import ImageRef

_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")
_DEFAULT_PORTS = {"http": 80, "https": 443}


class CacheError(RuntimeError):
    """Storage-level failure; never silently treated as a miss."""


class IncompleteSetError(ValueError):
    """Refused to cache a description set missing one of the four texts."""


def canonical_url(url: str) -> str:
    """Stable page identity: lowercase scheme/host, strip default port and
    fragment, keep path and query (e-commerce variants differ by query)."""
    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    port = parts.port
    netloc = host if port is None or _DEFAULT_PORTS.get(scheme) == port else f"{host}:{port}"
    return urlunsplit((scheme, netloc, parts.path, parts.query, ""))


def image_identity(image: ImageRef) -> str:
    """Keys prefer the bytes digest when bytes travelled with the snapshot."""
    if image.data is not None:
        return "bytes:" + hashlib.sha256(image.data).hexdigest()
    return "src:" + (image.src or "")


@dataclass(frozen=True)
class CacheKey:
    digest: str

    def __post_init__(self) -> None:
        if not _DIGEST_RE.fullmatch(self.digest):
            raise ValueError(f"cache digest must be 64 lowercase hex chars: {self.digest!r}")


def make_key(url: str, image: ImageRef, pipeline_version: str) -> CacheKey:
    payload = json.dumps(
        {
            "url": canonical_url(url),
            "image": image_identity(image),
            "pipeline_version": pipeline_version,
        },
        sort_keys=True,
    )
    return CacheKey(digest=hashlib.sha256(payload.encode("utf-8")).hexdigest())


@dataclass
class CacheRecord:
    key: CacheKey
    set: DescriptionSet
    created_at: str
    hit_count: int = 0

    def to_dict(self) -> dict:
        return {
            "key": self.key.digest,
            "set": self.set.to_dict(),
            "created_at": self.created_at,
            "hit_count": self.hit_count,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CacheRecord":
        return cls(
            key=CacheKey(obj["key"]),
            set=DescriptionSet.from_dict(obj["set"]),
            created_at=obj["created_at"],
            hit_count=obj["hit_count"],
        )


class RemoteBackend(Protocol):
    """Opt-in shared cache; deployments must enable it explicitly."""

    def get(self, key: CacheKey) -> CacheRecord | None: ...

    def put(self, record: CacheRecord) -> None: ...


class CacheStore:
    """Embedded directory-backed store, safe for concurrent handlers."""

    def __init__(self, path: str | Path, remote: RemoteBackend | None = None):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.remote = remote
        self._lock = threading.Lock()

    def _file_for(self, key: CacheKey) -> Path:
        return self.path / f"{key.digest}.json"

    def _write(self, record: CacheRecord) -> None:
        target = self._file_for(record.key)
        tmp = target.with_suffix(".json.tmp")
        try:
            tmp.write_text(
                json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True),
                encoding="utf-8",
            )
            os.replace(tmp, target)  # atomic: readers see old or new, never partial
        except OSError as exc:
            raise CacheError(f"cache write failed for {record.key.digest}: {exc}") from exc

    def get(self, key: CacheKey) -> CacheRecord | None:
        """Fetch a record, bumping its hit counter atomically."""
        path = self._file_for(key)
        with self._lock:
            if not path.exists():
                return None
            try:
                record = CacheRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
            except OSError as exc:
                raise CacheError(f"cache read failed for {key.digest}: {exc}") from exc
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CacheError(f"corrupt cache record {key.digest}: {exc}") from exc
            record.hit_count += 1
            self._write(record)
            return record

    def put(self, key: CacheKey, description_set: DescriptionSet) -> CacheRecord:
        """Persist a complete set; racing puts resolve last-write-wins."""
        if not description_set.is_complete():
            raise IncompleteSetError("refusing to cache a partial description set")
        record = CacheRecord(
            key=key,
            set=description_set,
            created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        )
        with self._lock:
            self._write(record)
        if self.remote is not None:
            self.remote.put(record)
        return record

    def records(self) -> Iterator[CacheRecord]:
        for path in sorted(self.path.glob("*.json")):
            yield CacheRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def export_jsonl(self, out_path: str | Path) -> int:
        """Dump every record as line-delimited JSON for the eval harness."""
        count = 0
        with open(out_path, "w", encoding="utf-8") as fh:
            for record in self.records():
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True))
                fh.write("\n")
                count += 1
        return count

    def status(self) -> str:
        return "ok" if os.access(self.path, os.W_OK) else "readonly"
