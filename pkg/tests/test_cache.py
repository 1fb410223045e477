"""Cache keys, canonical URLs, and the embedded record store."""

import json
import threading
from dataclasses import replace

import pytest

from ctxdesc.cache import (
    CacheError,
    CacheKey,
    CacheStore,
    IncompleteSetError,
    canonical_url,
    image_identity,
    make_key,
)
from ctxdesc.pipeline import DescriptionSet, PipelineConfig, run_pipeline
from ctxdesc.snapshot import BoundingBox, ImageRef, parse_snapshot
from ctxdesc.vlm import MockVlm, load_transcript

from builders import OBAMA_SNAPSHOT_PATH, OBAMA_TRANSCRIPT_PATH


@pytest.fixture(scope="module")
def obama_set() -> DescriptionSet:
    snap = parse_snapshot(OBAMA_SNAPSHOT_PATH.read_bytes())
    vlm = MockVlm(load_transcript(OBAMA_TRANSCRIPT_PATH))
    return run_pipeline(snap, PipelineConfig(), vlm)


IMG = ImageRef(src="https://img.example/a.jpg", alt=None, bbox=BoundingBox(0, 0, 1, 1))


def test_canonical_url_rules():
    assert canonical_url("HTTPS://Shop.Example:443/a?b=1#frag") == "https://shop.example/a?b=1"
    assert canonical_url("http://host.example:80/x") == "http://host.example/x"
    assert canonical_url("http://host.example:8080/x") == "http://host.example:8080/x"
    # Query survives: variant pages differ by query.
    assert canonical_url("https://h.example/p?sku=2") != canonical_url("https://h.example/p?sku=3")


def test_fragment_only_difference_same_key():
    k1 = make_key("https://a.example/p#top", IMG, "1+abc")
    k2 = make_key("https://a.example/p#bottom", IMG, "1+abc")
    assert k1 == k2


def test_key_changes_with_components():
    base = make_key("https://a.example/p", IMG, "1+abc")
    assert base != make_key("https://a.example/q", IMG, "1+abc")
    assert base != make_key("https://a.example/p", IMG, "2+abc")
    other_img = ImageRef(src="https://img.example/b.jpg", alt=None, bbox=IMG.bbox)
    assert base != make_key("https://a.example/p", other_img, "1+abc")


def test_image_identity_prefers_bytes():
    with_bytes = ImageRef(src="https://i.example/x.jpg", alt=None, bbox=IMG.bbox, data=b"abc")
    assert image_identity(with_bytes).startswith("bytes:")
    assert image_identity(IMG) == "src:https://img.example/a.jpg"


def test_key_digest_is_64_hex():
    key = make_key("https://a.example", IMG, "v")
    assert len(key.digest) == 64
    int(key.digest, 16)


def test_cache_key_validates_format():
    with pytest.raises(ValueError):
        CacheKey("short")
    with pytest.raises(ValueError):
        CacheKey("Z" * 64)


def test_get_unknown_key_absent(tmp_path):
    store = CacheStore(tmp_path / "cache")
    assert store.get(make_key("https://a.example", IMG, "v")) is None


def test_put_get_round_trip_byte_identical(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    key = make_key("https://a.example", IMG, obama_set.pipeline_version)
    store.put(key, obama_set)
    record = store.get(key)
    assert json.dumps(record.set.to_dict(), sort_keys=True) == json.dumps(
        obama_set.to_dict(), sort_keys=True
    )


def test_hit_count_increments_per_get(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    key = make_key("https://a.example", IMG, "v1+aaaa")
    store.put(key, obama_set)
    store.get(key)
    record = store.get(key)
    assert record.hit_count == 2


def test_last_write_wins(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    key = make_key("https://a.example", IMG, "v1+aaaa")
    store.put(key, obama_set)
    second = replace(obama_set, ca_short="a different short text")
    store.put(key, second)
    assert store.get(key).set.ca_short == "a different short text"


def test_partial_set_rejected(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    partial = replace(obama_set, cf_short="")
    with pytest.raises(IncompleteSetError):
        store.put(make_key("https://a.example", IMG, "v"), partial)


def test_corrupt_record_surfaces_error(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    key = make_key("https://a.example", IMG, "v1+aaaa")
    store.put(key, obama_set)
    (store.path / f"{key.digest}.json").write_text("{broken", encoding="utf-8")
    with pytest.raises(CacheError, match="corrupt"):
        store.get(key)


def test_export_jsonl(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    for i in range(3):
        store.put(make_key(f"https://a.example/{i}", IMG, "v1+aaaa"), obama_set)
    out = tmp_path / "dump.jsonl"
    count = store.export_jsonl(out)
    lines = out.read_text().splitlines()
    assert count == 3 and len(lines) == 3
    for line in lines:
        record = json.loads(line)
        assert set(record) == {"key", "set", "created_at", "hit_count"}


def test_concurrent_gets_count_every_hit(tmp_path, obama_set):
    store = CacheStore(tmp_path / "cache")
    key = make_key("https://a.example", IMG, "v1+aaaa")
    store.put(key, obama_set)
    threads = [threading.Thread(target=store.get, args=(key,)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert store.get(key).hit_count == 9


def test_status_reports_ok(tmp_path):
    assert CacheStore(tmp_path / "cache").status() == "ok"
