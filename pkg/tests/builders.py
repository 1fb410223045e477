"""Programmatic snapshot and transcript builders shared across tests.

Golden fixtures live as committed JSON under tests/fixtures/; everything
bulk or randomized (service concurrency fixtures, eval manifests,
adversarial placeholder transcripts) is built here instead.
"""

from __future__ import annotations

import hashlib
import json
import random
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"
OBAMA_SNAPSHOT_PATH = FIXTURES / "obama_snapshot.json"
OBAMA_TRANSCRIPT_PATH = FIXTURES / "obama_transcript.json"

SHORT_CA_OBAMA = (
    "Four people pose for a photo amidst cherry blossoms. On the left, Malia is in a "
    "blue sleeveless dress with polka dots. Next to her, Michelle sports a teal "
    "dress. Barack stands in the center in a dark suit, white shirt, and gray tie. On "
    "the right, Sasha wears a color-blocked dress with a coral top and yellow skirt, "
    "accented by a white belt. They all smile, and the White House is visible behind "
    "them in what seems to be the Rose Garden."
)


def bbox(x, y, w, h) -> dict:
    return {"x": x, "y": y, "w": w, "h": h}


def segment(seg_id, text, tag="p", box=None, visible=True) -> dict:
    return {
        "id": seg_id,
        "text": text,
        "tag": tag,
        "bbox": box or bbox(100, 600 + 40 * seg_id, 600, 30),
        "visible": visible,
    }


def snapshot_dict(
    url: str,
    title: str,
    alt: str | None,
    segments: list[dict],
    image_src: str | None = None,
    image_data_b64: str | None = None,
) -> dict:
    if not image_src and not image_data_b64:
        # Image hosts differ from page hosts; keeps the information-flow
        # scans from tripping on a page URL embedded in the image src.
        image_src = f"https://img.example/{hashlib.sha1(url.encode()).hexdigest()[:12]}.jpg"
    return {
        "version": 1,
        "url": url,
        "title": title,
        "viewport": bbox(0, 0, 1280, 800),
        "image": {
            "src": image_src,
            "alt": alt,
            "bbox": bbox(300, 200, 600, 360),
            "data": image_data_b64,
        },
        "segments": segments,
    }


def product_fixture(slug: str, include_html: bool = False) -> tuple[dict, list[dict], dict]:
    """No-people e-commerce page: snapshot, transcript, expected outputs."""
    name = slug.replace("-", " ").title()
    url = f"https://shop.example/products/{slug}"
    title = f"{name} Beige Chenille Sofa - buy online"
    alt = f"{name} beige chenille carved wood sofa"
    snap = snapshot_dict(
        url,
        title,
        alt,
        segments=[
            segment(1, f"Elegant {name} sofa upholstered in beige chenille fabric."),
            segment(2, "Checkout now", tag="a", box=bbox(20, 20, 120, 24)),
        ],
    )
    ca_long = (
        f"A {name} beige chenille sofa with ornately carved cherry wood trim stands "
        "against a plain backdrop. The cushions look plush and the woven fabric has a "
        "soft sheen."
    )
    ca_short = f"A {name} beige chenille sofa with carved cherry wood trim."
    cf_long = (
        "A beige sofa with carved wooden trim and plush cushions stands against a "
        "plain backdrop, photographed straight on."
    )
    cf_short = "A beige sofa with carved wood trim and plush cushions."
    html_long = (
        "A beige chenille sofa from a furniture listing, with carved wood trim and "
        "plush cushions, shown against a plain backdrop."
    )
    html_short = "A beige chenille sofa with carved wood trim from a furniture listing."

    transcript = [
        {
            "stage": "purpose",
            "response": json.dumps(
                {
                    "website": "shop.example",
                    "category": "ecommerce",
                    "purpose": "online furniture store",
                }
            ),
        },
        {
            "stage": "initial_description",
            "response": "A beige chenille sofa with carved wooden trim fills the frame.",
        },
        {
            "stage": "vcw_text",
            "response": json.dumps([{"vcw": "beige chenille", "element": "sofa upholstery"}]),
        },
        {"stage": "vcw_text", "response": "[]"},
        {
            "stage": "vcw_text",
            "response": json.dumps([{"vcw": "carved wood", "element": "sofa trim"}]),
        },
        {
            "stage": "vcw_context",
            "response": json.dumps(
                [{"vcw": name, "element": "sofa in the image", "score": 0.7}]
            ),
        },
        {
            "stage": "merge_vcw",
            "response": json.dumps(
                [
                    {"vcw": "beige chenille", "element": "sofa upholstery"},
                    {"vcw": "carved wood", "element": "sofa trim"},
                    {"vcw": name, "element": "sofa in the image", "score": 0.7},
                ]
            ),
        },
        {
            "stage": "filter_vcw",
            "response": json.dumps(
                [
                    {"vcw": "beige chenille", "element": "sofa upholstery"},
                    {"vcw": "carved wood", "element": "sofa trim"},
                    {"vcw": name, "element": "sofa in the image", "score": 0.7},
                ]
            ),
        },
        {"stage": "assign_placeholders", "response": "[]"},
        {"stage": "long_ca", "response": ca_long},
        {"stage": "long_ca", "response": ca_long},
        {"stage": "long_ca", "response": ca_long},
        {"stage": "select_best", "response": "0"},
        {"stage": "shorten_ca", "response": ca_short},
        {"stage": "cf_long", "response": cf_long},
        {"stage": "cf_short", "response": cf_short},
    ]
    if include_html:
        transcript.append({"stage": "html_long", "response": html_long})
        transcript.append({"stage": "html_short", "response": html_short})

    expected = {
        "url": url,
        "ca_long": ca_long,
        "ca_short": ca_short,
        "cf_long": cf_long,
        "cf_short": cf_short,
        "html_long": html_long if include_html else None,
        "html_short": html_short if include_html else None,
    }
    return snap, transcript, expected


_NAME_POOL = [
    ("Malia", "Michelle", "Barack"),
    ("Ada", "Grace", "Alan"),
    ("Serena", "Venus", "Richard"),
    ("Frida", "Diego", "Cristina"),
    ("Marie", "Pierre", "Irene"),
]

_COLORS = ["red", "teal", "yellow", "navy", "coral", "olive"]


def adversarial_fixture(seed: int) -> tuple[dict, list[dict], dict]:
    """Randomized placeholder-garbling fixture.

    Candidate 0 carries the garble plan; candidates 1 and 2 restore
    cleanly, and selection always picks candidate 0, so the expected
    fallback flag follows the plan exactly:
      clean          -> one restore entry, no flag
      retry_fixes    -> garbled then clean restore entries, no flag
      fallback_needed-> two garbled restore entries, flag set
    """
    rng = random.Random(seed)
    names = list(rng.choice(_NAME_POOL)[: rng.randint(1, 3)])
    letters = "MNOP"[: len(names)]
    pairs = list(zip(letters, names))
    url = f"https://news.example/story-{seed}"

    colors = rng.sample(_COLORS, len(pairs))
    lead = "The photo shows people gathered near a stone fountain."
    person_sentences = {
        letter: f"{letter} wears a {color} coat." for (letter, _), color in zip(pairs, colors)
    }
    candidate = lead + " " + " ".join(person_sentences[l] for l, _ in pairs)

    def restored(text: str) -> str:
        for letter, name in pairs:
            text = text.replace(f"{letter} wears", f"{name} wears")
        return text

    good = restored(candidate)
    victim_letter, victim_name = rng.choice(pairs)
    # Two failure shapes: the letter is left in place, or the person's
    # sentence disappears entirely (so the name never shows up).
    if rng.random() < 0.5:
        garbled = good.replace(f"{victim_name} wears", f"{victim_letter} wears")
    else:
        garbled = (
            good.replace(person_sentences[victim_letter].replace(
                f"{victim_letter} wears", f"{victim_name} wears"
            ), "").strip()
        )
    plan = rng.choice(["clean", "retry_fixes", "fallback_needed"])
    restore_entries = {
        "clean": [good],
        "retry_fixes": [garbled, good],
        "fallback_needed": [garbled, garbled],
    }[plan]

    ca_short = "Near a fountain, " + " and ".join(
        f"{name} in a {color} coat" for (_, name), color in zip(pairs, colors)
    ) + " pose for a photo."

    snap = snapshot_dict(
        url,
        title=f"City fountain gathering {seed}",
        alt="People near a fountain",
        segments=[segment(1, f"People near a fountain in the {colors[0]} evening light.")],
    )
    transcript = [
        {
            "stage": "purpose",
            "response": json.dumps(
                {"website": "news.example", "category": "news", "purpose": "local reporting"}
            ),
        },
        {"stage": "initial_description", "response": lead},
        {"stage": "vcw_text", "response": json.dumps([{"vcw": "fountain", "element": "stone fountain"}])},
        {"stage": "vcw_text", "response": "[]"},
        {"stage": "vcw_text", "response": json.dumps([{"vcw": "people", "element": "group of people"}])},
        {
            "stage": "vcw_context",
            "response": json.dumps(
                [{"vcw": name, "element": "person near fountain", "score": 0.5} for name in names]
            ),
        },
        {
            "stage": "merge_vcw",
            "response": json.dumps(
                [{"vcw": name, "element": "person near fountain", "score": 0.5} for name in names]
                + [{"vcw": "fountain", "element": "stone fountain"}]
            ),
        },
        {
            "stage": "filter_vcw",
            "response": json.dumps(
                [{"vcw": name, "element": "person near fountain", "score": 0.5} for name in names]
                + [{"vcw": "fountain", "element": "stone fountain"}]
            ),
        },
        {
            "stage": "assign_placeholders",
            "response": json.dumps([{"placeholder": l, "name": n} for l, n in pairs]),
        },
        {"stage": "long_ca", "response": candidate},
        {"stage": "long_ca", "response": candidate},
        {"stage": "long_ca", "response": candidate},
    ]
    for entry in restore_entries:
        transcript.append({"stage": "restore_names", "response": entry})
    transcript.append({"stage": "restore_names", "response": good})
    transcript.append({"stage": "restore_names", "response": good})
    transcript.append({"stage": "select_best", "response": "0"})
    transcript.append({"stage": "shorten_ca", "response": ca_short})
    transcript.append({"stage": "cf_long", "response": "People stand near a stone fountain."})
    transcript.append({"stage": "cf_short", "response": "People near a fountain."})

    expected = {
        "url": url,
        "letters": list(letters),
        "names": names,
        "fallback": plan == "fallback_needed",
        "plan": plan,
    }
    return snap, transcript, expected


def write_fixture_files(
    tmp_path: Path, fixtures: list[tuple[dict, list[dict], dict]]
) -> tuple[list[Path], Path]:
    """Write snapshots plus one transcript library keyed by URL."""
    snapshot_paths = []
    transcripts = {}
    for i, (snap, transcript, _) in enumerate(fixtures):
        path = tmp_path / f"snapshot_{i}.json"
        path.write_text(json.dumps(snap, ensure_ascii=False), encoding="utf-8")
        snapshot_paths.append(path)
        transcripts[snap["url"]] = transcript
    library_path = tmp_path / "transcripts.json"
    library_path.write_text(
        json.dumps({"version": 1, "transcripts": transcripts}, ensure_ascii=False),
        encoding="utf-8",
    )
    return snapshot_paths, library_path
