#!/usr/bin/env python3
"""Regenerate the golden fixture files under fixtures/.

A 40-image synthetic corpus in four visual families (map / bar chart /
table / non-visualization), three scripted coder sessions over two sampled
batches, and the embedding, caption, and probability tables every pipeline
stage consumes.  Everything is seeded, so reruns are byte-stable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from taxa.assist import fallback_embed
from taxa.model import create_session
from taxa.storage import dumps_canonical, sample_batches, save_session

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

FAMILIES = ("map", "bar chart", "table", "non-visualization")
FAMILY_COLORS = {
    "map": (200, 40, 40),
    "bar chart": (40, 180, 40),
    "table": (40, 60, 220),
    "non-visualization": (128, 128, 128),
}
NAMES = {
    "map": "Map of region {i}",
    "bar chart": "Bar chart of trade {i}",
    "table": "Numeric table {i}",
    "non-visualization": "Portrait engraving {i}",
}


def family_of(i: int) -> str:
    return FAMILIES[i % 4]


def make_image(i: int) -> np.ndarray:
    rng = np.random.default_rng(1000 + i)
    base = np.array(FAMILY_COLORS[family_of(i)], dtype=np.float64)
    noise = rng.normal(0, 12, size=(16, 16, 3))
    return np.clip(base + noise, 0, 255).astype(np.uint8)


def write_corpus() -> list[str]:
    (FIXTURES / "images").mkdir(parents=True, exist_ok=True)
    records = []
    uuids = []
    for i in range(40):
        uuid = f"img-{i:03d}"
        uuids.append(uuid)
        Image.fromarray(make_image(i)).save(FIXTURES / "images" / f"{uuid}.png")
        records.append(
            {
                "uuid": uuid,
                "displayName": NAMES[family_of(i)].format(i=i),
                "publishDate": f"{1800 + i}-05-01",
                "viewUrl": f"https://example.org/view/{uuid}",
                "fileName": f"{uuid}.png",
                "collection": "fixture",
            }
        )
    (FIXTURES / "dataset.json").write_bytes(dumps_canonical(records))
    return uuids


def write_tables(uuids: list[str]) -> None:
    emb_lines = []
    caption_lines = []
    prob_lines = []
    caption_templates = {
        "map": "it is a map of a river delta",
        "bar chart": "this is a bar chart with many bars",
        "table": "a table of numbers",
        "non-visualization": "",
    }
    rng = np.random.default_rng(77)
    for i, uuid in enumerate(uuids):
        fam = family_of(i)
        vec = fallback_embed(make_image(i))
        emb_lines.append(
            json.dumps(
                {"uuid": uuid, "vector": [round(float(v), 8) for v in vec]},
                sort_keys=True,
            )
        )
        caption_lines.append(
            json.dumps(
                {"uuid": uuid, "caption": caption_templates[fam]},
                sort_keys=True,
            )
        )
        probs = {}
        for other in FAMILIES:
            if other == fam:
                probs[other] = round(0.55 + 0.3 * float(rng.random()), 3)
            else:
                probs[other] = round(0.25 * float(rng.random()), 3)
        if i % 10 == 3:  # exercise the inclusive threshold boundary
            probs[fam] = 0.3
        prob_lines.append(
            json.dumps({"uuid": uuid, "probs": probs}, sort_keys=True)
        )
    (FIXTURES / "embeddings.jsonl").write_text(
        "\n".join(emb_lines) + "\n", encoding="utf-8"
    )
    (FIXTURES / "captions.jsonl").write_text(
        "\n".join(caption_lines) + "\n", encoding="utf-8"
    )
    (FIXTURES / "probs.jsonl").write_text(
        "\n".join(prob_lines) + "\n", encoding="utf-8"
    )


def scripted_sessions(uuids: list[str]) -> list:
    plan = sample_batches(uuids, batch_size=10, n_batches=2, seed=7)
    coded = plan.batches[0] + plan.batches[1]
    sessions = []
    for coder in ("C1", "C2", "C3"):
        s = create_session(coder, session_id=f"fixture-{coder.lower()}")
        for batch in plan.batches:
            s.load_batch(batch)
        for name in FAMILIES:
            s.create_taxon((), name)
        if coder == "C3":
            s.create_taxon(("map",), "cartogram")  # C3 splits maps
        for uuid in coded:
            i = int(uuid.split("-")[1])
            fam = family_of(i)
            if coder == "C3" and fam == "map" and i % 8 == 0:
                s.label_image(uuid, ("map", "cartogram"))
            elif coder == "C3" and fam == "map":
                s.label_image(uuid, ("map", "ungrouped"))
            elif coder == "C2" and fam == "table" and i % 12 == 2:
                s.label_image(uuid, ("table",))
                s.label_image(uuid, ("bar chart",))  # C2 sees bars in tables
            else:
                s.label_image(uuid, (fam,))
        if coder == "C2":
            s.set_unsure(coded[4], True)
            s.add_memo(f"not sure about {coded[4]}")
        sessions.append(s)
    (FIXTURES / "batch-plan.json").write_bytes(dumps_canonical(plan.doc()))
    for s in sessions:
        (FIXTURES / f"session-{s.coder_id.lower()}.json").write_bytes(
            save_session(s)
        )
    return sessions


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    uuids = write_corpus()
    write_tables(uuids)
    scripted_sessions(uuids)
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
