#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerate the 50-pair end-to-end fixture under tests/data/e2e/.

The fixture is constructed so the deterministic mock backend reproduces the
target gold exactly: target annotations are the projection of the source
annotations through the shipped alignments, and the bracket rendering below
matches the C++ codec byte for byte (adjacent tokens with the same label
merge into one group).
"""

import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "e2e"

# English / Hindi word pairs; tokens never contain whitespace or brackets.
LEXICON = [
    ("sun", "सूरज"),
    ("rain", "बारिश"),
    ("tomorrow", "कल"),
    ("today", "आज"),
    ("morning", "सुबह"),
    ("evening", "शाम"),
    ("house", "घर"),
    ("market", "बाजार"),
    ("delhi", "दिल्ली"),
    ("mumbai", "मुंबई"),
    ("music", "संगीत"),
    ("news", "समाचार"),
    ("tea", "चाय"),
    ("rice", "चावल"),
    ("doctor", "डॉक्टर"),
    ("teacher", "शिक्षक"),
    ("monday", "सोमवार"),
    ("sunday", "रविवार"),
    ("cold", "ठंड"),
    ("warm", "गरम"),
    ("light", "बत्ती"),
    ("alarm", "अलार्म"),
    ("train", "रेलगाड़ी"),
    ("ticket", "टिकट"),
]

LABELS = [
    "date",
    "time",
    "weather_descriptor",
    "place_name",
    "person",
    "food_type",
    "news_topic",
    "device_type",
]

FILLER_HI = ["को", "में", "ही"]


def render(tokens, labels):
    """Mirror of the C++ annotated renderer, including adjacent merge."""
    out = []
    i = 0
    while i < len(tokens):
        if labels[i] is None:
            out.append(tokens[i])
            i += 1
        else:
            j = i
            while j < len(tokens) and labels[j] == labels[i]:
                j += 1
            out.append("[" + labels[i] + " : " + " ".join(tokens[i:j]) + "]")
            i = j
    return " ".join(out)


def project(source_labels, n_target, links):
    """Mirror of the C++ label projection: copy along links, else None."""
    out = [None] * n_target
    for src, tgt in links:
        out[tgt] = source_labels[src]
    return out


def build_pair(rng, index):
    n = rng.randint(3, 5)
    entries = rng.sample(LEXICON, n)
    en = [e[0] for e in entries]
    hi = [e[1] for e in entries]

    labels = [None] * n
    if index % 4 == 0 and n >= 3:
        # An adjacent two-token group, kept adjacent on the target side.
        start = rng.randrange(n - 1)
        label = rng.choice(LABELS)
        labels[start] = label
        labels[start + 1] = label
        perm = list(range(n))  # identity keeps the group contiguous
    else:
        for pos in rng.sample(range(n), rng.randint(1, 2)):
            labels[pos] = rng.choice(LABELS)
        perm = list(range(n))
        rng.shuffle(perm)

    target_tokens = [hi[perm[j]] for j in range(n)]
    links = [(perm[j], j) for j in range(n)]

    if index % 5 == 0:
        # One unaligned function word; it must stay unlabeled downstream.
        slot = rng.randrange(n + 1)
        target_tokens.insert(slot, rng.choice(FILLER_HI))
        links = [(s, t if t < slot else t + 1) for s, t in links]

    target_labels = project(labels, len(target_tokens), links)
    assert any(v is not None for v in target_labels)

    pair_id = f"p{index:02d}"
    source = {
        "id": pair_id,
        "locale": "en-US",
        "utt": " ".join(en),
        "annot_utt": render(en, labels),
    }
    target = {
        "id": pair_id,
        "locale": "hi-IN",
        "utt": " ".join(target_tokens),
        "annot_utt": render(target_tokens, target_labels),
    }
    alignment = {
        "id": pair_id,
        "pharaoh": " ".join(f"{s}-{t}" for s, t in sorted(links, key=lambda x: x[1])),
    }
    embedding = {
        "id": pair_id,
        "vector": [round(rng.uniform(-1.0, 1.0), 6) for _ in range(4)],
    }
    return source, target, alignment, embedding


def main():
    rng = random.Random(20240612)
    OUT.mkdir(parents=True, exist_ok=True)
    rows = [build_pair(rng, i) for i in range(50)]
    names = ["source_en.jsonl", "target_hi.jsonl", "alignments.jsonl",
             "embeddings.jsonl"]
    for column, name in enumerate(names):
        with open(OUT / name, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row[column], ensure_ascii=False) + "\n")
    print(f"wrote 50 pairs to {OUT}")


if __name__ == "__main__":
    main()
