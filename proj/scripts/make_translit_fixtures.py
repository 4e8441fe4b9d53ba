#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the frozen transliteration fixtures under tests/data/translit/.

The expected outputs are produced by a small reference implementation of the
ISO 15919 rendering rules kept deliberately separate from the C++ engine, so
the two can disagree. A set of hand-romanized words is checked against the
reference implementation before anything is written; a mismatch aborts the
run rather than freezing a bad fixture.
"""

import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TABLE_DIR = os.path.join(ROOT, "resources", "translit")
OUT_DIR = os.path.join(ROOT, "tests", "data", "translit")

ZWJ = "‍"
ZWNJ = "‌"

BLOCKS = {
    "devanagari": (0x0900, 0x097F),
    "bengali": (0x0980, 0x09FF),
    "tamil": (0x0B80, 0x0BFF),
}

# Hand-romanized words used to sanity-check the reference implementation.
HAND_CHECKS = {
    "devanagari": [
        ("सूरज", "sūraja"),                    # सूरज
        ("रविवार", "ravivāra"),      # रविवार
        ("हिंदी", "hiṁdī"),          # हिंदी
        ("क्", "k"),                                          # क्
        ("नमस्ते", "namastē"),       # नमस्ते
        ("भारत", "bhārata"),                   # भारत
        ("दिल्ली", "dillī"),         # दिल्ली
        ("ज़्यादा", "zyādā"),  # ज़्यादा
    ],
    "bengali": [
        ("বাংলা", "bāṁlā"),     # বাংলা
        ("ঢাকা", "ḍhākā"),           # ঢাকা
        ("কলকাতা", "kalakātā"), # কলকাতা
        ("হঠাৎ", "haṭhāt"),               # হঠাৎ
        ("কো", "kō"),                                    # কো
    ],
    "tamil": [
        ("தமிழ்", "tamiḻ"),               # தமிழ்
        ("வணக்கம்", "vaṇakkam"),  # வணக்கம்
        ("சென்னை", "ceṉṉai"),   # சென்னை
        ("அஃது", "aḵtu"),                      # அஃது
    ],
}


def load_table(name):
    table = {}
    path = os.path.join(TABLE_DIR, name + ".tsv")
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            seq_field, latin, category = line.split("\t")
            seq = "".join(chr(int(h, 16)) for h in seq_field.split())
            if seq in table:
                raise SystemExit(f"duplicate sequence in {path}: {seq_field}")
            table[seq] = (latin, category)
    return table


def romanize(text, table, block):
    max_len = max(len(seq) for seq in table)
    out = []
    pending = None
    i = 0

    def flush(inherent):
        nonlocal pending
        if pending is None:
            return
        out.append(pending)
        if inherent:
            out.append("a")
        pending = None

    while i < len(text):
        ch = text[i]
        if ch in (ZWJ, ZWNJ):
            i += 1
            continue
        entry = None
        length = 0
        for l in range(min(max_len, len(text) - i), 0, -1):
            candidate = text[i:i + l]
            if candidate in table:
                entry = table[candidate]
                length = l
                break
        if entry is None:
            flush(True)
            out.append(ch)
            i += 1
            continue
        latin, category = entry
        if category == "consonant":
            flush(True)
            pending = latin
        elif category == "vowel":
            flush(True)
            out.append(latin)
        elif category == "vowel_sign":
            if pending is not None:
                out.append(pending)
                pending = None
            out.append(latin)
        elif category == "virama":
            flush(False)
        else:  # digit, sign
            flush(True)
            out.append(latin)
        i += length
    flush(True)
    return "".join(out)


def by_category(table, category):
    return sorted(
        (seq, latin) for seq, (latin, cat) in table.items() if cat == category
    )


def build_cases(name, table):
    block = BLOCKS[name]
    consonants = [seq for seq, _ in by_category(table, "consonant")]
    vowels = [seq for seq, _ in by_category(table, "vowel")]
    vowel_signs = [seq for seq, _ in by_category(table, "vowel_sign")]
    digits = [seq for seq, _ in by_category(table, "digit")]
    virama = [seq for seq, _ in by_category(table, "virama")][0]
    single_consonants = [c for c in consonants if len(c) == 1]

    cases = []
    for text, expected in HAND_CHECKS[name]:
        got = romanize(text, table, block)
        if got != expected:
            raise SystemExit(
                f"{name}: reference implementation disagrees with the "
                f"hand-romanized form of {text!r}: {got!r} != {expected!r}")
        cases.append(text)

    cases.extend(vowels)
    cases.extend(digits)
    cases.extend(consonants)
    sign_sample = vowel_signs[: max(5, len(vowel_signs) // 2)]
    for c in single_consonants:
        for vs in sign_sample:
            cases.append(c + vs)
    anchor = single_consonants[0]
    for c in single_consonants:
        cases.append(c + virama + anchor)
        cases.append(anchor + virama + c + vowel_signs[0])
    cases.append(" ".join(single_consonants[:6]))
    cases.append("latin text stays latin 123")
    return cases


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for name in sorted(BLOCKS):
        table = load_table(name)
        block = BLOCKS[name]
        cases = build_cases(name, table)
        seen = set()
        rows = []
        for text in cases:
            if text in seen:
                continue
            seen.add(text)
            rows.append((text, romanize(text, table, block)))
        if len(rows) < 200:
            raise SystemExit(f"{name}: only {len(rows)} fixture rows")
        path = os.path.join(OUT_DIR, name + ".tsv")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for text, expected in rows:
                f.write(f"{text}\t{expected}\n")
        print(f"{path}: {len(rows)} rows")


if __name__ == "__main__":
    sys.exit(main())
