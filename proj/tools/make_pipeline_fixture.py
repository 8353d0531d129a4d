#!/usr/bin/env python3
# Copyright 2026 The promptforge authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the synthetic three-dataset registry used by the pipeline tests.

Usage: make_pipeline_fixture.py OUT_DIR
"""

import csv
import json
import os
import random
import sys

SUBJECTS = ["The farmer", "A child", "The old sailor", "My neighbor", "The teacher", "A tourist",
            "The committee", "The pilot", "Her brother", "The baker"]
VERBS = ["painted", "sold", "repaired", "borrowed", "photographed", "cleaned", "visited", "described"]
OBJECTS = ["the red barn", "a wooden boat", "the museum", "an old bicycle", "the garden",
           "a small bakery", "the harbor", "the library"]
PLACES = ["in the morning", "after the storm", "on Sunday", "before dinner", "last winter"]
ADJ_POS = ["wonderful", "moving", "delightful", "clever", "gripping", "charming"]
ADJ_NEG = ["tedious", "clumsy", "forgettable", "dull", "confusing", "bland"]
NOUNS = ["plot", "soundtrack", "cast", "dialogue", "ending", "pacing"]
ANIMALS = ["cat", "dog", "horse", "owl", "frog", "whale", "bee", "fox"]
HOMES = ["house", "kennel", "stable", "tree", "pond", "ocean", "hive", "den"]


def nli(rng, n):
    rows = []
    for _ in range(n):
        s, v, o, p = rng.choice(SUBJECTS), rng.choice(VERBS), rng.choice(OBJECTS), rng.choice(PLACES)
        premise = f"{s} {v} {o} {p}."
        label = rng.randrange(3)
        if label == 0:
            hyp = f"{s} {v} {o}."
        elif label == 1:
            hyp = f"{s} {v} {o} with a friend."
        else:
            hyp = f"{s} never {v} {o}."
        rows.append({"premise": premise, "hypothesis": hyp, "label": label})
    return rows


def sentiment(rng, n):
    rows = []
    for _ in range(n):
        label = rng.randrange(2)
        adj = rng.choice(ADJ_POS if label else ADJ_NEG)
        text = f"The {rng.choice(NOUNS)} was {adj}, and the {rng.choice(NOUNS)} felt {rng.choice(ADJ_POS + ADJ_NEG)}."
        if rng.random() < 0.1:
            text = f'"{text}" said one viewer, adding a line\nabout the theater.'
        rows.append({"text": text, "label": str(label)})
    return rows


def qa(rng, n):
    rows = []
    for _ in range(n):
        k = rng.randrange(len(ANIMALS))
        opts = rng.sample([h for i, h in enumerate(HOMES) if i != k], 3) + [HOMES[k]]
        rng.shuffle(opts)
        rows.append({"question": f"Where does a {ANIMALS[k]} usually live?",
                     "choices": opts, "label": opts.index(HOMES[k])})
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["text", "label"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def main():
    out = sys.argv[1]
    os.makedirs(os.path.join(out, "data"), exist_ok=True)
    rng = random.Random(20211015)
    sizes = {"train": 400, "validation": 100}
    registry = {"datasets": []}
    for name, subset, gen, fmt in [("toy_nli", None, nli, "jsonl"),
                                   ("toy_sentiment", "movies", sentiment, "csv"),
                                   ("toy_qa", None, qa, "jsonl")]:
        splits = {}
        for split, n in sizes.items():
            rows = gen(rng, n)
            rel = f"data/{name}_{split}.{fmt}"
            (write_jsonl if fmt == "jsonl" else write_csv)(os.path.join(out, rel), rows)
            splits[split] = {"path": rel, "format": fmt, "example_count": n}
        entry = {"name": name, "splits": splits}
        if subset:
            entry["subset"] = subset
        registry["datasets"].append(entry)
    with open(os.path.join(out, "registry.json"), "w") as f:
        json.dump(registry, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
