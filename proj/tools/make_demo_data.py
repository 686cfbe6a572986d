"""Writes a small sentiment task under data/demo for trying the CLI."""

import argparse
import json
import random
from pathlib import Path

POSITIVE = ["great", "lovely", "sharp", "moving", "funny", "warm", "clever", "gripping"]
NEGATIVE = ["dull", "clumsy", "tedious", "flat", "bland", "messy", "shallow", "grating"]
NOUNS = ["film", "script", "cast", "soundtrack", "ending", "pacing", "dialogue", "premise"]

TASK = {
    "name": "demo-sentiment",
    "labels": ["negative", "positive"],
    "verbalizers": ["negative", "positive"],
    "instructions": [
        "Classify the sentiment of the review as positive or negative.",
        "Is this review positive or negative?",
        "Decide whether the reviewer liked the movie.",
        "Read the review and label its sentiment.",
        "Tell me if the following movie review is positive or negative.",
        "Determine the overall opinion expressed in the review.",
        "What is the sentiment of this review?",
    ],
    "template": "{instruction}\n\nReview: {input}\nSentiment: {label}",
}

PARAPHRASES = [
    "Label the review's sentiment as positive or negative.",
    "Say whether the sentiment of this review is positive or negative.",
    "Categorize the review as expressing positive or negative sentiment.",
    "Judge if the review below is positive or negative.",
    "Identify whether the review is favourable or unfavourable.",
]


def review(rng, label):
    words = POSITIVE if label == 1 else NEGATIVE
    other = NEGATIVE if label == 1 else POSITIVE
    parts = [f"the {rng.choice(NOUNS)} was {rng.choice(words)}"]
    if rng.random() < 0.4:
        parts.append(f"though the {rng.choice(NOUNS)} felt {rng.choice(other)}")
    if rng.random() < 0.5:
        parts.append(f"and the {rng.choice(NOUNS)} was {rng.choice(words)}")
    return " ".join(parts).capitalize() + "."


def dataset(rng, prefix, n):
    rows = []
    for i in range(n):
        label = rng.randrange(2)
        rows.append({"id": f"{prefix}-{i:04d}", "text": review(rng, label), "label": label})
    return rows


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "data" / "demo", type=Path)
    parser.add_argument("--train", type=int, default=64)
    parser.add_argument("--test", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "task.json").write_text(json.dumps(TASK, indent=2) + "\n", encoding="utf-8")
    write_jsonl(args.out / "train.jsonl", dataset(rng, "train", args.train))
    write_jsonl(args.out / "test.jsonl", dataset(rng, "test", args.test))
    write_jsonl(args.out / "paraphrases.jsonl",
                [{"instruction_index": 0, "paraphrase": p} for p in PARAPHRASES])


if __name__ == "__main__":
    main()
