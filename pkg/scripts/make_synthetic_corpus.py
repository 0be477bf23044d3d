#!/usr/bin/env python3
"""Generate a synthetic labeled corpus for smoke runs and demos.

Emits corpus.jsonl, labels.qrels, groups.csv and a synthetic sparse-vector
interchange file (vectors.jsonl) into the output directory. Relevant
documents carry category-specific signature tokens; the vector file embeds
the same signal in a hashed feature space, so bm25/splade/fused modes all
have something to learn.
"""

import argparse
import hashlib
import json
import random
from pathlib import Path

DIFFICULTIES = ["hard", "medium", "easy"]
PREVALENCES = {"rare": 0.01, "medium": 0.03, "common": 0.08}


def feature_id(token: str, vocab_size: int) -> int:
    digest = hashlib.blake2b(token.encode(), digest_size=4).digest()
    return int.from_bytes(digest, "big") % vocab_size


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--categories", type=int, default=3)
    parser.add_argument("--vocab-size", type=int, default=30522)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    noise_vocab = [f"term{i}" for i in range(500)]
    categories = []
    for c in range(args.categories):
        prevalence = list(PREVALENCES)[c % len(PREVALENCES)]
        categories.append(
            {
                "id": f"cat{c:02d}",
                "signature": [f"sig{c}a", f"sig{c}b", f"sig{c}c"],
                "rate": PREVALENCES[prevalence],
                "difficulty": DIFFICULTIES[c % len(DIFFICULTIES)],
                "prevalence": prevalence,
            }
        )

    docs = []
    labels = {cat["id"]: set() for cat in categories}
    for i in range(args.docs):
        doc_id = f"d{i:06d}"
        tokens = rng.choices(noise_vocab, k=12)
        for cat in categories:
            if rng.random() < cat["rate"]:
                # harder categories carry a weaker signature signal
                strength = {"hard": 1, "medium": 2, "easy": 3}[cat["difficulty"]]
                tokens += rng.sample(cat["signature"], k=strength)
                labels[cat["id"]].add(doc_id)
        rng.shuffle(tokens)
        docs.append({"doc_id": doc_id, "text": " ".join(tokens)})

    with open(out / "corpus.jsonl", "w") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")

    with open(out / "labels.qrels", "w") as fh:
        for cat in categories:
            for doc in docs:
                rel = 1 if doc["doc_id"] in labels[cat["id"]] else 0
                fh.write(f"{cat['id']} {doc['doc_id']} {rel}\n")

    with open(out / "groups.csv", "w") as fh:
        fh.write("category_id,difficulty,prevalence\n")
        for cat in categories:
            fh.write(f"{cat['id']},{cat['difficulty']},{cat['prevalence']}\n")

    # Hash each token into the vector space and add a few expansion features,
    # mimicking what a learned sparse encoder would emit.
    with open(out / "vectors.jsonl", "w") as fh:
        for doc in docs:
            vector = {}
            for tok in doc["text"].split():
                fid = feature_id(tok, args.vocab_size)
                vector[str(fid)] = max(vector.get(str(fid), 0.0), round(rng.uniform(0.5, 2.5), 3))
                if rng.random() < 0.3:
                    expansion = feature_id(tok + "~exp", args.vocab_size)
                    vector[str(expansion)] = round(rng.uniform(0.1, 0.8), 3)
            fh.write(json.dumps({"doc_id": doc["doc_id"], "vector": vector}) + "\n")

    n_pos = {cat["id"]: len(labels[cat["id"]]) for cat in categories}
    print(f"wrote {args.docs} documents, categories: {n_pos}")
    print(f"outputs under {out}/")


if __name__ == "__main__":
    main()
