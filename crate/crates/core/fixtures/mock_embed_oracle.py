#!/usr/bin/env python3
"""Reference implementation of the mock text embedder.

Regenerates mock_embed_golden.json, which the Rust tests compare against.
Run: python3 mock_embed_oracle.py > mock_embed_golden.json
"""
import json
import math
import re

MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = 14695981039346656037
    for b in data:
        h ^= b
        h = (h * 1099511628211) & MASK
    return h


def splitmix64(seed: int, n: int):
    state = seed
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        yield z ^ (z >> 31)


def to_unit_interval(x: int) -> float:
    return ((x >> 11) * 2.0**-53) * 2.0 - 1.0


def mock_embed(text: str, d: int):
    tokens = [t for t in re.split(r"[^a-z0-9]", text.lower()) if t]
    acc = [0.0] * d
    for tok in tokens:
        for i, x in enumerate(splitmix64(fnv1a64(tok.encode("utf-8")), d)):
            acc[i] += to_unit_interval(x)
    sq = 0.0
    for v in acc:  # plain left-to-right sum, no compensation
        sq += v * v
    norm = math.sqrt(sq)
    if not tokens or norm < 1e-12:
        return [1.0] + [0.0] * (d - 1)
    return [v / norm for v in acc]


CASES = [("puppy", 4), ("Puppy!!", 4), ("", 4), ("dog dog", 3), ("dog", 3),
         ("I'm looking for photos of puppies.", 8)]

if __name__ == "__main__":
    out = {
        "fnv1a64": {t: str(fnv1a64(t.encode())) for t in ["", "a", "puppy"]},
        "splitmix64_seed0": [str(x) for x in splitmix64(0, 3)],
        "embeddings": [{"text": t, "dim": d, "values": [repr(v) for v in mock_embed(t, d)]}
                       for t, d in CASES],
    }
    print(json.dumps(out, indent=2))
