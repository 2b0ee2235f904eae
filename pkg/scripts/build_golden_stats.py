#!/usr/bin/env python3
"""Build data/mini_corpus_stats.golden.txt with an independent computation.

Deliberately does not import warmsum: it reads the fixture with the json
module, derives split sizes from the rounding rule (train cut at
round(n * r1), dev cut at round(n * (r1 + r2))), averages whitespace word
counts over the whole corpus, and renders the documented two-column layout.
The stats CLI must reproduce this file byte-exactly for

    warmsum stats --corpus data/mini_corpus.jsonl --ratios 0.6,0.2,0.2 \
        --seed 13 --name mini_corpus
"""

import json
from pathlib import Path

RATIOS = (0.6, 0.2, 0.2)
NAME = "mini_corpus"


def main():
    root = Path(__file__).resolve().parent.parent
    rows = [json.loads(line) for line in
            (root / "data" / "mini_corpus.jsonl").read_text(encoding="utf-8").splitlines()
            if line.strip()]
    n = len(rows)
    cut1 = round(n * RATIOS[0])
    cut2 = round(n * (RATIOS[0] + RATIOS[1]))
    sizes = (cut1, cut2 - cut1, n - cut2)
    avg_body = sum(len(r["body"].split()) for r in rows) / n
    avg_abstract = sum(len(r["abstract"].split()) for r in rows) / n

    table = [
        ("Size (train / dev / test)", f"{sizes[0]} / {sizes[1]} / {sizes[2]}"),
        ("#avg of words in body", str(round(avg_body))),
        ("#avg of words in abstract", str(round(avg_abstract))),
    ]
    label_w = max(len(label) for label, _ in table)
    value_w = max(len(NAME), max(len(v) for _, v in table))
    lines = [f"{'':<{label_w}}  {NAME:>{value_w}}"]
    lines += [f"{label:<{label_w}}  {value:>{value_w}}" for label, value in table]
    out = root / "data" / "mini_corpus_stats.golden.txt"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
