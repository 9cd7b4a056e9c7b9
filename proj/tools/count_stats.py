#!/usr/bin/env python3
"""Independent statistics count over a synthesized JSONL corpus.

Deliberately shares no code with the library: plain line-by-line counting,
step length measured in characters. Prints the same four fields the `stats`
subcommand reports, so its output can be diffed directly.
"""
import json
import sys


def main(path):
    n_samples = 0
    n_steps = 0
    total_chars = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            n_samples += 1
            for step in rec["steps"]:
                n_steps += 1
                total_chars += len(step)
    out = {
        "n_samples": n_samples,
        "n_steps": n_steps,
        "mean_steps": n_steps / n_samples,
        "mean_len_per_step": total_chars / n_steps if n_steps else 0.0,
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/mini_corpus.jsonl")
