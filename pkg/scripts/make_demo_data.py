#!/usr/bin/env python3
"""Regenerate the bundled demo dataset (data/demo) from fixed seeds."""

import argparse
from pathlib import Path

from murate.demo import write_demo_files


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=Path(__file__).resolve().parent.parent / "data/demo")
    parser.add_argument("--docs", type=int, default=500)
    parser.add_argument("--pairs", type=int, default=1200)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()
    paths = write_demo_files(args.out_dir, n_docs=args.docs, n_pairs=args.pairs, seed=args.seed)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
