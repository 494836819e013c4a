"""Regenerate the seed fibers stored in src/curvesig/seeds.

Run from the repository root after any change that affects tracking or
monodromy; the stored files must equal what ``compute_seed`` returns.
"""

import argparse
import logging
import time
from pathlib import Path

from curvesig.witness import _seed_file, compute_seed, save_seed

MAPS = ("euclid_diff", "euclid_joint_diff", "euclid_joint")
DEGREES = (2, 3, 4)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=Path(__file__).resolve().parent.parent / "src" / "curvesig" / "seeds")
    p.add_argument("--map", action="append", choices=MAPS)
    p.add_argument("--degree", action="append", type=int, choices=DEGREES)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for m in args.map or MAPS:
        for d in args.degree or DEGREES:
            t0 = time.time()
            base, fiber = compute_seed(m, d, 0)
            save_seed(out / _seed_file(m, d), base, fiber)
            print(f"{m} degree {d}: {len(fiber)} points in {time.time() - t0:.1f} s")


if __name__ == "__main__":
    main()
