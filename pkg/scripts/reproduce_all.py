"""Write the CSV datasets for every supported figure."""

import argparse
import time

from lpm import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--full", action="store_true", help="large N; slow")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--figures", type=int, nargs="*", default=list(ex.FIGURES))
    args = ap.parse_args()
    for k in args.figures:
        t0 = time.perf_counter()
        paths = ex.reproduce(k, args.out, args.full, args.seed)
        print(f"figure {k:2d}: {len(paths)} file(s) in {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
