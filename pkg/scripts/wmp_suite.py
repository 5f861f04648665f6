"""Seeded weak-maximum-principle and a priori bound suites; exits nonzero on any failing verdict."""

import argparse
import sys
import time

from degenpar.harness import REGIMES
from degenpar.suites import bounds_suite, wmp_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--bound-seeds", type=int, default=100)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    t0 = time.perf_counter()
    verdicts = wmp_suite(range(args.seeds), jobs=args.jobs)
    print(f"weak max: {sum(v.passed for v in verdicts)}/{len(verdicts)}  "
          f"max u = {max(v.details['max_u'] for v in verdicts):.3e}")
    for regime in REGIMES:
        vs = bounds_suite(regime, range(args.bound_seeds), jobs=args.jobs)
        worst = max(vs, key=lambda v: v.violation)
        print(f"bounds {regime}: {sum(v.passed for v in vs)}/{len(vs)}  worst {worst.property_id} "
              f"violation {worst.violation:.3e}")
        verdicts += vs
    print(f"elapsed {time.perf_counter() - t0:.1f}s")
    sys.exit(0 if all(v.passed for v in verdicts) else 1)


if __name__ == "__main__":
    main()
