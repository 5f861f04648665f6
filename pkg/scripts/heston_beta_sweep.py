"""Print the Sigma partition and the two data loci for Heston with beta in {0.5, 1, 3}."""

import argparse
import time

from degenpar.operator import HestonParams
from degenpar.suites import BETA_SETS, fichera_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=None, help="rescale every set to this sigma at fixed beta")
    args = ap.parse_args()
    sets = BETA_SETS
    if args.sigma is not None:
        # keep beta: theta fixed, kappa = beta sigma^2 / (2 theta)
        sets = {b: HestonParams(args.sigma, p.rho, b * args.sigma**2 / (2 * p.theta), p.theta, p.r, p.q)
                for b, p in BETA_SETS.items()}
    t0 = time.perf_counter()
    verdicts, reports = fichera_suite(sets)
    for beta, rep in reports.items():
        print(rep.to_text())
    for v in verdicts:
        print(v.line())
    print(f"elapsed {time.perf_counter() - t0:.3f}s")


if __name__ == "__main__":
    main()
