"""Manufactured-solution orders on Heston (space and time ladders) and the affine exactness check."""

from degenpar.suites import convergence_suite


def main():
    for v in convergence_suite():
        print(v.line())
        for k in ("errors", "orders"):
            if k in v.details:
                print(f"    {k}: " + ", ".join(f"{e:.4g}" for e in v.details[k]))


if __name__ == "__main__":
    main()
