"""Machine-check every gradient and derived quantity before trusting them.

Runs the full verification suite: per-op finite differences, a
finite-difference check of the complete training objective, brute-force
oracle equivalence for the contrastive losses, empirical view-corruption
rates, and a forward-pass determinism check.
"""

from tcgl import evalkit


def main():
    report = evalkit.verify_all(seed=0)
    for line in report.lines():
        print(line)
    print()
    if report.all_passed:
        print(f"all {len(report.checks)} checks passed")
    else:
        failed = [c.name for c in report.checks if not c.passed]
        print(f"FAILED: {failed}")
        raise SystemExit(2)


if __name__ == "__main__":
    main()
