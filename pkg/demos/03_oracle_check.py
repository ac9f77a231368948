"""Cross-check the branch-and-bound solver against brute enumeration.

Draws seeded random mini scenarios (up to 6 nodes x 3 demands), solves
each with the exact solver and with the exhaustive oracle, and prints
the objective discrepancies.  The same machinery backs the command

    vecopt validate --instances 100 --seed 42
"""

from vecopt.check import cross_check


def main() -> None:
    report = cross_check(15, seed=3)
    for r in report.results:
        print(f"instance {r.index:2d} (seed {r.seed:>10d}): "
              f"solver {r.solver_status:10s} oracle {r.oracle_status:10s} "
              f"disagreement {r.discrepancy:.2e} W")
    verdict = "all agree" if report.all_agree else "MISMATCH"
    print(f"{report.matches}/{len(report.results)} agree, "
          f"max discrepancy {report.max_discrepancy:.2e} W -> {verdict}")


if __name__ == "__main__":
    main()
