"""Sweep request counts and tabulate power savings per demand class.

Runs a reduced grid (small and large classes, 1..5 requests) so the
demo finishes in a few seconds, then prints the same CSV the command
line tool emits.  The full study grid is:

    vecopt sweep --classes small,medium,large --requests 1:10 --out grid.csv

which also drops gnuplot-ready .dat files next to the CSV.
"""

from vecopt.sweep import emit_report, run_sweep


def main() -> None:
    report = run_sweep(("small", "large"), tuple(range(1, 6)), workers=1)
    print(emit_report(report))
    for row in report.rows:
        note = "" if row.status == "optimal" else f"  ({row.status})"
        print(f"{row.demand_class:6s} x{row.request_count}: "
              f"{row.total_power_w:10.4f} W vs {row.baseline_power_w:9.4f} W "
              f"-> saves {row.saving_pct:6.2f} %{note}")


if __name__ == "__main__":
    main()
