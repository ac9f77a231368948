"""Place one small request and compare against the cloud-only policy.

Builds the reference parking-lot scenario (20 vehicles, 4 edge nodes,
cloud), asks for a single 2880 MIPS workload at vehicle v0, solves the
placement exactly, and prints where the work went and what it costs.
"""

from vecopt.bnb import solve_scenario
from vecopt.power import cloud_only_baseline, evaluate_placement
from vecopt.scenario import build_reference_scenario
from vecopt.sweep import compute_saving


def main() -> None:
    scenario = build_reference_scenario("small", 1)
    solution = solve_scenario(scenario)
    report = evaluate_placement(scenario, solution.placement)
    baseline = cloud_only_baseline(scenario)

    print(f"status      : {solution.status}")
    print(f"explored    : {solution.stats.explored_nodes} nodes, "
          f"{solution.stats.lp_iterations} simplex iterations")
    print()
    print("assignment (demand -> node: MIPS)")
    for (demand, node), mips in sorted(solution.placement.x.items()):
        print(f"  {demand} -> {node}: {mips:g}")
    print()
    print("power by tier (W)")
    for tier in ("vehicle", "edge", "cloud"):
        print(f"  {tier:8s} {report.tier_total(tier):10.4f}")
    print(f"  {'total':8s} {report.total_w:10.4f}")
    print()
    print(f"cloud-only baseline : {baseline.total_w:.4f} W")
    saving = compute_saving(report.total_w, baseline.total_w)
    print(f"power saving        : {saving:.2f} %")


if __name__ == "__main__":
    main()
