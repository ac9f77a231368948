"""Request-count sweeps and report emission.

A sweep solves the reference scenario for each (demand class, request
count) pair, compares against the cloud-only baseline, and renders rows
in a stable column order.  Points are independent, so they can fan out
over worker processes; results are deterministic regardless of worker
count, and emitted documents are byte-identical across runs (measured
solve times are kept on the row object but written as zero).
"""

from __future__ import annotations

import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .bnb import solve_scenario
from .power import cloud_only_baseline, evaluate_placement
from .scenario import CLASS_ORDER, build_reference_scenario
from .types import (
    ModelOptions,
    TIER_CLOUD,
    TIER_EDGE,
    TIER_VEHICLE,
    VERSION,
)

CSV_COLUMNS = (
    "demand_class",
    "request_count",
    "total_power_w",
    "vehicle_power_w",
    "edge_power_w",
    "cloud_power_w",
    "cloud_mips",
    "baseline_power_w",
    "saving_pct",
    "bb_nodes",
    "lp_iterations",
    "solve_ms",
    "status",
    "objective_w",
)


@dataclass(frozen=True)
class SweepRow:
    demand_class: str
    request_count: int
    total_power_w: float
    vehicle_power_w: float
    edge_power_w: float
    cloud_power_w: float
    cloud_mips: float
    baseline_power_w: float
    saving_pct: float
    bb_nodes: int
    lp_iterations: int
    solve_ms: float
    status: str
    objective_w: float


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    options: ModelOptions
    version: str = VERSION


def compute_saving(optimal_w: float, baseline_w: float) -> float:
    """Percentage of baseline power avoided by the optimal placement."""
    if baseline_w <= 0:
        if optimal_w <= 0:
            return 0.0
        raise ValueError("baseline power must be positive")
    return (1.0 - optimal_w / baseline_w) * 100.0


def _sweep_point(
    args: tuple[str, int, ModelOptions, float | None, int | None, float],
) -> SweepRow:
    demand_class, count, options, time_limit, node_limit, gap = args
    scenario = build_reference_scenario(demand_class, count, options)
    baseline = cloud_only_baseline(scenario)
    t0 = time.perf_counter()
    solution = solve_scenario(
        scenario,
        time_limit_s=time_limit,
        node_limit=node_limit,
        absolute_gap=gap,
    )
    ms = (time.perf_counter() - t0) * 1000.0
    if solution.assignment is None:
        return SweepRow(
            demand_class=demand_class,
            request_count=count,
            total_power_w=float("nan"),
            vehicle_power_w=float("nan"),
            edge_power_w=float("nan"),
            cloud_power_w=float("nan"),
            cloud_mips=float("nan"),
            baseline_power_w=baseline.total_w,
            saving_pct=float("nan"),
            bb_nodes=solution.stats.explored_nodes,
            lp_iterations=solution.stats.lp_iterations,
            solve_ms=ms,
            status=solution.status,
            objective_w=float("nan"),
        )
    report = evaluate_placement(scenario, solution.placement)
    return SweepRow(
        demand_class=demand_class,
        request_count=count,
        total_power_w=report.total_w,
        vehicle_power_w=report.tier_total(TIER_VEHICLE),
        edge_power_w=report.tier_total(TIER_EDGE),
        cloud_power_w=report.tier_total(TIER_CLOUD),
        cloud_mips=report.tier_load(TIER_CLOUD),
        baseline_power_w=baseline.total_w,
        saving_pct=compute_saving(report.total_w, baseline.total_w),
        bb_nodes=solution.stats.explored_nodes,
        lp_iterations=solution.stats.lp_iterations,
        solve_ms=ms,
        status=solution.status,
        objective_w=solution.objective,
    )


DEFAULT_NODE_LIMIT = 150


def run_sweep(
    classes: tuple[str, ...] = CLASS_ORDER,
    counts: tuple[int, ...] = tuple(range(1, 11)),
    options: ModelOptions | None = None,
    *,
    workers: int = 1,
    time_limit_s: float | None = None,
    node_limit: int | None = DEFAULT_NODE_LIMIT,
    absolute_gap: float = 1e-6,
) -> SweepReport:
    """Solve every (class, count) pair and tabulate the comparison.

    ``workers`` only fans the independent points out over processes; it
    never changes any numbers.  The default per-point budget is a node
    count rather than a wall-clock limit so a sweep's rows (including any
    timeout flags) are identical on any machine; points that prove
    optimality within the budget report status ``optimal``.
    """
    options = options or ModelOptions()
    ordered = sorted(
        classes,
        key=lambda c: CLASS_ORDER.index(c) if c in CLASS_ORDER else len(CLASS_ORDER),
    )
    tasks = [
        (cls, count, options, time_limit_s, node_limit, absolute_gap)
        for cls in ordered
        for count in sorted(counts)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(_sweep_point, tasks, chunksize=1))
    else:
        rows = tuple(map(_sweep_point, tasks))
    return SweepReport(rows=rows, options=options)


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _normalized_rows(report: SweepReport) -> list[SweepRow]:
    # Measured times vary run to run; emitted documents must not.
    return [replace(row, solve_ms=0.0) for row in report.rows]


def emit_report(report: SweepReport, fmt: str = "csv") -> str:
    """Render a sweep as csv or json text, deterministically."""
    rows = _normalized_rows(report)
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            out.write(
                ",".join(
                    [
                        r.demand_class,
                        str(r.request_count),
                        _fmt(r.total_power_w),
                        _fmt(r.vehicle_power_w),
                        _fmt(r.edge_power_w),
                        _fmt(r.cloud_power_w),
                        _fmt(r.cloud_mips),
                        _fmt(r.baseline_power_w),
                        _fmt(r.saving_pct),
                        str(r.bb_nodes),
                        str(r.lp_iterations),
                        _fmt(r.solve_ms),
                        r.status,
                        _fmt(r.objective_w),
                    ]
                )
                + "\n"
            )
        return out.getvalue()
    if fmt == "json":
        import json

        doc = {
            "version": report.version,
            "options": {
                "instructions_per_bit": report.options.instructions_per_bit,
                "cloud_path_energy_per_bit": (
                    report.options.cloud_path_energy_per_bit
                ),
                "cloud_provisioning": report.options.cloud_provisioning,
                "cloud_server_capacity": report.options.cloud_server_capacity,
                "dsrc_medium": report.options.dsrc_medium,
            },
            "rows": [
                {
                    "demand_class": r.demand_class,
                    "request_count": r.request_count,
                    "total_power_w": r.total_power_w,
                    "vehicle_power_w": r.vehicle_power_w,
                    "edge_power_w": r.edge_power_w,
                    "cloud_power_w": r.cloud_power_w,
                    "cloud_mips": r.cloud_mips,
                    "baseline_power_w": r.baseline_power_w,
                    "saving_pct": r.saving_pct,
                    "bb_nodes": r.bb_nodes,
                    "lp_iterations": r.lp_iterations,
                    "solve_ms": r.solve_ms,
                    "status": r.status,
                    "objective_w": r.objective_w,
                }
                for r in rows
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def write_plot_files(report: SweepReport, base: str | Path) -> list[Path]:
    """Per-class data files for gnuplot: power curves and saving curves."""
    base = Path(base)
    written = []
    classes = []
    for row in report.rows:
        if row.demand_class not in classes:
            classes.append(row.demand_class)
    for cls in classes:
        rows = [r for r in report.rows if r.demand_class == cls]
        power = base.with_name(f"{base.stem}_{cls}_power.dat")
        with power.open("w") as fh:
            fh.write("# requests total_power_w baseline_power_w\n")
            for r in rows:
                fh.write(
                    f"{r.request_count} {_fmt(r.total_power_w)} "
                    f"{_fmt(r.baseline_power_w)}\n"
                )
        saving = base.with_name(f"{base.stem}_{cls}_saving.dat")
        with saving.open("w") as fh:
            fh.write("# requests saving_pct\n")
            for r in rows:
                fh.write(f"{r.request_count} {_fmt(r.saving_pct)}\n")
        written.extend([power, saving])
    return written
