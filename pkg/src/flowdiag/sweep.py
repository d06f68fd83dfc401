from __future__ import annotations

import itertools
import math
import os
from collections import defaultdict
from typing import Any, Callable

import pandas as pd
from joblib import Parallel, delayed

from .errors import ScenarioError
from .metrics import ChannelReport, ComparisonReport, print_metrics
from .runner import channel_inputs, evaluate_channel, print_report, write_outputs
from .scenario import Scenario

THREADS_ENV = "FLOWDIAG_THREADS"
MONOTONE_SLACK = 1e-12


def sweep_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ScenarioError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ScenarioError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def worker_count(requested: int | None = None) -> int:
    """Workers for a sweep: the request, capped by FLOWDIAG_THREADS when that is set."""
    if requested is not None and requested < 1:
        raise ScenarioError(f"worker count must be a positive integer, got {requested}")
    if THREADS_ENV not in os.environ:
        return requested or 1
    cap = sweep_threads()
    return min(requested, cap) if requested else cap


def expand_grid(s: Scenario) -> list[tuple[tuple[int, ...], Scenario]]:
    """Cartesian product of the array-valued fields, lexicographic in the index tuple."""
    axes = s.sweep_axes()
    if not axes:
        raise ScenarioError("scenario has no array-valued parameter to sweep")
    sizes = [len(s.params[a]) for a in axes]
    for axis, size in zip(axes, sizes):
        if size == 0:
            raise ScenarioError(f"sweep array for '{axis}' is empty", field=axis)
    total = math.prod(sizes)
    if total > s.max_channels:
        raise ScenarioError(f"sweep has {total} channels, more than the cap of {s.max_channels}", field="max_channels")

    grid = []
    for index in itertools.product(*(range(k) for k in sizes)):
        values = {axis: s.params[axis][i] for axis, i in zip(axes, index)}
        grid.append((index, s.with_params(**values)))
    return grid


def _record(channel: ChannelReport, method: str):
    for r in channel.records:
        if r.method == method and r.error is None:
            return r
    return None


def check_fe_cut_agreement(s: Scenario, channels: list[ChannelReport]) -> list[dict[str, Any]]:
    if s.method != "both":
        return []
    worst, bad = 0.0, []
    for ch in channels:
        diff = ch.comparison.get("difference")
        if diff is None:
            continue
        worst = max(worst, abs(diff))
        if abs(diff) >= s.thresholds["fe_vs_cut"]:
            bad.append(list(ch.index))
    return [
        {
            "name": "fe_cut_spectrum_agreement",
            "passed": not bad,
            "detail": f"max |fe - cut| = {worst:.3e}" + (f", failing channels {bad}" if bad else ""),
        }
    ]


def check_fe_shift_monotone(s: Scenario, channels: list[ChannelReport]) -> list[dict[str, Any]]:
    """|V_fe - V0| must not grow with |delta| at fixed omega, m0, v0."""
    groups: dict[tuple, list[tuple[float, float]]] = defaultdict(list)
    for ch in channels:
        record = _record(ch, "fe")
        if record is None:
            continue
        key = (ch.inputs["omega"], ch.inputs["m0"], ch.inputs["v0"])
        groups[key].append((abs(ch.inputs["delta"]), abs(record.numeric - ch.inputs["v0"])))

    violations = []
    for key, points in groups.items():
        points.sort()
        for (d0, shift0), (d1, shift1) in zip(points, points[1:]):
            if d1 > d0 and shift1 > shift0 + MONOTONE_SLACK:
                violations.append({"omega": key[0], "m0": key[1], "delta": [d0, d1]})
    return [
        {
            "name": "fe_shift_monotone_in_abs_delta",
            "passed": not violations,
            "detail": f"{len(groups)} group(s), {len(violations)} violation(s)",
        }
    ]


def check_vertex_ratio(s: Scenario, channels: list[ChannelReport]) -> list[dict[str, Any]]:
    worst = 0.0
    for ch in channels:
        ratio = ch.comparison.get("ratio")
        if ratio is not None:
            worst = max(worst, abs(ratio - ch.comparison["expected_ratio"]))
    return [
        {
            "name": "fe_cut_vertex_ratio",
            "passed": worst < 1e-8,
            "detail": f"max |ratio - 2 b1 b2 / (b1^2 + b2^2)| = {worst:.3e}",
        }
    ]


def get_sweep_checks(model: str) -> list[Callable[[Scenario, list[ChannelReport]], list[dict[str, Any]]]]:
    checks = {
        "quadratic": [check_fe_cut_agreement],
        "eph": [check_fe_shift_monotone],
        "threeboson": [check_vertex_ratio],
    }
    return checks.get(model, [])


def _sweep_trajectory(grid, outcomes) -> pd.DataFrame | None:
    frames = []
    for (index, _), outcome in zip(grid, outcomes):
        if outcome.trajectory is None:
            continue
        df = outcome.trajectory.copy()
        df.insert(0, "channel", "/".join(str(i) for i in index))
        frames.append(df)
    return pd.concat(frames, ignore_index=True) if frames else None


def sweep(s: Scenario, n_jobs: int | None = None) -> ComparisonReport:
    grid = expand_grid(s)
    n_jobs = worker_count(n_jobs)
    print(f"Sweeping {s.model} over {s.sweep_axes()} ({len(grid)} channels, {n_jobs} worker(s))")

    outcomes = Parallel(n_jobs=n_jobs)(delayed(evaluate_channel)(channel) for _, channel in grid)

    channels = [
        ChannelReport(index=index, inputs=channel_inputs(channel), records=o.records, comparison=o.comparison)
        for (index, channel), o in zip(grid, outcomes)
    ]
    checks = [c for check in get_sweep_checks(s.model) for c in check(s, channels)]
    report = ComparisonReport(model=s.model, method=s.method, seed=s.seed, channels=channels, checks=checks)

    print_report(report)
    records = report.records
    print_metrics(
        {
            "channels": len(channels),
            "records": len(records),
            "model_errors": sum(r.error is not None for r in records),
            "above_threshold": sum(bool(r.failed) for r in records),
        },
        "Sweep Summary",
    )
    for check in checks:
        print(f"  {check['name']}: {'PASS' if check['passed'] else 'FAIL'} ({check['detail']})")

    write_outputs(report, s.outputs, trajectory=_sweep_trajectory(grid, outcomes))
    print(f"\nExit status: {report.exit_status}")
    return report
