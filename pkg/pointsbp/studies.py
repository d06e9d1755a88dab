"""Study harnesses producing per-sample rows and rate summaries."""
from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from . import SbpBuild, SbpBuilder, sampler_from_config
from .advection import (
    exp_solution,
    h_nominal,
    solve_steady,
    solve_unsteady,
    steady_exp_system,
    vortex_exact,
    vortex_initial,
    vortex_system,
)
from .const import (
    CONF_DEGREE,
    CONF_DEGREES,
    CONF_FINAL_TIME,
    CONF_GEOMETRY,
    CONF_KIND,
    CONF_REGIMES,
    CONF_RESOLUTION,
    CONF_RESOLUTIONS,
    CONF_SAMPLES,
    CONF_SEEDS,
    CONF_STUDY,
    GEOMETRY_ANNULUS,
    GEOMETRY_CONIC,
    STATUS_FAILED,
    STATUS_FEASIBLE,
    STATUS_INFEASIBLE,
    STATUS_UNDETERMINED,
    STUDY_QUAD_ACCURACY,
    STUDY_STEADY,
    STUDY_SUCCESS_RATE,
    STUDY_TIMING,
    STUDY_UNSTEADY,
    STUDY_WEIGHTS,
    TIMING_KEYS,
    TIMING_SYSTEM,
)
from .exceptions import ConfigError, PointSbpError
from .geometry import (
    INTEGRAL_FOR_GEOMETRY,
    exact_integrals,
    integrand,
    make_rng,
    random_conic_params,
)
from .normlp import norm_tolerances, solve_norm

_LOGGER = logging.getLogger(__name__)

SAMPLE_COLUMNS = ["geometry", "seed", "p", "resolution", "N", "h", "status"]
SUCCESS_COLUMNS = [
    "tau_regime",
    "p",
    "n_x",
    "feasible_pct",
    "infeasible_pct",
    "undetermined_pct",
    "failed_pct",
    "total",
]


@dataclass
class StudyResult:
    """Rows, summary rows and column orders of one study."""

    name: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    summary_columns: list[str] = field(default_factory=list)
    summary: list[dict[str, Any]] = field(default_factory=list)
    extra: dict[str, tuple[list[str], list[dict[str, Any]]]] = field(default_factory=dict)


def resolution_key(resolution: int | tuple[int, int] | list[int]) -> tuple[int, ...]:
    """Sortable form of a resolution."""
    if isinstance(resolution, (list, tuple)):
        return tuple(int(r) for r in resolution)
    return (int(resolution),)


def sort_rows(rows: list[dict[str, Any]], *extra: str) -> list[dict[str, Any]]:
    """Canonical row order: degree, resolution, seed, then extra keys."""

    def key(row: dict[str, Any]):
        return (
            row.get("p", 0),
            resolution_key(row.get("resolution", 0)),
            row.get("seed", 0),
            *(row.get(name, "") for name in extra),
        )

    return sorted(rows, key=key)


def convergence_rates(
    rows: list[dict[str, Any]], value: str, group: tuple[str, ...] = ("p",)
) -> list[dict[str, Any]]:
    """Least-squares slope of log value against log h between consecutive resolutions."""
    groups: dict[tuple, dict[tuple, list[tuple[float, float]]]] = {}
    for row in rows:
        err, h = row.get(value), row.get("h")
        if err is None or h is None or not (err > 0 and h > 0 and np.isfinite(err)):
            continue
        gkey = tuple(row[g] for g in group)
        groups.setdefault(gkey, {}).setdefault(resolution_key(row["resolution"]), []).append(
            (np.log(h), np.log(err))
        )
    summary = []
    for gkey in sorted(groups):
        by_res = groups[gkey]
        ordered = sorted(by_res, key=lambda r: -np.mean([s[0] for s in by_res[r]]))
        for coarse, fine in zip(ordered, ordered[1:]):
            samples = np.array(by_res[coarse] + by_res[fine])
            if np.ptp(samples[:, 0]) == 0.0:
                continue
            slope = np.polyfit(samples[:, 0], samples[:, 1], 1)[0]
            entry = dict(zip(group, gkey))
            entry.update(
                {
                    "coarse": list(coarse) if len(coarse) > 1 else coarse[0],
                    "fine": list(fine) if len(fine) > 1 else fine[0],
                    "slope": float(slope),
                }
            )
            summary.append(entry)
    return summary


def _degrees(config: dict) -> list[int]:
    return list(config[CONF_DEGREES]) or [config[CONF_DEGREE]]


def _resolutions(config: dict) -> list:
    return list(config[CONF_RESOLUTIONS]) or [config[CONF_GEOMETRY][CONF_RESOLUTION]]


def _base_row(config: dict, seed: int, p: int, resolution) -> dict[str, Any]:
    return {
        "geometry": config[CONF_GEOMETRY][CONF_KIND],
        "seed": seed,
        "p": p,
        "resolution": resolution,
    }


def _sweep(
    config: dict,
    measure: Callable[[SbpBuild, dict[str, Any]], None],
    require_feasible: bool = True,
) -> list[dict[str, Any]]:
    """Build every (p, resolution, seed) sample and let measure fill the row."""
    rows = []
    for p in _degrees(config):
        builder = SbpBuilder.from_config(config, p=p)
        for resolution in _resolutions(config):
            for seed in config[CONF_SEEDS]:
                row = _base_row(config, seed, p, resolution)
                sampler = sampler_from_config(config[CONF_GEOMETRY], seed, resolution)
                try:
                    build = builder.build_sampled(sampler)
                    row.update(
                        {"N": len(build.nodes), "h": h_nominal(build.ops.m), "status": build.status}
                    )
                    if build.feasible or not require_feasible:
                        measure(build, row)
                except PointSbpError as err:
                    _LOGGER.warning("Sample %s failed: %s", row, err)
                    row.update({"status": STATUS_FAILED, "message": str(err)})
                rows.append(row)
    return sort_rows(rows)


def quad_accuracy(config: dict) -> StudyResult:
    """Integration error of m^T f against the exact integral."""
    kind = config[CONF_GEOMETRY][CONF_KIND]
    try:
        integral = INTEGRAL_FOR_GEOMETRY[kind]
    except KeyError as err:
        raise ConfigError(f"No quadrature integrand for geometry {kind!r}") from err
    exact = exact_integrals(integral)

    def measure(build: SbpBuild, row: dict[str, Any]) -> None:
        value = float(build.ops.m @ integrand(integral, build.nodes.coords))
        row.update({"integral": value, "error": abs(value - exact)})

    rows = _sweep(config, measure)
    columns = SAMPLE_COLUMNS + ["integral", "error", "message"]
    summary = convergence_rates(rows, "error")
    return StudyResult(STUDY_QUAD_ACCURACY, columns, rows, ["p", "coarse", "fine", "slope"], summary)


def steady(config: dict) -> StudyResult:
    """Manufactured exp(x + y) with velocity [1, 1]."""

    def measure(build: SbpBuild, row: dict[str, Any]) -> None:
        system = steady_exp_system(build.ops, build.nodes.coords, build.diss)
        _, report = solve_steady(system, exp_solution)
        row.update({"l2_error": report.l2_error, "seconds": report.timings[TIMING_SYSTEM]})

    rows = _sweep(config, measure)
    columns = SAMPLE_COLUMNS + ["l2_error", "message"]
    summary = convergence_rates(rows, "l2_error")
    return StudyResult(STUDY_STEADY, columns, rows, ["p", "coarse", "fine", "slope"], summary)


def unsteady(config: dict) -> StudyResult:
    """Vortex transport with and without dissipation, with energy traces."""
    if config[CONF_GEOMETRY][CONF_KIND] != GEOMETRY_ANNULUS:
        raise ConfigError("The unsteady study runs on the annulus")
    final_time = config[CONF_FINAL_TIME]
    traces: list[dict[str, Any]] = []
    rows: list[dict[str, Any]] = []

    def measure(build: SbpBuild, row: dict[str, Any]) -> None:
        coords = build.nodes.coords
        for label, diss in (("off", None), ("on", build.diss)):
            system = vortex_system(build.ops, coords, diss)
            _, report = solve_unsteady(system, vortex_initial(coords), final_time, vortex_exact)
            rates = np.array([rate for _, rate in report.energy_trace] or [0.0])
            entry = dict(row)
            entry.update(
                {
                    "dissipation": label,
                    "l2_error": report.l2_error,
                    "max_abs_rate": float(np.abs(rates).max()),
                    "max_rate": float(rates.max()),
                    "energy0": report.energies[0],
                    "steps": report.steps,
                    "dt": report.dt,
                }
            )
            rows.append(entry)
            for step, ((t, rate), energy) in enumerate(zip(report.energy_trace, report.energies)):
                traces.append(
                    {
                        **_base_row(config, row["seed"], row["p"], row["resolution"]),
                        "dissipation": label,
                        "step": step,
                        "t": t,
                        "rate": rate,
                        "energy": energy,
                    }
                )

    for row in _sweep(config, measure):
        if row.get("status") != STATUS_FEASIBLE:
            rows.append(row)
    columns = SAMPLE_COLUMNS + [
        "dissipation",
        "l2_error",
        "max_abs_rate",
        "max_rate",
        "energy0",
        "steps",
        "dt",
        "message",
    ]
    trace_columns = ["geometry", "seed", "p", "resolution", "dissipation", "step", "t", "rate", "energy"]
    return StudyResult(
        STUDY_UNSTEADY,
        columns,
        sort_rows(rows, "dissipation"),
        extra={"energy": (trace_columns, sort_rows(traces, "dissipation", "step"))},
    )


def success_rate(config: dict) -> StudyResult:
    """Fraction of random conic geometries whose norm problem is feasible."""
    geometry = config[CONF_GEOMETRY]
    if geometry[CONF_KIND] != GEOMETRY_CONIC:
        raise ConfigError("The success-rate study runs on conic geometries")
    regimes = list(config[CONF_REGIMES])
    rows = []
    for seed in config[CONF_SEEDS]:
        rng = make_rng(seed)
        shapes = [random_conic_params(rng) for _ in range(config[CONF_SAMPLES])]
        for p in _degrees(config):
            builder = SbpBuilder.from_config(config, p=p, tau=regimes[0])
            for resolution in _resolutions(config):
                for index, params in enumerate(shapes):
                    base = _base_row(config, seed, p, resolution)
                    base["sample"] = index
                    sampler = replace(
                        sampler_from_config(geometry, seed * 100003 + index, resolution),
                        params=params,
                    )
                    try:
                        build = builder.build_sampled(sampler)
                    except PointSbpError as err:
                        _LOGGER.warning("Conic sample %s failed: %s", index, err)
                        rows.extend(
                            {**base, "regime": r, "status": STATUS_FAILED, "message": str(err)}
                            for r in regimes
                        )
                        continue
                    for regime in regimes:
                        if regime == regimes[0]:
                            status = build.status
                        else:
                            tau = norm_tolerances(build.nodes, regime)
                            status = solve_norm(replace(build.problem, tau=tau)).status
                        rows.append(
                            {**base, "regime": regime, "N": len(build.nodes), "status": status}
                        )
    rows = sort_rows(rows, "regime", "sample")
    summary = []
    counts: dict[tuple, Counter] = {}
    for row in rows:
        key = (row["regime"], row["p"], resolution_key(row["resolution"]))
        counts.setdefault(key, Counter())[row["status"]] += 1
    for (regime, p, res), tally in sorted(counts.items()):
        total = sum(tally.values())
        entry = {
            "tau_regime": regime,
            "p": p,
            "n_x": res[0] if len(res) == 1 else list(res),
            "total": total,
        }
        for status in (STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_UNDETERMINED, STATUS_FAILED):
            entry[f"{status}_pct"] = 100.0 * tally[status] / total
        summary.append(entry)
    columns = ["geometry", "seed", "sample", "p", "resolution", "regime", "N", "status", "message"]
    return StudyResult(
        STUDY_SUCCESS_RATE,
        columns,
        rows,
        SUCCESS_COLUMNS,
        summary,
    )


def timing(config: dict) -> StudyResult:
    """Per-component seconds, with the steady solve as the system time."""

    def measure(build: SbpBuild, row: dict[str, Any]) -> None:
        start = time.perf_counter()
        system = steady_exp_system(build.ops, build.nodes.coords, build.diss)
        solve_steady(system)
        row.update(build.timings)
        row[TIMING_SYSTEM] = time.perf_counter() - start

    rows = _sweep(config, measure)
    return StudyResult(STUDY_TIMING, SAMPLE_COLUMNS + list(TIMING_KEYS) + ["message"], rows)


def weights(config: dict) -> StudyResult:
    """Weights before and after the norm problem, node by node."""
    nodes_rows: list[dict[str, Any]] = []

    def measure(build: SbpBuild, row: dict[str, Any]) -> None:
        m_min = build.problem.m_min
        row.update(
            {
                "negative_before": int(np.count_nonzero(m_min < 0)),
                "negative_after": int(np.count_nonzero(build.ops.m < 0)),
                "min_before": float(m_min.min()),
                "min_after": float(build.ops.m.min()),
            }
        )
        for i, (before, after) in enumerate(zip(m_min, build.ops.m)):
            nodes_rows.append(
                {
                    **_base_row(config, row["seed"], row["p"], row["resolution"]),
                    "i": i,
                    "m_min": before,
                    "m": after,
                }
            )

    rows = _sweep(config, measure, require_feasible=False)
    columns = SAMPLE_COLUMNS + [
        "negative_before",
        "negative_after",
        "min_before",
        "min_after",
        "message",
    ]
    node_columns = ["geometry", "seed", "p", "resolution", "i", "m_min", "m"]
    return StudyResult(
        STUDY_WEIGHTS, columns, rows, extra={"nodes": (node_columns, sort_rows(nodes_rows, "i"))}
    )


STUDY_RUNNERS: dict[str, Callable[[dict], StudyResult]] = {
    STUDY_QUAD_ACCURACY: quad_accuracy,
    STUDY_STEADY: steady,
    STUDY_UNSTEADY: unsteady,
    STUDY_SUCCESS_RATE: success_rate,
    STUDY_TIMING: timing,
    STUDY_WEIGHTS: weights,
}


def run_study(config: dict) -> StudyResult:
    """Dispatch on the configured study."""
    name = config[CONF_STUDY]
    try:
        runner = STUDY_RUNNERS[name]
    except KeyError as err:
        raise ConfigError(f"Study {name!r} has no harness") from err
    _LOGGER.info("Running study %s", name)
    return runner(config)
