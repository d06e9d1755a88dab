"""Command line for building operators and running studies."""
from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Callable, Sequence

import voluptuous as vol

from . import SbpBuilder, parse_config, sampler_from_config
from .const import (
    CONF_GEOMETRY,
    CONF_OUTPUT,
    CONF_SEEDS,
    CONF_STUDY,
    CONF_THREADS,
    DOMAIN,
    EXIT_FAILURE,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_UNDETERMINED,
    EXIT_USAGE,
    STATUS_FEASIBLE,
    STATUS_INFEASIBLE,
    STUDIES,
    STUDY_BUILD,
)
from .exceptions import ConfigError, PointSbpError
from .export import write_csv, write_json, write_mesh, write_operators
from .studies import StudyResult, run_study

_LOGGER = logging.getLogger(__name__)

Handler = Callable[[dict, argparse.Namespace], int]


def seed_list(value: str) -> list[int]:
    """Parse a comma separated seed list; an empty string gives no seeds."""
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"Invalid seed list {value!r}") from err


def load_config(args: argparse.Namespace) -> dict:
    """Read the JSON document and apply command-line overrides."""
    try:
        data: dict[str, Any] = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"Cannot read config {args.config}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"Config {args.config} is not a JSON object")
    if args.out is not None:
        data[CONF_OUTPUT] = args.out
    if args.threads is not None:
        data[CONF_THREADS] = args.threads
    if args.seed is not None:
        data[CONF_SEEDS] = args.seed
    if getattr(args, "study", None) is not None:
        data[CONF_STUDY] = args.study
    return parse_config(data)


def _status_code(status: str) -> int:
    if status == STATUS_FEASIBLE:
        return EXIT_OK
    if status == STATUS_INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_UNDETERMINED


def cmd_build(config: dict, args: argparse.Namespace | None = None) -> int:
    """Build operators per seed and write them with their reports."""
    out = Path(config[CONF_OUTPUT])
    seeds = config[CONF_SEEDS]
    builder = SbpBuilder.from_config(config)
    code = EXIT_OK
    for seed in seeds:
        target = out if len(seeds) == 1 else out / f"seed-{seed}"
        build = builder.build_sampled(sampler_from_config(config[CONF_GEOMETRY], seed))
        write_operators(build, target)
        write_json(target / "report.json", build.report())
        write_json(target / "timings.json", build.timings)
        if args is not None and getattr(args, "dump_mesh", False):
            write_mesh(target / "mesh.json", build.mesh)
        _LOGGER.info("Wrote seed %s to %s (%s)", seed, target, build.status)
        code = max(code, _status_code(build.status))
    return code


def write_study(result: StudyResult, out: Path) -> list[Path]:
    """Write the rows, the summary and any extra tables of a study."""
    paths = [write_csv(out / f"{result.name}.csv", result.rows, result.columns)]
    if result.summary:
        paths.append(
            write_csv(out / f"{result.name}-summary.csv", result.summary, result.summary_columns)
        )
    for suffix, (columns, rows) in sorted(result.extra.items()):
        paths.append(write_csv(out / f"{result.name}-{suffix}.csv", rows, columns))
    return paths


def cmd_study(config: dict, args: argparse.Namespace | None = None) -> int:
    """Run the configured study and write its tables."""
    if config[CONF_STUDY] == STUDY_BUILD:
        return cmd_build(config, args)
    result = run_study(config)
    for path in write_study(result, Path(config[CONF_OUTPUT])):
        _LOGGER.info("Wrote %s", path)
    return EXIT_OK


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="JSON run document")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--threads", type=int, help="Worker threads for per-cell work")
    parser.add_argument("--seed", type=seed_list, help="Comma separated seeds")


def register_commands(subparsers) -> None:
    """Register the build and study commands."""
    build = subparsers.add_parser("build", help="Construct operators and write them")
    _common(build)
    build.add_argument("--dump-mesh", action="store_true", help="Also write mesh.json")
    build.set_defaults(handler=cmd_build)

    study = subparsers.add_parser("study", help="Run a study harness")
    _common(study)
    study.add_argument("--study", choices=STUDIES, help="Override the study kind")
    study.set_defaults(handler=cmd_study)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with both commands."""
    parser = argparse.ArgumentParser(prog=DOMAIN, description=__doc__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="More logging (-v info, -vv debug)"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code else EXIT_OK
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    handler: Handler = args.handler
    try:
        config = load_config(args)
        return handler(config, args)
    except (ConfigError, vol.Invalid) as err:
        _LOGGER.error("%s", err)
        return EXIT_USAGE
    except PointSbpError as err:
        _LOGGER.error("Failed: %s", err)
        return EXIT_FAILURE
    except Exception:  # noqa: BLE001
        _LOGGER.exception("Unexpected error")
        return EXIT_FAILURE
