"""Command-line interface

Exit codes
----------
0 : success
2 : invalid input (bad flags, configuration or parameters) or I/O failure
3 : numerical failure, or a failed check
4 : the instance fails the hypotheses of the convexity theorem
5 : a scanned sphere has nonpositive mean curvature
"""
import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable

import click

from . import __version__, checks, fixtures
from . import export as export_
from . import fowler as fowler_
from ._pool import THREADS_ENVVAR, resolve_threads
from .config import ConfigError, RunConfig
from .convexity import (
    build_bubble_instance,
    build_flat_instance,
    build_fowler_instance,
    scan_balls,
)
from .errors import HypothesisError, InsufficientSpanError
from .logging import IMPORTANT, attach_cli_handler
from .moving_planes import minimum_location_check, sign_condition_radius

LOGGER = logging.getLogger(__package__)

VALIDATION_FAILURE = 2
NUMERIC_FAILURE = 3
HYPOTHESIS_FAILURE = 4
POSITIVITY_FAILURE = 5


@click.group()
@click.help_option("--help", "-h")
@click.version_option(__version__, "--version", "-V")
def cclab():
    """Numerical checks of convexity of balls in singular constant scalar
    curvature metrics.

    \b
    Exit codes:
      0  success
      2  invalid input (bad flags, configuration or parameters) or I/O failure
      3  numerical failure, or a failed check
      4  the instance fails the hypotheses of the convexity theorem
      5  a scanned sphere has nonpositive mean curvature
    """


def _resolve_epsilon(options: dict[str, Any]) -> None:
    """Fold --epsilon / --epsilon-frac into the epsilon and epsilon_unit fields"""
    if "epsilon_frac" not in options:
        return
    absolute, fraction = options.pop("epsilon", None), options.pop("epsilon_frac")
    if absolute is not None and fraction is not None:
        raise ConfigError("Conflicting values given for epsilon: use --epsilon or --epsilon-frac")
    if fraction is not None:
        options.update(epsilon=fraction, epsilon_unit="fraction")
    elif absolute is not None:
        options.update(epsilon=absolute, epsilon_unit="absolute")


def _subcommand_init(command: Callable) -> Callable:
    """Register a subcommand and add some standard CLI handling"""

    @functools.wraps(command)
    def wrapped(
        verbose: int,
        quiet: int,
        config_file: Path | None,
        threads: int | None,
        **options,
    ) -> None:
        cli_handler = attach_cli_handler(LOGGER, verbose - quiet)
        try:
            _resolve_epsilon(options)
            overrides = {key: options.pop(key) for key in list(options) if key in RunConfig._fields}
            config = RunConfig.load(
                config_file,
                command=command.__name__.replace("_", "-"),
                threads=threads,
                **overrides,
            )
            command(config, **options)
        except HypothesisError as not_an_instance:
            LOGGER.error(not_an_instance)
            sys.exit(HYPOTHESIS_FAILURE)
        except (OSError, ValueError) as oh_no:
            LOGGER.error(oh_no)
            sys.exit(VALIDATION_FAILURE)
        except ArithmeticError as breakdown:
            LOGGER.error("Numerical failure: %s", breakdown)
            sys.exit(NUMERIC_FAILURE)
        finally:
            LOGGER.removeHandler(cli_handler)

    wrapped = click.option(
        "--threads",
        type=int,
        envvar=THREADS_ENVVAR,
        help=(
            "The number of worker threads. Defaults to the value of"
            f" {THREADS_ENVVAR} or, failing that, the number of available cores."
            " Results do not depend on this value."
        ),
    )(wrapped)

    wrapped = click.option(
        "--config",
        "config_file",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help=(
            "Read parameters from a flat key = value file."
            " Flags given on the command line take priority."
        ),
    )(wrapped)

    wrapped = click.option(
        "--verbose",
        "-v",
        count=True,
        help="Increase the amount of information that's printed.",
    )(wrapped)

    wrapped = click.option(
        "--quiet",
        "-q",
        count=True,
        help="Decrease the amount of information that's printed.",
    )(wrapped)
    return cclab.command()(wrapped)


def _dimension_option(func: Callable) -> Callable:
    return click.option("--n", "n", type=int, help="The dimension (at least 3).")(func)


def _epsilon_options(func: Callable) -> Callable:
    func = click.option(
        "--epsilon-frac",
        type=float,
        help="The minimum of the Fowler solution as a fraction of v0, in (0, 1].",
    )(func)
    return click.option(
        "--epsilon",
        type=float,
        help="The minimum of the Fowler solution, in (0, v0].",
    )(func)


def _output_options(func: Callable) -> Callable:
    func = click.option(
        "--force", "-f", is_flag=True, help="Overwrite existing output files."
    )(func)
    return click.option(
        "--output",
        "-o",
        type=click.Path(dir_okay=False, path_type=Path),
        help="Where to write the main output.",
    )(func)


def _save_config(config: RunConfig, output: Path, force: bool) -> None:
    """Record the resolved configuration next to an output file"""
    destination = output.with_suffix(".toml")
    if destination == output:
        return
    if destination.exists() and not force:
        raise FileExistsError(f"{destination} already exists")
    config._replace(output=output).write(destination)


def _emit(report: dict[str, Any], output: Path | None, force: bool) -> None:
    """Write a JSON report to file, or to stdout if no file is given"""
    if output is None:
        click.echo(export_.to_json(report))
    else:
        export_.write_json(report, output, overwrite=force)


@click.option("--t-max", type=float, help="The end of the integration window.")
@click.option("--step", type=float, help="The Runge-Kutta step.")
@_output_options
@_epsilon_options
@_dimension_option
@_subcommand_init
def fowler(config: RunConfig, force: bool):
    """Integrate a Fowler solution and export its trajectory as CSV (t, v, w, H).
    A summary with the period and the extreme values of v is printed as JSON."""
    n, epsilon, step = config.n, config.epsilon_absolute, config.step
    params = fowler_.FowlerParams(n, epsilon)
    trajectory = fowler_.integrate(params, 0.0, config.t_max, step)

    output = config.output or Path(
        export_.generate_output_name("fowler", {"n": n, "epsilon": epsilon})
    )
    export_.write_trajectory(trajectory, output, overwrite=force)
    _save_config(config, output, force)

    period = None if params.is_equilibrium else fowler_.period(epsilon, n, step)
    try:
        extrema: fowler_.OrbitExtrema | None = fowler_.orbit_extrema(trajectory)
    except InsufficientSpanError as too_short:
        LOGGER.warning("Extrema not reported: %s", too_short)
        extrema = None
    if period is not None:
        LOGGER.log(IMPORTANT, "Period: %.12g", period)
    click.echo(
        export_.to_json(
            {
                "n": n,
                "epsilon": epsilon,
                "v0": fowler_.equilibrium_v0(n),
                "H": fowler_.hamiltonian((epsilon, 0.0), n),
                "period": period,
                "linearized_period": fowler_.linearized_period(n),
                "v_min": None if extrema is None else extrema.v_min,
                "v_max": None if extrema is None else extrema.v_max,
                "hamiltonian_drift": fowler_.hamiltonian_drift(trajectory),
                "output": str(output),
            }
        )
    )


def _parse_fractions(
    ctx: click.Context, param: click.Parameter, value: str | None
) -> tuple[float, ...] | None:
    if value is None:
        return None
    try:
        return tuple(float(entry) for entry in value.split(",") if entry.strip())
    except ValueError as not_a_number:
        raise click.BadParameter(f"{value!r} is not a comma-separated list of numbers") from not_a_number


@click.option(
    "--fractions",
    callback=_parse_fractions,
    metavar="F1,F2,...",
    help="Comma-separated values of epsilon / v0, each in (0, 1].",
)
@click.option("--step", type=float, help="The Runge-Kutta step.")
@_output_options
@_dimension_option
@_subcommand_init
def period_table(config: RunConfig, force: bool):
    """Tabulate the Fowler period over a grid of epsilon / v0 and export it as
    CSV (fraction, epsilon, period). The equilibrium has no period and is
    recorded as an empty entry."""
    rows = fowler_.period_table(config.n, config.fractions, config.step)
    output = config.output or Path(
        export_.generate_output_name("period-table", {"n": config.n})
    )
    export_.write_period_table(rows, output, overwrite=force)
    _save_config(config, output, force)
    click.echo(export_.to_json({"n": config.n, "rows": [row._asdict() for row in rows]}))


@click.option(
    "--csv",
    "csv_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also export one row per ball to this CSV file.",
)
@click.option(
    "--override",
    is_flag=True,
    default=None,
    help="Scan even if the instance fails the hypotheses of the theorem.",
)
@click.option("--seed", type=int, help="The seed for the ball and point samples.")
@click.option("--boundary-samples", type=int, help="Points sampled on each sphere.")
@click.option("--num-balls", type=int, help="The number of balls to scan.")
@click.option("--exclusion-radius", type=float, help="The radius excluded around 0.")
@click.option(
    "--t0",
    type=float,
    help="The cylinder time that becomes the unit sphere (default: mid-descent).",
)
@click.option(
    "--instance",
    type=click.Choice(("fowler", "bubble", "flat")),
    help="The instance to scan (default: fowler).",
)
@_output_options
@_epsilon_options
@_dimension_option
@_subcommand_init
def scan(config: RunConfig, force: bool, csv_path: Path | None):
    """Sample balls inside an instance and report the smallest mean curvature
    of their boundaries, as JSON.

    Exits with 4 if the instance fails the hypotheses of the theorem (with
    --override, after writing the report) and with 5 if any sampled sphere
    has nonpositive mean curvature."""
    n = config.n
    if config.instance == "fowler":
        epsilon = config.epsilon_absolute
        t0 = config.t0
        if t0 is None:
            t0 = fowler_.descending_phase(n, epsilon, step=config.step)
        instance = build_fowler_instance(
            n,
            epsilon,
            t0,
            exclusion_radius=config.exclusion_radius,
            step=config.step,
            override=config.override,
        )
    elif config.instance == "bubble":
        instance = build_bubble_instance(n)
    else:
        instance = build_flat_instance(n)

    report = scan_balls(
        instance,
        config.num_balls,
        config.boundary_samples,
        rng_seed=config.seed,
        override=config.override,
        threads=resolve_threads(config.threads),
    )
    _emit(report.to_dict(), config.output, force)
    if config.output is not None:
        _save_config(config, config.output, force)
    if csv_path is not None:
        export_.write_scan_rows(report, csv_path, overwrite=force)
    if not report.hypotheses_verified:
        LOGGER.error("The instance fails the hypotheses of the theorem (overridden)")
        sys.exit(HYPOTHESIS_FAILURE)
    if not report.global_min_h > 0:
        LOGGER.error(
            "A sphere with nonpositive mean curvature was found (min h = %.9g)",
            report.global_min_h,
        )
        sys.exit(POSITIVITY_FAILURE)


@click.option(
    "--field-csv",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Also export the reflection difference at the critical height (x1..xn, w).",
)
@click.option("--tolerance", type=float, help="The tolerance on the critical height.")
@click.option("--grid-cells", type=int, help="Grid cells per half-width.")
@click.option(
    "--fixture",
    type=click.Choice(("symmetric", "bubble", "fowler")),
    help=(
        "symmetric: a bubble symmetric about a known plane; bubble: one reflection"
        " step on a spherical cap; fowler: one reflection step on a Fowler instance"
        " (default)."
    ),
)
@_output_options
@click.option(
    "--epsilon-frac",
    type=float,
    help="The minimum of the Fowler solution as a fraction of v0, in (0, 1].",
)
@_dimension_option
@_subcommand_init
def moving_planes(config: RunConfig, force: bool, field_csv: Path | None):
    """Locate the critical height of the moving-plane method on a fixture and
    report the lambda scan as JSON, along with where w and w / |x|^(-mu) reach
    their negative minima just below the critical height."""
    n, threads = config.n, resolve_threads(config.threads)
    if config.fixture == "symmetric":
        scan_report = fixtures.symmetric_scan(
            n, grid_cells=config.grid_cells, tol=config.tolerance or 1e-8, threads=threads
        )
        report = {"expected_lambda0": fixtures.SYMMETRIC_HEIGHT, **scan_report.to_dict()}
    else:
        step = fixtures.reflection_fixture(
            config.fixture,
            n,
            grid_cells=config.grid_cells,
            tol=config.tolerance or (1e-4 if config.fixture == "fowler" else 1e-8),
            fraction=config.epsilon_absolute / fowler_.equilibrium_v0(n),
            threads=threads,
        )
        scan_report = step.scan
        expected = fixtures.cap_reflection_height(n) if config.fixture == "bubble" else None
        report = {"expected_lambda0": expected, **step.to_dict()}
    if scan_report.below is not None:
        bound = max(sign_condition_radius(scan_report.below), scan_report.enclosing_radius)
        report["minimum_location"] = {
            "R0": bound,
            **minimum_location_check(scan_report.below, bound)._asdict(),
        }
    report.update(fixture=config.fixture, n=n)
    _emit(report, config.output, force)
    if field_csv is not None:
        export_.write_reflection_field(scan_report.field, field_csv, overwrite=force)


@click.option("--samples", type=int, default=100, show_default=True, help="Sample points.")
@click.option("--seed", type=int, help="The seed for the sample points.")
@click.option(
    "--fixture",
    type=click.Choice(fixtures.KELVIN_FIXTURES),
    help="The factor to transform (default: fowler).",
)
@_output_options
@_dimension_option
@_subcommand_init
def kelvin_check(config: RunConfig, force: bool, samples: int):
    """Kelvin-transform a fixture and report how well the image solves the
    constant scalar curvature equation, as JSON.

    Exits with 3 if a residual exceeds its tolerance (1e-10 with analytic
    derivatives, 1e-6 with finite differences)."""
    report = fixtures.kelvin_check(config.fixture, config.n, samples=samples, seed=config.seed)
    _emit(report.to_dict(), config.output, force)
    if not report.passed:
        LOGGER.error("The Kelvin transform of %s failed its residual check", config.fixture)
        sys.exit(NUMERIC_FAILURE)


@click.option(
    "--only",
    type=int,
    multiple=True,
    help="Run only this criterion (may be given more than once).",
)
@click.option(
    "--quick",
    is_flag=True,
    help="Shrink sample sizes and spans. Every threshold is kept.",
)
@_subcommand_init
def check_all(config: RunConfig, quick: bool, only: tuple[int, ...]):
    """Run the acceptance suite and print a pass/fail table. Exits with 3 if
    any criterion fails."""
    results = checks.run_checks(quick, only or None, config.threads)
    click.echo(checks.format_table(results))
    if not all(result.passed for result in results):
        sys.exit(NUMERIC_FAILURE)


@click.argument(
    "pytest_args",
    nargs=-1,
)
@cclab.command(context_settings={"ignore_unknown_options": True})
def test(pytest_args: tuple[str, ...]):  # pragma: no cover
    """Run the cclab test suite to ensure that it is running correctly on your
    system. Requires you to have installed cclab with the test extra
    (_i.e._ `pip install cclab[test]`)."""
    import pytest

    sys.exit(pytest.main(["--pyargs", "cclab.test", *pytest_args]))
