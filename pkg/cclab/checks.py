"""The acceptance suite: every property the package promises, measured on its
default fixtures"""
import logging
import math
import time
from typing import Callable, Iterable, NamedTuple

import numpy as np

from . import fixtures, fowler
from ._pool import resolve_threads
from .conformal import (
    Ball,
    bubble,
    constant_profile,
    cyl_to_euclidean,
    cylinder_end_mean_curvature,
    cylinder_factor,
    euclidean_to_cyl,
    mean_curvature_sphere,
    radial_power,
    random_points_in_annulus,
    sech_profile,
    yamabe_residual,
)
from .convexity import PROFILE_MARGIN, scan_balls
from .export import to_json
from .kelvin import Inversion, kelvin_transform
from .logging import IMPORTANT
from .moving_planes import (
    auxiliary_sign_condition,
    auxiliary_weight_laplacian,
    c_lambda_decay_exponent,
    fit_expansion,
    reflect,
)
from .sampling import sphere_directions

LOGGER = logging.getLogger(__name__)


class CheckResult(NamedTuple):
    """One line of the acceptance table"""

    number: int
    name: str
    passed: bool
    measured: str
    threshold: str
    seconds: float


class _Outcome(NamedTuple):
    passed: bool
    measured: str
    threshold: str


_Check = Callable[[bool, int], _Outcome]

CHECKS: dict[int, tuple[str, _Check]] = {}


def _criterion(number: int, name: str) -> Callable[[_Check], _Check]:
    def register(check: _Check) -> _Check:
        CHECKS[number] = (name, check)
        return check

    return register


def _order(error_coarse: float, error_fine: float) -> float:
    return math.log2(error_coarse / error_fine)


@_criterion(1, "Hamiltonian conservation")
def _hamiltonian(quick: bool, threads: int) -> _Outcome:
    periods = 2 if quick else 10
    worst = 0.0
    for n in (3, 4, 5):
        params = fowler.FowlerParams.from_fraction(n, 0.5)
        span = periods * fowler.period(params.epsilon, n)
        trajectory = fowler.integrate(params, 0.0, span)
        worst = max(worst, fowler.hamiltonian_drift(trajectory, relative=True))
    return _Outcome(worst < 1e-8, f"max relative drift {worst:.3g}", "< 1e-8")


@_criterion(2, "Equilibrium fixedness")
def _equilibrium(quick: bool, threads: int) -> _Outcome:
    worst = 0.0
    for n in (3, 4, 5):
        v0 = fowler.equilibrium_v0(n)
        trajectory = fowler.integrate(fowler.FowlerParams(n, v0), 0.0, 10.0 if quick else 50.0)
        worst = max(
            worst,
            float(np.max(np.abs(trajectory.v - v0))),
            float(np.max(np.abs(trajectory.w))),
        )
    return _Outcome(worst < 1e-10, f"max deviation {worst:.3g}", "< 1e-10")


@_criterion(3, "Small-amplitude period limit")
def _period_limit(quick: bool, threads: int) -> _Outcome:
    worst = 0.0
    for n in (3, 4, 6):
        limit = fowler.linearized_period(n)
        value = fowler.period(0.999 * fowler.equilibrium_v0(n), n)
        worst = max(worst, abs(value - limit) / limit)
    return _Outcome(worst < 0.01, f"max relative gap {worst:.3g}", "< 1%")


@_criterion(4, "Exact-solution residuals")
def _exact_residuals(quick: bool, threads: int) -> _Outcome:
    rng = np.random.default_rng(4)
    count = 20 if quick else 100
    worst = 0.0
    orders = []
    for n in (3, 4, 5):
        points = random_points_in_annulus(n, count, 0.2, 5.0, rng)
        for factor in (bubble(n, 1.0), cylinder_factor(n)):
            worst = max(worst, float(np.max(np.abs(yamabe_residual(factor, points)))))
        point = np.full((1, n), 0.3)
        errors = [
            float(
                np.abs(
                    yamabe_residual(
                        bubble(n, 1.0).with_finite_differences(spacing), point
                    )
                )[0]
            )
            for spacing in (1e-2, 5e-3)
        ]
        orders.append(_order(*errors))
    passed = worst < 1e-10 and all(abs(order - 2) <= 0.3 for order in orders)
    return _Outcome(
        passed,
        f"residual {worst:.3g}; FD orders {', '.join(f'{order:.2f}' for order in orders)}",
        "< 1e-10; order 2 +/- 0.3",
    )


@_criterion(5, "Cylinder/Euclidean round trip")
def _round_trip(quick: bool, threads: int) -> _Outcome:
    count = 20 if quick else 100
    worst = 0.0
    for n in (3, 4, 5):
        t = np.linspace(-5.0, 5.0, count)
        direction = sphere_directions(n, 1, np.random.default_rng(n))[0]
        radii = np.exp(-t)
        points = radii[:, None] * direction

        sech = sech_profile(n)
        as_factor = cyl_to_euclidean(sech)
        standard = bubble(n, 1.0)
        worst = max(
            worst,
            float(np.max(np.abs(as_factor.u(points) / standard.u(points) - 1))),
        )
        back = euclidean_to_cyl(standard, direction)
        worst = max(worst, float(np.max(np.abs(back.v(t) / sech.v(t) - 1))))
        reread = euclidean_to_cyl(as_factor, direction)
        worst = max(worst, float(np.max(np.abs(reread.v(t) / sech.v(t) - 1))))
    return _Outcome(worst < 1e-12, f"max relative error {worst:.3g}", "< 1e-12")


@_criterion(6, "Kelvin invariance")
def _kelvin(quick: bool, threads: int) -> _Outcome:
    samples = 20 if quick else 100
    reports = [
        fixtures.kelvin_check(name, n, samples=samples)
        for n in (3, 4)
        for name in fixtures.KELVIN_FIXTURES
    ]
    residual = max(report.max_residual for report in reports)
    fd_residual = max(report.max_fd_residual for report in reports)
    invariance = max(
        report.invariance_error for report in reports if report.invariance_error is not None
    )
    return _Outcome(
        all(report.passed for report in reports),
        f"invariance {invariance:.3g}; residual {residual:.3g} analytic,"
        f" {fd_residual:.3g} FD",
        "< 1e-12; < 1e-10 analytic, < 1e-6 FD",
    )


@_criterion(7, "Boundary mean-curvature coherence")
def _mean_curvature(quick: bool, threads: int) -> _Outcome:
    worst = 0.0
    for n in (3, 4):
        params = fowler.FowlerParams.from_fraction(n, 0.5)
        t0 = fowler.descending_phase(n, params.epsilon)
        instance = fixtures.fowler_fixture(n, 0.5, t0=t0)
        depth = -math.log(instance.singular.exclusion_radius)
        # the same integration build_fowler_instance performs
        profile = fowler.integrate(
            params, t0 - PROFILE_MARGIN, t0 + depth + PROFILE_MARGIN
        ).profile()
        directions = sphere_directions(n, 50)
        for s in (0.0, 0.5, 1.5):
            sphere = Ball(np.zeros(n), math.exp(-s))
            h_sphere = mean_curvature_sphere(
                instance.metric, sphere, sphere.boundary_points(directions)
            )
            h_end = cylinder_end_mean_curvature(profile, t0 + s)
            worst = max(worst, float(np.max(np.abs(h_sphere - h_end))))

    flat = 0.0
    for n in (3, 4, 5):
        unit = Ball(np.zeros(n), 1.0)
        points = unit.boundary_points(sphere_directions(n, 50))
        flat = max(
            flat,
            float(np.max(np.abs(mean_curvature_sphere(cylinder_factor(n), unit, points)))),
            abs(float(cylinder_end_mean_curvature(constant_profile(n), 0.0))),
        )
    return _Outcome(
        worst < 1e-8 and flat < 1e-10,
        f"sphere vs slice {worst:.3g}; cylinder h {flat:.3g}",
        "< 1e-8; 0 +/- 1e-10",
    )


@_criterion(8, "Convexity on Fowler instances")
def _convexity(quick: bool, threads: int) -> _Outcome:
    num_balls, boundary_samples = (40, 30) if quick else (200, 100)
    lowest = math.inf
    for n in (3, 4):
        for fraction in (0.3, 0.7, 1.0):
            instance = fixtures.fowler_fixture(n, fraction)
            report = scan_balls(
                instance, num_balls, boundary_samples, rng_seed=42, threads=threads
            )
            lowest = min(lowest, report.global_min_h)
    return _Outcome(lowest > 0, f"smallest min h {lowest:.6g}", "> 0")


@_criterion(9, "Auxiliary weight identity")
def _auxiliary_weight(quick: bool, threads: int) -> _Outcome:
    worst = 0.0
    orders = []
    for n, mu in ((3, 0.5), (4, 1.0), (5, 1.5)):
        x = np.linspace(0.3, 0.9, n)
        closed_form, _ = auxiliary_weight_laplacian(mu, x, n)
        analytic = float(radial_power(n, 1.0, mu).laplacian(x))
        worst = max(worst, abs(analytic - closed_form) / abs(closed_form))
        errors = [
            abs(auxiliary_weight_laplacian(mu, x, n, spacing)[1] - closed_form)
            for spacing in (1e-2, 5e-3)
        ]
        orders.append(_order(*errors))

    rng = np.random.default_rng(9)
    sign = -math.inf
    for n in (3, 4):
        inversion = Inversion.of(fixtures.inversion_center(n) * 2)
        v = kelvin_transform(inversion, bubble(n, 1.0))
        R0 = 1.0 + float(np.linalg.norm(inversion.center))
        points = random_points_in_annulus(n, 50 if quick else 200, 10 * R0, 100 * R0, rng)
        lam = 0.5
        points = points[points[:, -1] < lam]
        values = auxiliary_sign_condition(v.u(points), v.u(reflect(points, lam)), points, n)
        sign = max(sign, float(np.max(values)))
    passed = worst < 1e-12 and all(abs(order - 2) <= 0.3 for order in orders) and sign < 0
    return _Outcome(
        passed,
        f"closed form {worst:.3g}; FD orders"
        f" {', '.join(f'{order:.2f}' for order in orders)}; max sign {sign:.3g}",
        "< 1e-12; order 2 +/- 0.3; < 0",
    )


@_criterion(10, "Moving planes")
def _moving_planes(quick: bool, threads: int) -> _Outcome:
    scan = fixtures.symmetric_scan(3, grid_cells=8 if quick else 16, threads=threads)
    offset = abs(scan.lambda0 - fixtures.SYMMETRIC_HEIGHT)
    max_w = float(np.max(np.abs(scan.field.w)))

    step = fixtures.reflection_fixture(
        "fowler", 3, grid_cells=12 if quick else 24, threads=threads
    )
    field = step.scan.field
    interior = field.points[:, -1] <= field.lam - 2 * field.spacing
    min_interior = float(np.min(field.w[interior])) if np.any(interior) else math.inf
    exponent = c_lambda_decay_exponent(step.v, step.lambda0, [10.0, 20.0, 40.0, 80.0])
    passed = offset < 1e-3 and max_w < 1e-6 and min_interior > 0 and exponent <= -3.8
    return _Outcome(
        passed,
        f"|lambda0 - {fixtures.SYMMETRIC_HEIGHT}| {offset:.3g}, max |w| {max_w:.3g};"
        f" interior min w {min_interior:.3g}; c decay {exponent:.2f}",
        "< 1e-3, < 1e-6; > 0; <= -3.8",
    )


@_criterion(11, "Far-field expansion")
def _expansion(quick: bool, threads: int) -> _Outcome:
    radii = [10.0, 20.0, 40.0, 80.0]
    exact_a, exact_b = 0.0, 0.0
    slopes = []
    for n in (3, 4):
        fit = fit_expansion(radial_power(n, 1.0, n - 2), radii)
        exact_a = max(exact_a, abs(fit.a - 1))
        exact_b = max(exact_b, float(np.max(np.abs(fit.b))))
        v = kelvin_transform(Inversion.of(fixtures.inversion_center(n)), bubble(n, 1.0))
        slopes.append(fit_expansion(v, radii).remainder_exponent + n)
    passed = exact_a < 1e-10 and exact_b < 1e-10 and all(abs(gap) <= 0.2 for gap in slopes)
    return _Outcome(
        passed,
        f"|a - 1| {exact_a:.3g}, |b| {exact_b:.3g};"
        f" slope + n {', '.join(f'{gap:.3f}' for gap in slopes)}",
        "< 1e-10; +/- 0.2",
    )


@_criterion(12, "Determinism")
def _determinism(quick: bool, threads: int) -> _Outcome:
    instance = fixtures.fowler_fixture(3, 0.5)
    num_balls = 20 if quick else 100
    runs = [
        to_json(scan_balls(instance, num_balls, 20, rng_seed=7, threads=count).to_dict())
        for count in (1, 1, max(threads, 2))
    ]
    identical = len(set(runs)) == 1
    return _Outcome(
        identical,
        "identical" if identical else "reports differ",
        "byte-identical across runs and thread counts",
    )


def run_checks(
    quick: bool = False,
    only: Iterable[int] | None = None,
    threads: int | None = None,
) -> list[CheckResult]:
    """Run the acceptance suite

    Parameters
    ----------
    quick : bool, optional
        Shrink sample sizes and spans (every threshold is kept). Default is
        False.
    only : list of int, optional
        Run only the criteria with these numbers
    threads : int, optional
        Worker threads for the scans. None defers to the environment.

    Returns
    -------
    list of CheckResult
        One result per criterion, in order. A criterion that raises counts
        as failed, with the error as its measurement.

    Raises
    ------
    ValueError
        If an unknown criterion is requested
    """
    threads = resolve_threads(threads)
    numbers = sorted(CHECKS) if only is None else sorted(set(only))
    unknown = [number for number in numbers if number not in CHECKS]
    if unknown:
        raise ValueError(f"Unknown criteria: {', '.join(map(str, unknown))}")

    results = []
    for number in numbers:
        name, check = CHECKS[number]
        LOGGER.info("Checking %d. %s", number, name)
        start = time.perf_counter()
        try:
            outcome = check(quick, threads)
        except (ValueError, ArithmeticError) as breakdown:
            LOGGER.debug("%s raised", name, exc_info=True)
            outcome = _Outcome(False, f"{type(breakdown).__name__}: {breakdown}", "")
        result = CheckResult(number, name, *outcome, time.perf_counter() - start)
        LOGGER.log(
            IMPORTANT if result.passed else logging.WARNING,
            "%2d. %s: %s",
            number,
            name,
            "pass" if result.passed else "FAIL",
        )
        results.append(result)
    return results


def format_table(results: Iterable[CheckResult]) -> str:
    """Render results as a fixed-width pass/fail table"""
    rows = [("#", "criterion", "result", "measured", "target", "time")]
    rows += [
        (
            str(result.number),
            result.name,
            "pass" if result.passed else "FAIL",
            result.measured,
            result.threshold,
            f"{result.seconds:.1f}s",
        )
        for result in results
    ]
    widths = [max(len(row[column]) for row in rows) for column in range(len(rows[0]))]
    return "\n".join(
        "  ".join(entry.ljust(width) for entry, width in zip(row, widths)).rstrip()
        for row in rows
    )
