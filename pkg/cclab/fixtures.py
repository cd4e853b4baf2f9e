"""Named fixtures with known answers, shared by the CLI and the checks"""
import logging
from typing import Any, NamedTuple

import numpy as np

from . import fowler
from .conformal import (
    Ball,
    ConformalFactor,
    SingularSet,
    bubble,
    cylinder_factor,
    random_points_in_annulus,
    yamabe_residual,
)
from .convexity import (
    ReflectedBallStep,
    TheoremInstance,
    build_bubble_instance,
    build_fowler_instance,
    reflected_ball_step,
)
from .errors import DomainError
from .kelvin import (
    Inversion,
    invert_ball,
    invert_point,
    kelvin_bubble_parameters,
    kelvin_transform,
    normalize_frame,
)
from .moving_planes import GridSpec, HalfSpaceDomain, LambdaScan, scan_lambda

LOGGER = logging.getLogger(__name__)

KELVIN_FIXTURES = ("bubble", "cylinder", "fowler")

# the bubble whose reflection is symmetric about x^n = SYMMETRIC_HEIGHT
SYMMETRIC_HEIGHT = 0.3

# the concentrated bubble used for the spherical-cap reflection step
CAP_BUBBLE_SCALE = 0.1

ANALYTIC_RESIDUAL_TOLERANCE = 1e-10
FD_RESIDUAL_TOLERANCE = 1e-6
INVARIANCE_TOLERANCE = 1e-12

# sample points stay this far from the inversion center, so their images stay
# within 1 / MIN_CENTER_DISTANCE of it
MIN_CENTER_DISTANCE = 0.5


def inversion_center(n: int, fixture: str | None = None) -> np.ndarray:
    """The inversion center used by the Kelvin fixtures

    This is (1/2, 0, ..., 0), except for the Fowler fixture, which is inverted
    about (1, 0, ..., 0) on the boundary of its unit ball.
    """
    center = np.zeros(n)
    center[0] = 1.0 if fixture == "fowler" else 0.5
    return center


def fowler_fixture(
    n: int,
    fraction: float = 0.5,
    t0: float | None = None,
    exclusion_radius: float = 1e-3,
    step: float = fowler.DEFAULT_STEP,
    override: bool = False,
    boundary_samples: int = 64,
) -> TheoremInstance:
    """A Fowler instance with epsilon = fraction * v0, cut mid-descent unless
    t0 is given"""
    epsilon = fraction * fowler.equilibrium_v0(n)
    if t0 is None:
        t0 = fowler.descending_phase(n, epsilon, step=step)
    return build_fowler_instance(
        n,
        epsilon,
        t0,
        exclusion_radius=exclusion_radius,
        step=step,
        override=override,
        boundary_samples=boundary_samples,
    )


def kelvin_fixture(name: str, n: int, fraction: float = 0.5) -> ConformalFactor:
    """The factor behind a named Kelvin fixture

    Parameters
    ----------
    name : str
        "bubble" (a bubble of scale 1 centered at (0.2, 0, ..., 0)),
        "cylinder" (v0 |x|^((2-n)/2)) or "fowler" (a Fowler instance
        on the unit ball)
    n : int
        The dimension
    fraction : float, optional
        epsilon / v0 for the Fowler fixture

    Raises
    ------
    DomainError
        If the name is not recognized
    """
    if name == "bubble":
        center = np.zeros(n)
        center[0] = 0.2
        return bubble(n, 1.0, center)
    if name == "cylinder":
        return cylinder_factor(n)
    if name == "fowler":
        return fowler_fixture(n, fraction).factor
    raise DomainError(
        f"Unknown Kelvin fixture {name!r} (choose from {', '.join(KELVIN_FIXTURES)})"
    )


def _fixture_points(
    name: str, factor: ConformalFactor, inversion: Inversion, count: int, rng
) -> np.ndarray:
    n = factor.n
    if name == "fowler":
        # clear of the image hyperplane by more than a stencil step
        points = random_points_in_annulus(n, 4 * count, 2e-3, 0.9, rng)
    else:
        points = random_points_in_annulus(n, 4 * count, 0.05, 10.0, rng)
    keep = factor.domain.contains(points) & (
        np.linalg.norm(points - inversion.center, axis=1) > MIN_CENTER_DISTANCE
    )
    return points[keep][:count]


def _nonlinear_term(factor: ConformalFactor, points: np.ndarray) -> np.ndarray:
    n = factor.n
    return n * (n - 2) / 4 * factor.u(points) ** ((n + 2) / (n - 2))


def relative_residual(factor: ConformalFactor, points: np.ndarray) -> np.ndarray:
    """|Delta u + c u^p| / (c u^p), with c = n(n-2)/4 and p = (n+2)/(n-2)"""
    return np.abs(yamabe_residual(factor, points)) / _nonlinear_term(factor, points)


def extrapolated_fd_residual(
    factor: ConformalFactor, points: np.ndarray, spacing: float
) -> np.ndarray:
    """The relative residual with the Laplacian taken from central differences
    alone

    Parameters
    ----------
    factor : ConformalFactor
        The factor u. Only its values are used.
    points : (m, n) array
        The points to evaluate
    spacing : float
        The relative stencil spacing h

    Returns
    -------
    ndarray
        |L + c u^p| / (c u^p), where L = (4 L(h/2) - L(h)) / 3 combines the
        central-difference Laplacians at h and h/2. Their h^2 errors cancel,
        leaving an error of order h^4.
    """
    coarse = factor.with_finite_differences(spacing).laplacian(points)
    fine = factor.with_finite_differences(spacing / 2).laplacian(points)
    nonlinear = _nonlinear_term(factor, points)
    return np.abs((4 * fine - coarse) / 3 + nonlinear) / nonlinear


class KelvinReport(NamedTuple):
    """The outcome of a Kelvin-transform check on a named fixture"""

    fixture: str
    n: int
    inversion_center: list[float]
    scale: float
    samples: int
    max_residual: float
    max_fd_residual: float
    fd_spacing: float
    invariance_error: float | None

    @property
    def passed(self) -> bool:
        return (
            self.max_residual < ANALYTIC_RESIDUAL_TOLERANCE
            and self.max_fd_residual < FD_RESIDUAL_TOLERANCE
            and (self.invariance_error is None or self.invariance_error < INVARIANCE_TOLERANCE)
        )

    def to_dict(self) -> dict[str, Any]:
        return {**self._asdict(), "passed": self.passed}


def kelvin_check(
    name: str,
    n: int,
    samples: int = 100,
    seed: int = 0,
    fd_spacing: float = 4e-3,
    fraction: float = 0.5,
) -> KelvinReport:
    """Kelvin-transform a named fixture and measure how well the image solves
    the constant scalar curvature equation

    Parameters
    ----------
    name : str
        The fixture (see `kelvin_fixture`)
    n : int
        The dimension
    samples : int, optional
        The number of sample points. Default is 100.
    seed : int, optional
        The seed for the sample points
    fd_spacing : float, optional
        The relative finite-difference spacing for the second residual (see
        `extrapolated_fd_residual`)
    fraction : float, optional
        epsilon / v0 for the Fowler fixture

    Returns
    -------
    KelvinReport
        Relative residuals with analytic and with finite-difference
        derivatives, at the images of random points of the fixture's domain.
        The Fowler fixture is inverted about a point of the boundary of its
        ball, the others about (1/2, 0, ..., 0).
        For the bubble, the report also holds the largest relative difference
        between the standard bubble and its transform under the unit inversion
        about the origin.
    """
    factor = kelvin_fixture(name, n, fraction)
    inversion = Inversion.of(inversion_center(n, name))
    rng = np.random.default_rng(seed)
    points = invert_point(inversion, _fixture_points(name, factor, inversion, samples, rng))
    transformed = kelvin_transform(inversion, factor)
    max_residual = float(relative_residual(transformed, points).max())
    max_fd = float(extrapolated_fd_residual(transformed, points, fd_spacing).max())

    invariance = None
    if name == "bubble":
        standard = bubble(n, 1.0)
        fixed = kelvin_transform(Inversion.of(np.zeros(n)), standard)
        others = random_points_in_annulus(n, samples, 0.1, 10.0, rng)
        invariance = float(
            np.max(np.abs(fixed.u(others) - standard.u(others)) / standard.u(others))
        )

    report = KelvinReport(
        name,
        n,
        inversion.center.tolist(),
        inversion.scale,
        len(points),
        max_residual,
        max_fd,
        fd_spacing,
        invariance,
    )
    LOGGER.info(
        "Kelvin check (%s, n=%d): residual %.3g analytic, %.3g finite-difference",
        name,
        n,
        max_residual,
        max_fd,
    )
    return report


def symmetric_scan(
    n: int,
    height: float = SYMMETRIC_HEIGHT,
    half_width: float = 4.0,
    grid_cells: int = 16,
    tol: float = 1e-8,
    threads: int | None = 1,
) -> LambdaScan:
    """Moving planes on the standard bubble centered at height * e_n

    The bubble is symmetric about {x^n = height}, so the critical height is
    `height` and the reflection difference vanishes identically there.
    """
    center = np.zeros(n)
    center[-1] = height
    v = bubble(n, 1.0, center)
    domain = HalfSpaceDomain(n, 0.0, None, SingularSet.empty(n), GridSpec(half_width, grid_cells))
    return scan_lambda(v, domain, tol, threads=threads)


def reflection_ball(n: int, kind: str) -> tuple[Ball, np.ndarray, np.ndarray]:
    """The ball and boundary points p (the inversion center) and q used by the
    reflection fixtures

    For "bubble" this is the ball of radius 1/2 about (0, ..., 0, 1/4) with p
    its top point. For "fowler" it is the ball of radius 0.3 about
    (0.5, 0, ..., 0), which keeps well clear of the singular point.
    """
    top = np.eye(n)[-1]
    if kind == "bubble":
        ball = Ball(0.25 * top, 0.5)
    else:
        center = np.zeros(n)
        center[0] = 0.5
        ball = Ball(center, 0.3)
    return ball, ball.center + ball.radius * top, ball.center - ball.radius * top


def cap_reflection_height(n: int) -> float:
    """The critical height expected from the spherical-cap reflection step:
    the height of the transformed bubble's center in the normalized frame"""
    ball, p, _ = reflection_ball(n, "bubble")
    inversion = Inversion.of(p)
    motion = normalize_frame(invert_ball(inversion, ball))
    _, center = kelvin_bubble_parameters(inversion, CAP_BUBBLE_SCALE, np.zeros(n))
    return float(motion.apply(center)[-1])


def reflection_fixture(
    kind: str,
    n: int,
    grid_cells: int = 24,
    tol: float = 1e-4,
    fraction: float = 0.5,
    threads: int | None = 1,
) -> ReflectedBallStep:
    """Run one reflection step on a named instance

    Parameters
    ----------
    kind : str
        "bubble" (the spherical cap: a concentrated bubble with no singular
        points, where the reflection is symmetric) or "fowler" (a Fowler
        instance, with its singular point at the origin)
    n : int
        The dimension
    grid_cells : int, optional
        Grid cells per half-width
    tol : float, optional
        The tolerance on the critical height
    fraction : float, optional
        epsilon / v0 for the Fowler instance
    threads : int, optional
        Worker threads

    Raises
    ------
    DomainError
        If the kind is not recognized
    """
    if kind == "bubble":
        instance = build_bubble_instance(n, CAP_BUBBLE_SCALE)
    elif kind == "fowler":
        instance = fowler_fixture(n, fraction)
    else:
        raise DomainError(f"Unknown reflection fixture {kind!r}")
    ball, p, q = reflection_ball(n, kind)
    return reflected_ball_step(
        instance, ball, p, q, grid_cells=grid_cells, tol=tol, threads=threads
    )
