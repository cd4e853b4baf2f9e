"""Instances of the convexity theorem and desk-scale checks of its conclusion

An instance is a conformal metric of constant scalar curvature n(n-1) on the
closed unit ball minus a finite singular set, with nonnegative mean curvature
on the unit sphere. The conclusion to check is that every Euclidean ball whose
closure avoids the singular set has a convex boundary in that metric.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import fowler
from ._pool import parallel_map
from .conformal import (
    Ball,
    ConformalFactor,
    ConformalMetric,
    Domain,
    HalfSpace,
    SingularSet,
    bubble,
    constant_factor,
    cyl_to_euclidean,
    mean_curvature_sphere,
    yamabe_residual,
)
from .errors import GeometryError, HypothesisError
from .kelvin import (
    Inversion,
    invert_ball,
    invert_halfspace,
    invert_point,
    kelvin_transform,
    move_factor,
    normalize_frame,
)
from .logging import IMPORTANT
from .moving_planes import (
    GridSpec,
    HalfSpaceDomain,
    LambdaScan,
    choose_half_width,
    fit_expansion,
    reflect,
    scan_lambda,
)
from .sampling import random_directions, sphere_directions

LOGGER = logging.getLogger(__name__)

UNIT_BALL_MARGIN = 1e-9
# radii of the balls hugging an exclusion, as fractions of the room available
RADIUS_TIERS = (1e-2, 3e-2, 0.1, 0.3, 0.9)
RESIDUAL_TOLERANCE = 1e-9
BOUNDARY_TOLERANCE = 1e-10
# w(t0) above this counts as an ascending phase
ASCENDING_TOLERANCE = 1e-10
# extra span integrated beyond either end of a Fowler instance
PROFILE_MARGIN = 0.5


@dataclass(frozen=True, eq=False)
class TheoremInstance:
    """A metric on the closed unit ball minus a finite singular set

    Attributes
    ----------
    metric : ConformalMetric
        The metric, whose factor's domain is the unit ball minus the
        exclusion balls
    singular : SingularSet
        The singular points and their exclusion radius
    boundary_h_min : float
        The smallest sampled mean curvature of the unit sphere
    kind : str
        "fowler", "bubble" or "flat"
    parameters : dict
        The parameters the instance was built from
    override : bool
        Whether the instance was built despite failing a hypothesis
    """

    metric: ConformalMetric
    singular: SingularSet
    boundary_h_min: float
    kind: str
    parameters: dict[str, Any]
    override: bool = False

    @property
    def factor(self) -> ConformalFactor:
        return self.metric.factor

    @property
    def n(self) -> int:
        return self.metric.n

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "n": self.n, **self.parameters}


def _boundary_h_min(factor: ConformalFactor, samples: int) -> float:
    unit = Ball(np.zeros(factor.n), 1.0)
    points = unit.boundary_points(sphere_directions(factor.n, samples))
    return float(np.min(mean_curvature_sphere(factor, unit, points)))


def _on_unit_ball(factor: ConformalFactor) -> ConformalFactor:
    n = factor.n
    return dataclasses.replace(
        factor, domain=Domain(factor.domain.singular, inside=Ball(np.zeros(n), 1.0))
    )


def build_fowler_instance(
    n: int,
    epsilon: float,
    t0: float,
    exclusion_radius: float = 1e-3,
    step: float = fowler.DEFAULT_STEP,
    override: bool = False,
    boundary_samples: int = 64,
) -> TheoremInstance:
    """Build the instance given by a Fowler solution restricted to t >= t0

    Parameters
    ----------
    n : int
        The dimension
    epsilon : float
        The minimum of the Fowler solution (its phase T is 0)
    t0 : float
        The cylinder time that becomes the unit sphere
    exclusion_radius : float, optional
        The radius excluded around the singular point 0. Default is 1e-3.
    step : float, optional
        The integration step
    override : bool, optional
        Build the instance even if dv/dt(t0) > 0. Default is False.
    boundary_samples : int, optional
        The number of unit-sphere points at which the boundary mean curvature
        is sampled

    Returns
    -------
    TheoremInstance
        The instance with singular set {0}, whose factor is
        |x|^((2-n)/2) v(t0 - log|x|)

    Raises
    ------
    HypothesisError
        If dv/dt(t0) > 0 (the unit sphere would have negative mean
        curvature) and `override` is False
    """
    params = fowler.FowlerParams(n, epsilon)
    depth = -math.log(exclusion_radius)
    trajectory = fowler.integrate(
        params, t0 - PROFILE_MARGIN, t0 + depth + PROFILE_MARGIN, step
    )
    slope = trajectory.interpolate(t0).w
    if slope > ASCENDING_TOLERANCE:
        message = (
            f"dv/dt(t0) = {slope:.6g} > 0: t0 = {t0} lies on an ascending branch"
            " and the unit sphere has negative mean curvature"
        )
        if not override:
            raise HypothesisError(message)
        LOGGER.warning("%s (overridden)", message)

    profile = trajectory.profile().restricted(t0, t0 + depth).shifted(t0)
    factor = cyl_to_euclidean(profile, n, exclusion_radius=exclusion_radius)
    h_min = _boundary_h_min(factor, boundary_samples)
    LOGGER.info(
        "Fowler instance n=%d epsilon=%.9g t0=%.9g: boundary h >= %.6g",
        n,
        epsilon,
        t0,
        h_min,
    )
    return TheoremInstance(
        ConformalMetric(factor),
        factor.domain.singular,
        h_min,
        "fowler",
        {"epsilon": float(epsilon), "t0": float(t0), "exclusion_radius": exclusion_radius},
        override and slope > ASCENDING_TOLERANCE,
    )


def build_bubble_instance(
    n: int,
    lam: float = 1.0,
    center: Sequence[float] | None = None,
    boundary_samples: int = 64,
) -> TheoremInstance:
    """The standard bubble restricted to the closed unit ball (a spherical cap,
    with no singular points)"""
    factor = _on_unit_ball(bubble(n, lam, center))
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return TheoremInstance(
        ConformalMetric(factor),
        SingularSet.empty(n),
        _boundary_h_min(factor, boundary_samples),
        "bubble",
        {"lambda": float(lam), "center": center.tolist()},
    )


def build_flat_instance(n: int, boundary_samples: int = 64) -> TheoremInstance:
    """The flat unit ball (scalar curvature 0, so it only makes sense with
    an override)"""
    factor = _on_unit_ball(constant_factor(n))
    return TheoremInstance(
        ConformalMetric(factor),
        SingularSet.empty(n),
        _boundary_h_min(factor, boundary_samples),
        "flat",
        {},
        override=True,
    )


def radial_length(
    factor: ConformalFactor,
    point: Sequence[float],
    direction: Sequence[float],
    r_from: float,
    r_to: float,
    samples: int = 4001,
) -> float:
    """The g-length of the segment point + r direction, r_from <= r <= r_to

    The integral of u^(2/(n-2)) dr is evaluated by the trapezoidal rule in
    log r, on log-spaced samples.
    """
    n = factor.n
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    radii = np.geomspace(r_from, r_to, samples)
    points = np.asarray(point, dtype=float) + radii[:, None] * direction
    integrand = factor.u(points) ** (2 / (n - 2)) * radii
    return float(trapezoid(integrand, np.log(radii)))


class HypothesisReport(NamedTuple):
    """The outcome of checking an instance against the theorem's hypotheses"""

    max_residual: float
    min_boundary_h: float
    completeness: dict[str, Any]
    residual_ok: bool
    boundary_ok: bool
    completeness_ok: bool

    @property
    def passed(self) -> bool:
        return self.residual_ok and self.boundary_ok and self.completeness_ok

    def to_dict(self) -> dict[str, Any]:
        return {**self._asdict(), "passed": self.passed}


def _interior_samples(
    instance: TheoremInstance, count: int, rng: np.random.Generator
) -> np.ndarray:
    n = instance.n
    singular = instance.singular
    if singular:
        # log-uniform in distance to the first singular point
        q = singular.points[0]
        reach = 1 - np.linalg.norm(q)
        radii = np.exp(
            rng.uniform(math.log(2 * singular.exclusion_radius), math.log(reach), count)
        )
        points = q + radii[:, None] * random_directions(n, count, rng)
        keep = instance.factor.domain.contains(points)
        return points[keep]
    radii = rng.uniform(0, 1, count) ** (1 / n)
    return radii[:, None] * random_directions(n, count, rng)


def verify_hypotheses(
    instance: TheoremInstance,
    interior_samples: int = 200,
    boundary_samples: int = 100,
    rng_seed: int = 0,
    tolerance: float = RESIDUAL_TOLERANCE,
) -> HypothesisReport:
    """Check an instance against the hypotheses of the theorem

    Parameters
    ----------
    instance : TheoremInstance
        The instance
    interior_samples : int, optional
        The number of random interior points at which the equation is checked
    boundary_samples : int, optional
        The number of unit-sphere points at which the mean curvature is checked
    rng_seed : int, optional
        The seed for the interior sample
    tolerance : float, optional
        The largest acceptable relative residual
        |Delta u + c u^p| / (c u^p). Default is 1e-9.

    Returns
    -------
    HypothesisReport
        The measured quantities and a pass/fail flag for each hypothesis.
        Completeness is measured by the g-length of rays running into each
        singular point, which must grow like log(1/delta).
    """
    n = instance.n
    factor = instance.factor
    rng = np.random.default_rng(rng_seed)
    points = _interior_samples(instance, interior_samples, rng)
    coefficient = n * (n - 2) / 4
    nonlinear = coefficient * factor.u(points) ** ((n + 2) / (n - 2))
    relative = np.abs(yamabe_residual(factor, points)) / nonlinear
    max_residual = float(relative.max())

    unit = Ball(np.zeros(n), 1.0)
    boundary = unit.boundary_points(sphere_directions(n, boundary_samples, rng))
    min_h = float(np.min(mean_curvature_sphere(factor, unit, boundary)))

    if not instance.singular:
        completeness: dict[str, Any] = {"status": "no singular points"}
        completeness_ok = True
    else:
        slopes = []
        exclusion = instance.singular.exclusion_radius
        for q in instance.singular.points:
            outer = 0.5 * (1 - np.linalg.norm(q))
            deltas = np.geomspace(
                max(exclusion, 1e-3 * outer), 0.1 * outer, 6
            )
            for direction in (np.eye(n)[0], -np.eye(n)[0]):
                lengths = [
                    radial_length(factor, q, direction, delta, outer) for delta in deltas
                ]
                slopes.append(float(np.polyfit(np.log(1 / deltas), lengths, 1)[0]))
        completeness = {"status": "ray lengths grow like log(1/delta)", "slopes": slopes}
        completeness_ok = min(slopes) > 0
        if not completeness_ok:
            completeness["status"] = "ray lengths stay bounded"

    report = HypothesisReport(
        max_residual,
        min_h,
        completeness,
        max_residual < tolerance,
        min_h >= -BOUNDARY_TOLERANCE,
        completeness_ok,
    )
    LOGGER.info(
        "Hypotheses: residual %.3g, boundary h >= %.6g, completeness %s",
        max_residual,
        min_h,
        completeness["status"],
    )
    return report


class BallResult(NamedTuple):
    """The smallest mean curvature found on one scanned sphere"""

    index: int
    kind: str
    center: list[float]
    radius: float
    min_h: float
    argmin: list[float]


class ScanReport(NamedTuple):
    """The result of sweeping balls inside an instance"""

    instance: dict[str, Any]
    balls: list[BallResult]
    global_min_h: float
    seed: int
    boundary_samples: int
    tolerances: dict[str, float]
    hypotheses: dict[str, Any]
    hypotheses_verified: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance": self.instance,
            "balls": [
                {
                    "center": ball.center,
                    "radius": ball.radius,
                    "min_h": ball.min_h,
                    "argmin": ball.argmin,
                    "kind": ball.kind,
                }
                for ball in self.balls
            ],
            "global_min_h": self.global_min_h,
            "seed": self.seed,
            "num_balls": len(self.balls),
            "boundary_samples": self.boundary_samples,
            "tolerances": self.tolerances,
            "hypotheses": self.hypotheses,
            "hypotheses_verified": self.hypotheses_verified,
        }

    def ball_rows(self) -> tuple[list[str], list[list[Any]]]:
        """Header and rows for a flat CSV export, one row per ball"""
        n = len(self.balls[0].center) if self.balls else 0
        header = (
            ["index", "kind"]
            + [f"c{i + 1}" for i in range(n)]
            + ["radius", "min_h"]
            + [f"argmin{i + 1}" for i in range(n)]
        )
        rows = [
            [ball.index, ball.kind, *ball.center, ball.radius, ball.min_h, *ball.argmin]
            for ball in self.balls
        ]
        return header, rows


def _admissible(ball: Ball, singular: SingularSet) -> bool:
    if np.linalg.norm(ball.center) + ball.radius > 1 - UNIT_BALL_MARGIN:
        return False
    if singular:
        clearance = singular.distance(ball.center[None, :])[0] - ball.radius
        return clearance >= singular.exclusion_radius * (1 + 1e-6)
    return True


def _uniform_ball(n: int, singular: SingularSet, rng: np.random.Generator) -> Ball | None:
    center = rng.uniform(0, 1) ** (1 / n) * random_directions(n, 1, rng)[0]
    reach = 1 - UNIT_BALL_MARGIN - np.linalg.norm(center)
    if singular:
        reach = min(
            reach,
            singular.distance(center[None, :])[0] - singular.exclusion_radius * (1 + 1e-6),
        )
    if reach <= 0:
        return None
    return Ball(center, rng.uniform(1e-3, 1) * reach)


def _ball_near_singularity(
    n: int, singular: SingularSet, index: int, direction: np.ndarray
) -> Ball | None:
    q = singular.points[index % len(singular.points)]
    gap = singular.exclusion_radius * (1 + 1e-6)
    reach = 0.5 * (1 - UNIT_BALL_MARGIN - np.linalg.norm(q) - gap)
    if reach <= 0:
        return None
    radius = RADIUS_TIERS[index % len(RADIUS_TIERS)] * reach * (1 - 1e-6)
    return Ball(q + (gap * (1 + 1e-9) + radius) * direction, radius)


def _ball_near_boundary(
    n: int, singular: SingularSet, index: int, direction: np.ndarray
) -> Ball | None:
    gap = singular.exclusion_radius * (1 + 1e-6) if singular else 0.0
    reach = 0.5 * (1 - gap)
    if reach <= 0:
        return None
    radius = RADIUS_TIERS[index % len(RADIUS_TIERS)] * reach * (1 - 1e-6)
    return Ball((1 - 2 * UNIT_BALL_MARGIN - radius) * direction, radius)


def _stratified_balls(
    kind: str,
    draw: Callable[[int, SingularSet, int, np.ndarray], Ball | None],
    n: int,
    singular: SingularSet,
    count: int,
) -> list[tuple[str, Ball]]:
    """Balls hugging an exclusion, with radii cycling through fixed tiers and
    centers along a fixed set of directions"""
    balls: list[tuple[str, Ball]] = []
    if count == 0:
        return balls
    candidates = 4 * count
    for index, direction in enumerate(sphere_directions(n, candidates)):
        ball = draw(n, singular, index, direction)
        if ball is not None and _admissible(ball, singular):
            balls.append((kind, ball))
            if len(balls) == count:
                return balls
    raise GeometryError(
        f"Could not fit {count} admissible balls ({kind}) inside the unit ball"
        " away from the singular set"
    )


def sample_balls(
    n: int, singular: SingularSet, num_balls: int, rng: np.random.Generator
) -> list[tuple[str, Ball]]:
    """Draw admissible balls: half uniformly at random, a quarter hugging the
    singular exclusions and a quarter hugging the unit sphere

    The balls hugging an exclusion do not depend on `rng`, so the most extreme
    balls are the same from one seed to the next.

    Raises
    ------
    GeometryError
        If no admissible ball can be found
    """
    near_singular = num_balls // 4 if singular else 0
    near_boundary = num_balls // 4
    balls = []
    for _ in range(num_balls - near_singular - near_boundary):
        for _ in range(1000):
            ball = _uniform_ball(n, singular, rng)
            if ball is not None and _admissible(ball, singular):
                balls.append(("uniform", ball))
                break
        else:
            raise GeometryError(
                "Could not fit an admissible ball (uniform) inside the unit ball"
                " away from the singular set"
            )
    balls += _stratified_balls("singular", _ball_near_singularity, n, singular, near_singular)
    balls += _stratified_balls("boundary", _ball_near_boundary, n, singular, near_boundary)
    return balls


def scan_balls(
    instance: TheoremInstance,
    num_balls: int = 200,
    boundary_samples: int = 100,
    rng_seed: int = 0,
    override: bool = False,
    threads: int | None = 1,
) -> ScanReport:
    """Sample balls inside an instance and measure the mean curvature of their
    boundaries

    Parameters
    ----------
    instance : TheoremInstance
        The instance
    num_balls : int, optional
        The number of balls. Default is 200.
    boundary_samples : int, optional
        The number of points sampled on each sphere. Default is 100.
    rng_seed : int, optional
        The seed. The same seed reproduces the same report, whatever the
        number of threads.
    override : bool, optional
        Scan even if the instance fails its hypotheses. The report then has
        `hypotheses_verified` False. Default is False.
    threads : int, optional
        Worker threads. Default is 1.

    Returns
    -------
    ScanReport
        The smallest inward mean curvature found on each sphere, and overall,
        with the outcome of the hypothesis check

    Raises
    ------
    HypothesisError
        If the instance fails its hypotheses and `override` is False
    GeometryError
        If no admissible ball fits
    """
    hypotheses = verify_hypotheses(instance, rng_seed=rng_seed)
    verified = hypotheses.passed and not instance.override
    if not verified:
        message = f"The instance fails the hypotheses of the theorem ({hypotheses.to_dict()})"
        if not override:
            raise HypothesisError(message)
        LOGGER.warning("%s: scanning without a positivity assertion (overridden)", message)
    n = instance.n
    factor = instance.factor
    rng = np.random.default_rng(rng_seed)
    balls = sample_balls(n, instance.singular, num_balls, rng)
    LOGGER.info("Scanning %d balls x %d boundary points", len(balls), boundary_samples)

    def measure(item: tuple[int, tuple[str, Ball]]) -> BallResult:
        index, (kind, ball) = item
        directions = sphere_directions(
            n, boundary_samples, np.random.default_rng([rng_seed, index])
        )
        points = ball.boundary_points(directions)
        h = mean_curvature_sphere(factor, ball, points)
        worst = int(np.argmin(h))
        return BallResult(
            index,
            kind,
            ball.center.tolist(),
            float(ball.radius),
            float(h[worst]),
            points[worst].tolist(),
        )

    results = parallel_map(measure, list(enumerate(balls)), threads)
    global_min = min(result.min_h for result in results)
    LOGGER.log(IMPORTANT, "Smallest mean curvature over %d balls: %.9g", len(results), global_min)
    return ScanReport(
        instance.describe(),
        results,
        global_min,
        rng_seed,
        boundary_samples,
        {
            "residual": RESIDUAL_TOLERANCE,
            "boundary_h": BOUNDARY_TOLERANCE,
            "on_sphere": 1e-12,
        },
        hypotheses.to_dict(),
        verified,
    )


class ReflectedBallStep(NamedTuple):
    """One reflection step pulled back into the unit ball

    Attributes
    ----------
    K : Ball
        The preimage of the ball bounded by the reflected image sphere
    P : Ball
        The preimage of the half-space above the critical plane
    lambda0 : float
        The critical height in the normalized frame
    symmetric : bool
        Whether w vanishes identically at the critical height (the spherical
        cap case)
    dv_dxn_at_q : float
        dv/dx^n at the image of q, on the plane {x^n = 0}
    scan : LambdaScan
        The full critical-height report
    v : ConformalFactor
        The Kelvin transform in the normalized frame
    """

    K: Ball
    P: Ball
    lambda0: float
    symmetric: bool
    dv_dxn_at_q: float
    scan: LambdaScan
    v: ConformalFactor

    def to_dict(self) -> dict[str, Any]:
        return {
            "K": {"center": self.K.center.tolist(), "radius": float(self.K.radius)},
            "P": {"center": self.P.center.tolist(), "radius": float(self.P.radius)},
            "lambda0": self.lambda0,
            "symmetric": self.symmetric,
            "dv_dxn_at_q": self.dv_dxn_at_q,
            "lambda_scan": self.scan.to_dict(),
        }


def _check_on_sphere(ball: Ball, point: np.ndarray, name: str) -> None:
    if abs(np.linalg.norm(point - ball.center) - ball.radius) > 1e-9 * max(1.0, ball.radius):
        raise GeometryError(f"{name} must lie on the boundary of the ball")


def reflected_ball_step(
    instance: TheoremInstance,
    ball: Ball,
    p: Sequence[float],
    q: Sequence[float],
    scale: float = 1.0,
    grid_cells: int = 24,
    tol: float = 1e-4,
    threads: int | None = 1,
) -> ReflectedBallStep:
    """Invert about p, run moving planes, and pull the reflected sphere back

    Parameters
    ----------
    instance : TheoremInstance
        The instance
    ball : Ball
        A ball whose closure lies in the unit ball away from the singular set
    p, q : n-vector
        Distinct points on the boundary of `ball`. The inversion is centered
        at p.
    scale : float, optional
        The inversion scale. Default is 1.
    grid_cells : int, optional
        Grid cells per half-width for the moving-planes scan
    tol : float, optional
        The tolerance on the critical height
    threads : int, optional
        Worker threads for the field evaluations

    Returns
    -------
    ReflectedBallStep
        K, contained in `ball`, and P, whose boundary sphere reflects the
        unit sphere onto the boundary of K

    Raises
    ------
    GeometryError
        If p or q is not on the boundary of the ball, or p = q
    NoStartError
        If the critical-height search cannot start
    """
    n = instance.n
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    _check_on_sphere(ball, p, "p")
    _check_on_sphere(ball, q, "q")
    if np.allclose(p, q):
        raise GeometryError("p and q must be distinct")
    if not _admissible(ball, instance.singular):
        raise GeometryError("The ball must lie inside the unit ball, away from the singular set")

    inversion = Inversion.of(p, scale)
    image_of_ball = invert_ball(inversion, ball)
    if not isinstance(image_of_ball, HalfSpace):  # pragma: no cover
        raise GeometryError("The inversion center must lie on the ball's boundary")
    motion = normalize_frame(image_of_ball)
    back = motion.inverse()

    v = move_factor(motion, kelvin_transform(inversion, instance.factor))
    sigma = invert_ball(inversion, Ball(np.zeros(n), 1.0))
    sigma = motion.move_ball(sigma)
    domain = HalfSpaceDomain(n, 0.0, sigma, v.domain.singular, GridSpec(1.0, grid_cells))
    enclosing = max(domain.enclosing_radius, 1.0)
    fit = fit_expansion(v, [4 * enclosing * 2**i for i in range(4)])
    width = choose_half_width(fit, enclosing, maximum=max(50.0, 2 * enclosing))
    scan = scan_lambda(v, domain._replace(grid=GridSpec(width, grid_cells)), tol, threads=threads)
    lambda0 = scan.lambda0

    reflected_sigma = Ball(reflect(sigma.center, lambda0), sigma.radius)
    K = invert_ball(inversion, back.move_ball(reflected_sigma))
    upper = back.move_halfspace(HalfSpace(-np.eye(n)[-1], -lambda0))
    P = invert_halfspace(inversion, upper)
    if not (isinstance(K, Ball) and isinstance(P, Ball)):  # pragma: no cover
        raise GeometryError("The reflected regions do not pull back to balls")

    q_image = motion.apply(invert_point(inversion, q))
    dv_dxn = float(v.grad(q_image)[-1])
    LOGGER.log(
        IMPORTANT,
        "lambda_0 = %.9g%s; K = B(%s, %.9g)",
        lambda0,
        " (spherical cap: w vanishes identically)" if scan.symmetric else "",
        np.array2string(K.center, precision=6),
        K.radius,
    )
    return ReflectedBallStep(K, P, lambda0, scan.symmetric, dv_dxn, scan, v)
