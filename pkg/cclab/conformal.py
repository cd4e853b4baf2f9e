"""Conformally flat metrics g = u^(4/(n-2)) (flat), their curvatures, and the
change of picture between punctured Euclidean space and the cylinder"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import BPoly

from . import fowler
from .errors import DomainError, GeometryError, SymmetryError
from .sampling import sphere_directions

LOGGER = logging.getLogger(__name__)

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite-difference"

DEFAULT_SPACING = 1e-4
DEFAULT_EXCLUSION_RADIUS = 1e-6
ON_SPHERE_TOLERANCE = 1e-12

Evaluator = Callable[[np.ndarray], np.ndarray]


def _as_points(x, n: int) -> tuple[np.ndarray, bool]:
    """Coerce x to an (m, n) array, remembering whether a single point was given"""
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.ndim != 2 or points.shape[1] != n:
        raise DomainError(f"Expected points in R^{n}, got an array of shape {points.shape}")
    return points, single


def _unwrap(values: np.ndarray, single: bool):
    if single:
        return float(values[0]) if values.ndim == 1 else values[0]
    return values


class Ball(NamedTuple):
    """A closed Euclidean ball"""

    center: np.ndarray
    radius: float

    @classmethod
    def of(cls, center: Sequence[float], radius: float) -> "Ball":
        """Create a ball, validating its radius

        Raises
        ------
        GeometryError
            If the radius is not positive
        """
        if not radius > 0:
            raise GeometryError(f"A ball's radius must be positive (got {radius})")
        return cls(np.asarray(center, dtype=float), float(radius))

    @property
    def n(self) -> int:
        return len(self.center)

    def boundary_points(self, directions: np.ndarray) -> np.ndarray:
        """Map unit vectors onto the bounding sphere"""
        return self.center + self.radius * directions


class HalfSpace(NamedTuple):
    """The closed half-space {x : <normal, x> <= offset}

    The normal is a unit vector pointing out of the half-space.
    """

    normal: np.ndarray
    offset: float

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Positive outside the half-space, negative inside"""
        return np.asarray(points) @ self.normal - self.offset


class SingularSet(NamedTuple):
    """A finite set of singular points, each surrounded by an excluded ball"""

    points: np.ndarray
    exclusion_radius: float

    @classmethod
    def empty(cls, n: int) -> "SingularSet":
        return cls(np.empty((0, n)), 0.0)

    @classmethod
    def of(
        cls, points: Sequence[Sequence[float]], exclusion_radius: float
    ) -> "SingularSet":
        """Create a singular set, validating the exclusion radius

        Raises
        ------
        DomainError
            If the exclusion radius is not positive
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(points) and not exclusion_radius > 0:
            raise DomainError("The exclusion radius must be positive")
        return cls(points, float(exclusion_radius))

    def __bool__(self) -> bool:
        return len(self.points) > 0

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest singular point (inf if empty)"""
        points = np.atleast_2d(points)
        if not self:
            return np.full(len(points), np.inf)
        offsets = points[:, None, :] - self.points[None, :, :]
        return np.linalg.norm(offsets, axis=2).min(axis=1)


class Domain(NamedTuple):
    """Where a conformal factor may be evaluated

    Attributes
    ----------
    singular : SingularSet
        Singular points and the radius of the ball excluded around each
    inside : Ball, optional
        If given, points must lie in this closed ball
    outside : Ball, optional
        If given, points must lie outside this open ball
    halfspace : HalfSpace, optional
        If given, points must lie in this closed half-space
    """

    singular: SingularSet
    inside: Ball | None = None
    outside: Ball | None = None
    halfspace: HalfSpace | None = None

    @classmethod
    def everywhere(cls, n: int) -> "Domain":
        return cls(SingularSet.empty(n))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Test membership of each of an (m, n) array of points"""
        points = np.atleast_2d(points)
        inside = np.ones(len(points), dtype=bool)
        if self.singular:
            inside &= self.singular.distance(points) >= self.singular.exclusion_radius * (
                1 - 1e-12
            )
        if self.inside is not None:
            distance = np.linalg.norm(points - self.inside.center, axis=1)
            inside &= distance <= self.inside.radius * (1 + 1e-9)
        if self.outside is not None:
            distance = np.linalg.norm(points - self.outside.center, axis=1)
            inside &= distance >= self.outside.radius * (1 - 1e-9)
        if self.halfspace is not None:
            slack = 1e-9 * max(1.0, abs(self.halfspace.offset))
            inside &= self.halfspace.signed_distance(points) <= slack
        return inside

    def check(self, points: np.ndarray) -> None:
        """Raise a DomainError if any of the points fall outside the domain"""
        valid = self.contains(points)
        if not valid.all():
            first = np.atleast_2d(points)[np.argmin(valid)]
            raise DomainError(
                f"{np.count_nonzero(~valid)} point(s) lie outside the domain"
                f" (e.g. {first.tolist()})"
            )


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """A positive function u defining the metric g = u^(4/(n-2)) (flat)

    Attributes
    ----------
    n : int
        The dimension
    value : callable
        Vectorized evaluator taking an (m, n) array and returning u at each
        point. It performs no domain checking.
    domain : Domain
        Where the factor may be evaluated
    gradient_fn : callable, optional
        Vectorized analytic gradient, (m, n) -> (m, n)
    laplacian_fn : callable, optional
        Vectorized analytic Laplacian, (m, n) -> (m,)
    derivative_mode : str, optional
        "analytic" (the default) or "finite-difference"
    spacing : float, optional
        Relative stencil spacing for finite differences. The actual step at x
        is spacing times the local scale min(distance to the singular set,
        max(1, |x|)).
    label : str, optional
        A human-readable description
    """

    n: int
    value: Evaluator
    domain: Domain
    gradient_fn: Evaluator | None = None
    laplacian_fn: Evaluator | None = None
    derivative_mode: str = ANALYTIC
    spacing: float = DEFAULT_SPACING
    label: str = ""

    def __post_init__(self):
        fowler.validate_dimension(self.n)
        if self.derivative_mode not in (ANALYTIC, FINITE_DIFFERENCE):
            raise ValueError(f"Unknown derivative mode: {self.derivative_mode}")
        if self.derivative_mode == ANALYTIC and (
            self.gradient_fn is None or self.laplacian_fn is None
        ):
            raise ValueError("Analytic mode requires both gradient and Laplacian")
        if not self.spacing > 0:
            raise ValueError("The finite-difference spacing must be positive")

    @property
    def analytic(self) -> bool:
        return self.derivative_mode == ANALYTIC

    def with_finite_differences(self, spacing: float | None = None) -> "ConformalFactor":
        """A copy of this factor whose derivatives come from central differences

        Parameters
        ----------
        spacing : float, optional
            The relative stencil spacing. Defaults to this factor's spacing.
        """
        return dataclasses.replace(
            self,
            derivative_mode=FINITE_DIFFERENCE,
            spacing=self.spacing if spacing is None else spacing,
        )

    def _points(self, x, check: bool) -> tuple[np.ndarray, bool]:
        points, single = _as_points(x, self.n)
        if check:
            self.domain.check(points)
        return points, single

    def _steps(self, points: np.ndarray) -> np.ndarray:
        scale = np.minimum(
            self.domain.singular.distance(points),
            np.maximum(1.0, np.linalg.norm(points, axis=1)),
        )
        return self.spacing * scale

    def u(self, x, check: bool = True):
        """Evaluate the factor at a point (n,) or at points (m, n)

        Raises
        ------
        DomainError
            If `check` is True and any point is outside the domain
        """
        points, single = self._points(x, check)
        return _unwrap(np.asarray(self.value(points), dtype=float), single)

    def grad(self, x, check: bool = True):
        """Evaluate the gradient of the factor"""
        points, single = self._points(x, check)
        if self.analytic:
            gradient = self.gradient_fn(points)
        else:
            h = self._steps(points)[:, None]
            gradient = np.empty_like(points)
            for i in range(self.n):
                shift = h * np.eye(self.n)[i]
                gradient[:, i] = (
                    self.value(points + shift) - self.value(points - shift)
                ) / (2 * h[:, 0])
        return _unwrap(np.asarray(gradient, dtype=float), single)

    def laplacian(self, x, check: bool = True):
        """Evaluate the (flat) Laplacian of the factor"""
        points, single = self._points(x, check)
        if self.analytic:
            laplacian = self.laplacian_fn(points)
        else:
            h = self._steps(points)
            center = 2 * self.value(points)
            laplacian = np.zeros(len(points))
            for i in range(self.n):
                shift = h[:, None] * np.eye(self.n)[i]
                laplacian += (
                    self.value(points + shift) - center + self.value(points - shift)
                )
            laplacian /= h * h
        return _unwrap(np.asarray(laplacian, dtype=float), single)


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """The metric u^(4/(n-2)) times the flat metric"""

    factor: ConformalFactor

    @property
    def n(self) -> int:
        return self.factor.n

    def weight(self, x, check: bool = True):
        """The pointwise scaling u^(4/(n-2)) of the flat metric"""
        return np.power(self.factor.u(x, check), 4 / (self.n - 2))


def _factor_of(metric: ConformalMetric | ConformalFactor) -> ConformalFactor:
    return metric.factor if isinstance(metric, ConformalMetric) else metric


class CylinderProfile(NamedTuple):
    """A rotationally symmetric conformal factor v(t) on the cylinder

    Attributes
    ----------
    n : int
        The dimension
    v, dv_dt, d2v_dt2 : callable
        Vectorized evaluators. They extrapolate silently outside `t_range`.
    t_range : (float, float)
        The interval over which the profile is declared valid
    """

    n: int
    v: Callable
    dv_dt: Callable
    d2v_dt2: Callable
    t_range: tuple[float, float] = (-math.inf, math.inf)

    def check(self, t) -> None:
        """Raise a DomainError if any of the times fall outside the profile's range"""
        t_lo, t_hi = self.t_range
        slack = 1e-12 * max(1.0, abs(t_lo) if math.isfinite(t_lo) else 1.0)
        t = np.asarray(t)
        if np.any(t < t_lo - slack) or np.any(
            t > t_hi + 1e-12 * max(1.0, abs(t_hi) if math.isfinite(t_hi) else 1.0)
        ):
            raise DomainError(
                f"t falls outside the profile range [{t_lo:.17g}, {t_hi:.17g}]"
            )

    def evaluate(self, t):
        """v(t), with range checking"""
        self.check(t)
        return self.v(t)

    def shifted(self, dt: float) -> "CylinderProfile":
        """The profile t -> v(t + dt)"""
        t_lo, t_hi = self.t_range
        return CylinderProfile(
            self.n,
            lambda t: self.v(np.asarray(t) + dt),
            lambda t: self.dv_dt(np.asarray(t) + dt),
            lambda t: self.d2v_dt2(np.asarray(t) + dt),
            (t_lo - dt, t_hi - dt),
        )

    def restricted(self, t_lo: float, t_hi: float) -> "CylinderProfile":
        """The same profile, declared valid on a narrower interval"""
        own_lo, own_hi = self.t_range
        if t_lo < own_lo or t_hi > own_hi or not t_hi > t_lo:
            raise DomainError(
                f"[{t_lo}, {t_hi}] is not a sub-interval of [{own_lo}, {own_hi}]"
            )
        return self._replace(t_range=(float(t_lo), float(t_hi)))


def constant_profile(n: int, c: float | None = None) -> CylinderProfile:
    """The constant profile v = c (v0 by default: the round cylinder)"""
    c = fowler.equilibrium_v0(n) if c is None else float(c)
    if not c > 0:
        raise DomainError("A constant profile must be positive")
    return CylinderProfile(
        n,
        lambda t: np.full(np.shape(t), c) if np.ndim(t) else c,
        lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0,
        lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0,
    )


def sech_profile(n: int) -> CylinderProfile:
    """The profile (sech t)^((n-2)/2), which is the standard bubble seen on the
    cylinder"""
    n = fowler.validate_dimension(n)
    k = (n - 2) / 2

    def v(t):
        return np.cosh(t) ** -k

    def dv_dt(t):
        return -k * np.cosh(t) ** -k * np.tanh(t)

    def d2v_dt2(t):
        return np.cosh(t) ** -k * (k * k * np.tanh(t) ** 2 - k / np.cosh(t) ** 2)

    return CylinderProfile(n, v, dv_dt, d2v_dt2)


def _quintic_hermite(
    x: np.ndarray, y: np.ndarray, dy: np.ndarray, d2y: np.ndarray
) -> BPoly:
    """Piecewise quintic matching values, first and second derivatives at the knots"""
    h = np.diff(x)
    d0, d1 = h * dy[:-1], h * dy[1:]
    s0, s1 = h * h * d2y[:-1], h * h * d2y[1:]
    coefficients = np.vstack(
        (
            y[:-1],
            y[:-1] + d0 / 5,
            y[:-1] + 2 * d0 / 5 + s0 / 20,
            y[1:] - 2 * d1 / 5 + s1 / 20,
            y[1:] - d1 / 5,
            y[1:],
        )
    )
    return BPoly(coefficients, x)


def fowler_profile(trajectory: fowler.FowlerTrajectory) -> CylinderProfile:
    """Turn a sampled orbit into a C^2 cylinder profile

    Parameters
    ----------
    trajectory : FowlerTrajectory
        The sampled orbit

    Returns
    -------
    CylinderProfile
        A profile valid over the sampled span. v and dv/dt are quintic Hermite
        interpolants built from (v, w, dw/dt) and (w, dw/dt, d^2w/dt^2) at the
        samples, and d^2v/dt^2 is read off the ODE.
    """
    n = trajectory.n
    linear = (n - 2) ** 2 / 4
    nonlinear = n * (n - 2) / 4
    exponent = (n + 2) / (n - 2)

    accel = trajectory.dw_dt
    jerk = (linear - nonlinear * exponent * trajectory.v ** (exponent - 1)) * trajectory.w
    v_spline = _quintic_hermite(trajectory.t, trajectory.v, trajectory.w, accel)
    w_spline = _quintic_hermite(trajectory.t, trajectory.w, accel, jerk)

    def d2v_dt2(t):
        v = v_spline(t)
        return linear * v - nonlinear * np.abs(v) ** exponent

    return CylinderProfile(n, v_spline, w_spline, d2v_dt2, trajectory.span)


def constant_factor(n: int, c: float = 1.0) -> ConformalFactor:
    """The constant factor u = c (a rescaled flat metric)"""
    n = fowler.validate_dimension(n)
    if not c > 0:
        raise DomainError(f"A conformal factor must be positive (got {c})")
    return ConformalFactor(
        n,
        lambda x: np.full(len(x), float(c)),
        Domain.everywhere(n),
        lambda x: np.zeros_like(x),
        lambda x: np.zeros(len(x)),
        label=f"constant({c})",
    )


def bubble(n: int, lam: float, center: Sequence[float] | None = None) -> ConformalFactor:
    """The standard bubble (2 lam / (lam^2 + |x - center|^2))^((n-2)/2)

    Parameters
    ----------
    n : int
        The dimension
    lam : float
        The concentration scale
    center : n-vector, optional
        The center of the bubble. Default is the origin.

    Returns
    -------
    ConformalFactor
        A smooth factor on all of R^n whose metric is a round sphere of
        scalar curvature n(n-1), with analytic derivatives

    Raises
    ------
    DomainError
        If lam <= 0
    """
    n = fowler.validate_dimension(n)
    if not lam > 0:
        raise DomainError(f"The bubble scale must be positive (got {lam})")
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    k = (n - 2) / 2

    def value(x):
        s = lam * lam + np.sum((x - center) ** 2, axis=1)
        return (2 * lam / s) ** k

    def gradient(x):
        offset = x - center
        s = lam * lam + np.sum(offset**2, axis=1)
        return (-2 * k * (2 * lam / s) ** k / s)[:, None] * offset

    def laplacian(x):
        r2 = np.sum((x - center) ** 2, axis=1)
        s = lam * lam + r2
        return -2 * k * (2 * lam / s) ** k * (n / s - 2 * (k + 1) * r2 / s**2)

    return ConformalFactor(
        n,
        value,
        Domain.everywhere(n),
        gradient,
        laplacian,
        label=f"bubble(lambda={lam}, center={center.tolist()})",
    )


def radial_power(
    n: int,
    coefficient: float,
    exponent: float,
    center: Sequence[float] | None = None,
    exclusion_radius: float = DEFAULT_EXCLUSION_RADIUS,
) -> ConformalFactor:
    """The factor coefficient * |x - center|^(-exponent)

    Notes
    -----
    Covers the cylinder (exponent (n-2)/2), the fundamental solution
    (exponent n-2) and the auxiliary weights |x|^(-mu).
    """
    n = fowler.validate_dimension(n)
    if not coefficient > 0:
        raise DomainError(f"A conformal factor must be positive (got {coefficient})")
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    alpha = float(exponent)

    def value(x):
        return coefficient * np.sum((x - center) ** 2, axis=1) ** (-alpha / 2)

    def gradient(x):
        offset = x - center
        r2 = np.sum(offset**2, axis=1)
        return (-alpha * coefficient * r2 ** (-alpha / 2 - 1))[:, None] * offset

    def laplacian(x):
        r2 = np.sum((x - center) ** 2, axis=1)
        return alpha * (alpha + 2 - n) * coefficient * r2 ** (-alpha / 2 - 1)

    return ConformalFactor(
        n,
        value,
        Domain(SingularSet.of([center], exclusion_radius)),
        gradient,
        laplacian,
        label=f"{coefficient}|x - {center.tolist()}|^-{alpha}",
    )


def cylinder_factor(
    n: int, exclusion_radius: float = DEFAULT_EXCLUSION_RADIUS
) -> ConformalFactor:
    """v0 |x|^((2-n)/2), the round cylinder seen in punctured R^n"""
    return radial_power(
        n, fowler.equilibrium_v0(n), (n - 2) / 2, exclusion_radius=exclusion_radius
    )


def cyl_to_euclidean(
    profile: CylinderProfile,
    n: int | None = None,
    exclusion_radius: float | None = None,
) -> ConformalFactor:
    """Express a cylinder profile as a factor on punctured Euclidean space

    Parameters
    ----------
    profile : CylinderProfile
        The profile v(t)
    n : int, optional
        The dimension. If given, it must match the profile's.
    exclusion_radius : float, optional
        The radius excluded around the origin. Defaults to exp(-t_max) when
        the profile's range is bounded above, 1e-6 otherwise.

    Returns
    -------
    ConformalFactor
        u(x) = |x|^((2-n)/2) v(-log|x|), with analytic radial derivatives.
        Points mapping outside the profile's range are outside the factor's
        domain.
    """
    if n is not None and n != profile.n:
        raise ValueError(f"The profile is {profile.n}-dimensional, not {n}")
    n = profile.n
    k = (n - 2) / 2
    t_lo, t_hi = profile.t_range
    if exclusion_radius is None:
        exclusion_radius = (
            math.exp(-t_hi) if math.isfinite(t_hi) else DEFAULT_EXCLUSION_RADIUS
        )
    if exclusion_radius < math.exp(-t_hi) * (1 - 1e-12):
        raise DomainError("The exclusion radius reaches outside the profile's range")
    outer = Ball(np.zeros(n), math.exp(-t_lo)) if math.isfinite(t_lo) else None

    def value(x):
        r = np.linalg.norm(x, axis=1)
        return r**-k * profile.v(-np.log(r))

    def gradient(x):
        r = np.linalg.norm(x, axis=1)
        t = -np.log(r)
        du_dr = -(r ** (-k - 1)) * (k * profile.v(t) + profile.dv_dt(t))
        return (du_dr / r)[:, None] * x

    def laplacian(x):
        r = np.linalg.norm(x, axis=1)
        t = -np.log(r)
        return r ** (-k - 2) * (profile.d2v_dt2(t) - k * k * profile.v(t))

    return ConformalFactor(
        n,
        value,
        Domain(SingularSet.of([np.zeros(n)], exclusion_radius), inside=outer),
        gradient,
        laplacian,
        label="cylinder profile",
    )


def euclidean_to_cyl(
    factor: ConformalFactor,
    direction: Sequence[float],
    t_range: tuple[float, float] | None = None,
    symmetry_tolerance: float = 1e-9,
    samples: int = 17,
) -> CylinderProfile:
    """Read a rotationally symmetric factor as a cylinder profile

    Parameters
    ----------
    factor : ConformalFactor
        A factor that is rotationally symmetric about the origin
    direction : n-vector
        The ray along which the profile is read off
    t_range : (float, float), optional
        The range to declare on the profile. By default it is derived from
        the factor's domain.
    symmetry_tolerance : float, optional
        The largest relative difference tolerated between rays. Default is 1e-9.
    samples : int, optional
        The number of t values at which the rays are compared

    Returns
    -------
    CylinderProfile
        v(t) = |x|^((n-2)/2) u(x) at x = e^(-t) direction, with derivatives
        assembled from the factor's gradient and Laplacian

    Raises
    ------
    SymmetryError
        If the factor differs between the coordinate rays and `direction`
    """
    n = factor.n
    k = (n - 2) / 2
    direction = np.asarray(direction, dtype=float)
    length = np.linalg.norm(direction)
    if direction.shape != (n,) or length == 0:
        raise DomainError("The direction must be a nonzero n-vector")
    direction = direction / length

    if t_range is None:
        domain = factor.domain
        t_lo = -math.log(domain.inside.radius) if domain.inside is not None else -math.inf
        t_hi = (
            -math.log(domain.singular.exclusion_radius)
            if domain.singular
            else math.inf
        )
        t_range = (t_lo, t_hi)

    def v(t):
        r = np.exp(-np.atleast_1d(t))
        values = r**k * factor.u(r[:, None] * direction)
        return values if np.ndim(t) else float(values[0])

    def dv_dt(t):
        r = np.exp(-np.atleast_1d(t))
        points = r[:, None] * direction
        radial = factor.grad(points) @ direction
        values = -k * r**k * factor.u(points) - r ** (k + 1) * radial
        return values if np.ndim(t) else float(values[0])

    def d2v_dt2(t):
        r = np.exp(-np.atleast_1d(t))
        points = r[:, None] * direction
        values = k * k * r**k * factor.u(points) + r ** (k + 2) * factor.laplacian(points)
        return values if np.ndim(t) else float(values[0])

    t_first = max(t_range[0], -5.0)
    t_last = min(t_range[1], 5.0)
    t = np.linspace(t_first, t_last, samples)
    r = np.exp(-t)
    reference = factor.u(r[:, None] * direction)
    rays = np.vstack((np.eye(n), -np.eye(n)))
    for ray in rays:
        other = factor.u(r[:, None] * ray)
        mismatch = np.max(np.abs(other - reference) / np.abs(reference))
        if mismatch > symmetry_tolerance:
            raise SymmetryError(
                f"The factor is not rotationally symmetric about the origin:"
                f" rays differ by {mismatch:.3g} (relative)"
            )
    LOGGER.debug("Cross-ray symmetry verified at %d times", samples)
    return CylinderProfile(n, v, dv_dt, d2v_dt2, t_range)


def yamabe_residual(factor: ConformalFactor, x):
    """The defect of the constant scalar curvature equation

    Parameters
    ----------
    factor : ConformalFactor
        The conformal factor u
    x : n-vector or (m, n) array
        The point(s) to evaluate

    Returns
    -------
    float or ndarray
        Delta u + (n(n-2)/4) u^((n+2)/(n-2)), which vanishes exactly where g
        has scalar curvature n(n-1)

    Raises
    ------
    DomainError
        If any point lies outside the factor's domain
    """
    n = factor.n
    u = factor.u(x)
    return factor.laplacian(x, check=False) + n * (n - 2) / 4 * np.power(
        u, (n + 2) / (n - 2)
    )


def scalar_curvature(factor: ConformalFactor, x):
    """Pointwise scalar curvature -(4(n-1)/(n-2)) u^(-(n+2)/(n-2)) Delta u of g"""
    n = factor.n
    u = factor.u(x)
    return (
        -4 * (n - 1) / (n - 2)
        * np.power(u, -(n + 2) / (n - 2))
        * factor.laplacian(x, check=False)
    )


def mean_curvature_sphere(
    metric: ConformalMetric | ConformalFactor,
    ball: Ball,
    x,
    orientation: str = "inward",
):
    """Mean curvature of a Euclidean sphere in the metric g

    Parameters
    ----------
    metric : ConformalMetric or ConformalFactor
        The metric (or its factor u)
    ball : Ball
        The ball whose boundary is measured
    x : n-vector or (m, n) array
        Point(s) on the boundary of the ball
    orientation : str, optional
        "inward" (the default) or "outward". The flat unit sphere has mean
        curvature 1 with respect to the inward normal.

    Returns
    -------
    float or ndarray
        h(g) = u^(-2/(n-2)) h0 - (2/(n-2)) u^(-n/(n-2)) du/dnu, where h0 is
        +1/radius (inward) or -1/radius (outward)

    Raises
    ------
    GeometryError
        If a point is not on the sphere (to within 1e-12 max(1, radius))
    DomainError
        If a point lies outside the factor's domain
    """
    factor = _factor_of(metric)
    n = factor.n
    points, single = _as_points(x, n)
    offsets = points - ball.center
    distances = np.linalg.norm(offsets, axis=1)
    if np.any(
        np.abs(distances - ball.radius) > ON_SPHERE_TOLERANCE * max(1.0, ball.radius)
    ):
        raise GeometryError("Mean curvature requested at a point off the sphere")
    if orientation == "inward":
        normals = -offsets / distances[:, None]
        flat = 1 / ball.radius
    elif orientation == "outward":
        normals = offsets / distances[:, None]
        flat = -1 / ball.radius
    else:
        raise ValueError(f"Unknown orientation: {orientation}")

    u = factor.u(points)
    normal_derivative = np.sum(factor.grad(points, check=False) * normals, axis=1)
    h = flat * u ** (-2 / (n - 2)) - 2 / (n - 2) * u ** (-n / (n - 2)) * normal_derivative
    return _unwrap(h, single)


def cylinder_end_mean_curvature(profile: CylinderProfile, t):
    """Mean curvature -(2/(n-2)) v^(-n/(n-2)) dv/dt of the slice {t} of the
    cylinder, measured towards increasing t"""
    profile.check(t)
    n = profile.n
    return -2 / (n - 2) * profile.v(t) ** (-n / (n - 2)) * profile.dv_dt(t)


class AsymptoticBounds(NamedTuple):
    """Sampled bounds C1 <= u |x - q|^((n-2)/2) <= C2"""

    lower: float
    upper: float


def asymptotic_bounds_check(
    factor: ConformalFactor,
    annuli: Sequence[tuple[float, float]],
    center: Sequence[float] | None = None,
    radial_samples: int = 2000,
    directions: np.ndarray | None = None,
) -> AsymptoticBounds:
    """Sample u |x - q|^((n-2)/2) over annuli around a singular point

    Parameters
    ----------
    factor : ConformalFactor
        The factor to bound
    annuli : list of (r_in, r_out)
        The annuli, in any order
    center : n-vector, optional
        The singular point q. Defaults to the factor's only singular point, or
        the origin if there is none.
    radial_samples : int, optional
        The number of log-spaced radii sampled in each annulus
    directions : (m, n) array, optional
        Unit vectors to sample along. Defaults to the 2n coordinate directions.

    Returns
    -------
    AsymptoticBounds
        The smallest and largest sampled values over all annuli

    Raises
    ------
    DomainError
        If an annulus reaches into an excluded region
    """
    n = factor.n
    if center is None:
        singular = factor.domain.singular.points
        center = singular[0] if len(singular) == 1 else np.zeros(n)
    center = np.asarray(center, dtype=float)
    if directions is None:
        directions = np.vstack((np.eye(n), -np.eye(n)))

    lower, upper = math.inf, -math.inf
    per_annulus = []
    for r_in, r_out in sorted(annuli):
        if not 0 < r_in < r_out:
            raise DomainError(f"Invalid annulus ({r_in}, {r_out})")
        radii = np.geomspace(r_in, r_out, radial_samples)
        points = (center + radii[:, None, None] * directions[None, :, :]).reshape(-1, n)
        scaled = factor.u(points) * np.repeat(radii, len(directions)) ** ((n - 2) / 2)
        low, high = float(scaled.min()), float(scaled.max())
        per_annulus.append((low, high))
        LOGGER.info("Annulus [%.3g, %.3g]: %.9g <= u r^k <= %.9g", r_in, r_out, low, high)
        lower, upper = min(lower, low), max(upper, high)

    if len(per_annulus) > 1:
        (low_0, high_0), (low_1, high_1) = per_annulus[0], per_annulus[1]
        if abs(low_0 - low_1) > 0.1 * max(low_1, 1e-300) or abs(
            high_0 - high_1
        ) > 0.1 * high_1:
            LOGGER.warning("The asymptotic bounds have not stabilized near the center")
    return AsymptoticBounds(lower, upper)


def sample_factor(factor: ConformalFactor, points: np.ndarray) -> np.ndarray:
    """Tabulate a factor for export

    Returns
    -------
    ndarray
        Rows of (x1..xn, u, du/dx1..du/dxn, Delta u)
    """
    points, _ = _as_points(points, factor.n)
    return np.column_stack(
        (
            points,
            factor.u(points),
            factor.grad(points, check=False),
            factor.laplacian(points, check=False),
        )
    )


def random_points_in_annulus(
    n: int,
    count: int,
    r_in: float,
    r_out: float,
    rng: np.random.Generator,
    center: Sequence[float] | None = None,
) -> np.ndarray:
    """Random points with log-uniform radius in an annulus"""
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    radii = np.exp(rng.uniform(math.log(r_in), math.log(r_out), count))
    return center + radii[:, None] * sphere_directions(n, count, rng)
