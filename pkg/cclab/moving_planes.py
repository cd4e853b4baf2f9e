"""Moving planes: reflection differences, the critical height and the far-field
expansion of decaying solutions"""
import logging
import math
from typing import Any, NamedTuple, Sequence

import numpy as np

from ._pool import evaluate_in_chunks
from .conformal import (
    Ball,
    ConformalFactor,
    SingularSet,
    _as_points,
    radial_power,
    yamabe_residual,
)
from .errors import ConditioningError, DomainError, NoStartError
from .logging import IMPORTANT
from .sampling import sphere_directions

LOGGER = logging.getLogger(__name__)

POSITIVITY_DEAD_BAND = 1e-10
SYMMETRY_TOLERANCE = 1e-6
DEFAULT_LAMBDA_TOLERANCE = 1e-4
UNRELIABLE_SKIP_FRACTION = 0.01


def reflect(x, lam: float) -> np.ndarray:
    """Reflect a point (n,) or points (m, n) across the hyperplane {x^n = lam}"""
    reflected = np.array(x, dtype=float)
    reflected[..., -1] = 2 * lam - reflected[..., -1]
    return reflected


class GridSpec(NamedTuple):
    """A tensor grid over [-L, L]^(n-1) x [-L, lam] with spacing L / cells"""

    half_width: float
    cells: int = 64

    @property
    def spacing(self) -> float:
        return self.half_width / self.cells


class HalfSpaceDomain(NamedTuple):
    """The region below {x^n = lam}, minus an excluded ball and singular set

    Attributes
    ----------
    n : int
        The dimension
    lam : float
        The height of the reflecting plane
    sigma : Ball or None
        The (open) ball removed from the region
    singular : SingularSet
        Singular points and their exclusion radius
    grid : GridSpec
        The sampling grid
    """

    n: int
    lam: float
    sigma: Ball | None
    singular: SingularSet
    grid: GridSpec

    def at(self, lam: float) -> "HalfSpaceDomain":
        """The same region, cut at a different height"""
        return self._replace(lam=float(lam))

    def grid_points(self) -> np.ndarray:
        """The grid points at or below the plane, which is always a grid row"""
        half_width, cells = self.grid
        spacing = self.grid.spacing
        if self.lam < -half_width:
            raise DomainError("The reflecting plane lies below the grid")
        tangential = np.linspace(-half_width, half_width, 2 * cells + 1)
        rows = int(math.floor((self.lam + half_width) / spacing + 1e-9)) + 1
        vertical = self.lam - spacing * np.arange(rows)[::-1]
        mesh = np.meshgrid(*([tangential] * (self.n - 1)), vertical, indexing="ij")
        return np.stack([axis.ravel() for axis in mesh], axis=1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        inside = points[:, -1] <= self.lam
        if self.sigma is not None:
            inside &= np.linalg.norm(points - self.sigma.center, axis=1) >= (
                self.sigma.radius * (1 - 1e-12)
            )
        if self.singular:
            inside &= self.singular.distance(points) >= self.singular.exclusion_radius
        return inside

    @property
    def enclosing_radius(self) -> float:
        """The radius of a ball about the origin containing every exclusion"""
        radius = 0.0
        if self.sigma is not None:
            radius = float(np.linalg.norm(self.sigma.center) + self.sigma.radius)
        if self.singular:
            radius = max(
                radius,
                float(np.linalg.norm(self.singular.points, axis=1).max())
                + self.singular.exclusion_radius,
            )
        return radius


class ReflectionField(NamedTuple):
    """Samples of w_lam = v - v(reflected) over a half-space grid

    Attributes
    ----------
    lam : float
        The height of the reflecting plane
    n : int
        The dimension
    spacing : float
        The grid spacing
    points : ndarray
        The grid points at which w was evaluated, shape (m, n)
    w : ndarray
        The reflection difference at each point
    v : ndarray
        v at each point
    v_reflected : ndarray
        v at each reflected point
    skipped : int
        The number of grid points dropped because their reflection was not
        evaluable
    total : int
        The number of grid points inside the region
    min_w : float
        The smallest value of w off the plane (inf if there are no such points)
    argmin : ndarray or None
        Where that smallest value is attained
    """

    lam: float
    n: int
    spacing: float
    points: np.ndarray
    w: np.ndarray
    v: np.ndarray
    v_reflected: np.ndarray
    skipped: int
    total: int
    min_w: float
    argmin: np.ndarray | None

    @property
    def on_plane(self) -> np.ndarray:
        return self.points[:, -1] == self.lam

    @property
    def skipped_fraction(self) -> float:
        return self.skipped / self.total if self.total else 0.0

    @property
    def unreliable(self) -> bool:
        return self.skipped_fraction > UNRELIABLE_SKIP_FRACTION

    @property
    def positive(self) -> bool:
        """Whether w > 0 off the plane, up to the floating-point dead band"""
        return self.min_w > -POSITIVITY_DEAD_BAND

    def row(self) -> dict[str, Any]:
        """A line of the lambda-scan report"""
        return {
            "lambda": self.lam,
            "min_w": self.min_w if math.isfinite(self.min_w) else None,
            "argmin": None if self.argmin is None else self.argmin.tolist(),
            "skipped": self.skipped,
        }


def w_field(
    v: ConformalFactor, domain: HalfSpaceDomain, threads: int | None = 1
) -> ReflectionField:
    """Sample the reflection difference over a half-space grid

    Parameters
    ----------
    v : ConformalFactor
        The factor
    domain : HalfSpaceDomain
        The region and grid
    threads : int, optional
        Worker threads for the evaluation. Default is 1.

    Returns
    -------
    ReflectionField
        The sampled field. Grid points whose reflection falls outside v's
        domain are skipped and counted.
    """
    points = domain.grid_points()
    valid = domain.contains(points) & v.domain.contains(points)
    points = points[valid]
    reflected = reflect(points, domain.lam)
    evaluable = v.domain.contains(reflected)
    skipped = int(np.count_nonzero(~evaluable))
    total = len(points)
    points, reflected = points[evaluable], reflected[evaluable]

    def evaluate(chunk):
        return v.u(chunk, check=False)

    values = evaluate_in_chunks(evaluate, points, threads)
    values_reflected = evaluate_in_chunks(evaluate, reflected, threads)
    w = values - values_reflected

    off_plane = points[:, -1] < domain.lam
    if np.any(off_plane):
        index = int(np.argmin(np.where(off_plane, w, np.inf)))
        min_w, argmin = float(w[index]), points[index].copy()
    else:
        min_w, argmin = math.inf, None

    field = ReflectionField(
        float(domain.lam),
        v.n,
        domain.grid.spacing,
        points,
        w,
        values,
        values_reflected,
        skipped,
        total,
        min_w,
        argmin,
    )
    LOGGER.debug(
        "lambda=%.9g: %d points, min w=%.6g, %d skipped",
        domain.lam,
        len(points),
        min_w,
        skipped,
    )
    if field.unreliable:
        LOGGER.warning(
            "%.2f%% of the grid points at lambda=%.6g were skipped:"
            " treat this field as unreliable",
            100 * field.skipped_fraction,
            domain.lam,
        )
    return field


def c_lambda(v_val, v_lambda_val, n: int):
    """The coefficient of the linear equation satisfied by w_lam

    Parameters
    ----------
    v_val : float or array
        v at x
    v_lambda_val : float or array
        v at the reflection of x
    n : int
        The dimension

    Returns
    -------
    float or array
        (n(n-2)/4) (v^p - v_lam^p) / (v - v_lam) with p = (n+2)/(n-2), or its
        limit (n(n+2)/4) v^(4/(n-2)) when |v - v_lam| < 1e-9 v

    Raises
    ------
    DomainError
        If either value is not positive
    """
    v = np.asarray(v_val, dtype=float)
    v_lam = np.asarray(v_lambda_val, dtype=float)
    if np.any(v <= 0) or np.any(v_lam <= 0):
        raise DomainError("c_lambda needs positive values of v")
    exponent = (n + 2) / (n - 2)
    close = np.abs(v - v_lam) < 1e-9 * v
    difference = np.where(close, 1.0, v - v_lam)
    quotient = n * (n - 2) / 4 * (v**exponent - v_lam**exponent) / difference
    limit = n * (n + 2) / 4 * v ** (4 / (n - 2))
    result = np.where(close, limit, quotient)
    return float(result) if result.ndim == 0 else result


class LambdaScan(NamedTuple):
    """The report of a search for the critical height

    Attributes
    ----------
    rows : list of dict
        One {lambda, min_w, argmin, skipped} record per height evaluated
    lambda0 : float
        The critical height
    lambda_bar : float
        The starting height, at which w is already positive
    enclosing_radius : float
        The radius of a ball about the origin containing every exclusion
    symmetric : bool
        Whether w vanishes identically at the critical height
    unreliable : bool
        Whether any evaluated field skipped more than 1% of its points
    field : ReflectionField
        The field at the critical height
    below : ReflectionField or None
        The field at the highest height found to fail, where w has a
        negative minimum. None if w stayed positive down to the floor.
    """

    rows: list[dict[str, Any]]
    lambda0: float
    lambda_bar: float
    enclosing_radius: float
    symmetric: bool
    unreliable: bool
    field: ReflectionField
    below: ReflectionField | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda0": self.lambda0,
            "lambda_bar": self.lambda_bar,
            "R": self.enclosing_radius,
            "symmetric": self.symmetric,
            "unreliable": self.unreliable,
            "max_abs_w_at_lambda0": float(np.max(np.abs(self.field.w)))
            if len(self.field.w)
            else 0.0,
            "scan": self.rows,
        }


def scan_lambda(
    v: ConformalFactor,
    domain: HalfSpaceDomain,
    tol: float = DEFAULT_LAMBDA_TOLERANCE,
    ceiling: float | None = None,
    coarse_steps: int = 32,
    threads: int | None = 1,
) -> LambdaScan:
    """Locate the critical height lambda_0 by a downward scan and bisection

    Parameters
    ----------
    v : ConformalFactor
        The factor, which should decay at infinity
    domain : HalfSpaceDomain
        The region and grid (the height it carries is ignored)
    tol : float, optional
        The bisection tolerance. Default is 1e-4.
    ceiling : float, optional
        The height the scan starts from. Default is the grid's half-width.
    coarse_steps : int, optional
        The number of steps in the downward scan from the ceiling to 0
    threads : int, optional
        Worker threads for each field evaluation

    Returns
    -------
    LambdaScan
        The report, with lambda_0 the smallest height (to within `tol`) at
        and above which every sampled field is positive off the plane

    Raises
    ------
    NoStartError
        If w is not positive at the ceiling
    """
    ceiling = domain.grid.half_width if ceiling is None else float(ceiling)
    rows: list[dict[str, Any]] = []
    fields: list[ReflectionField] = []

    def evaluate(lam: float) -> ReflectionField:
        field = w_field(v, domain.at(lam), threads)
        rows.append(field.row())
        fields.append(field)
        return field

    top = evaluate(ceiling)
    if not top.positive:
        raise NoStartError(
            f"w_lambda is not positive at the scan ceiling lambda={ceiling:.6g}"
            f" (min w = {top.min_w:.6g})"
        )

    passing_lam, passing = ceiling, top
    failing_lam, failing = None, None
    delta = ceiling / coarse_steps
    for step in range(1, coarse_steps + 1):
        lam = max(ceiling - step * delta, 0.0)
        field = evaluate(lam)
        if not field.positive:
            failing_lam, failing = lam, field
            break
        passing_lam, passing = lam, field

    if failing_lam is not None:
        while passing_lam - failing_lam > tol:
            lam = 0.5 * (passing_lam + failing_lam)
            field = evaluate(lam)
            if field.positive:
                passing_lam, passing = lam, field
            else:
                failing_lam, failing = lam, field

    symmetric = bool(len(passing.w)) and float(np.max(np.abs(passing.w))) < SYMMETRY_TOLERANCE
    scan = LambdaScan(
        rows,
        passing_lam,
        ceiling,
        domain.enclosing_radius,
        symmetric,
        any(field.unreliable for field in fields),
        passing,
        failing,
    )
    LOGGER.log(
        IMPORTANT,
        "lambda_0 = %.9g after %d field evaluations%s",
        scan.lambda0,
        len(rows),
        " (w vanishes identically)" if symmetric else "",
    )
    return scan


def find_lambda0(
    v: ConformalFactor,
    domain: HalfSpaceDomain,
    tol: float = DEFAULT_LAMBDA_TOLERANCE,
    **kwargs,
) -> float:
    """The critical height lambda_0 (see `scan_lambda` for the full report)"""
    return scan_lambda(v, domain, tol, **kwargs).lambda0


class ExpansionFit(NamedTuple):
    """Least-squares fit of v |x|^(n-2) = a + b.x/|x|^2 + x.Cx/|x|^4 at infinity

    Attributes
    ----------
    a : float
        The leading coefficient
    b : ndarray
        The dipole coefficients
    quadratic : ndarray
        The symmetric matrix C of the next-order term
    radii : list of float
        The radii of the fitted spheres
    remainder_exponent : float
        The log-log slope of the largest remainder
        v - |x|^(2-n) (a + b.x/|x|^2) against radius (NaN when the remainder
        is at round-off level)
    condition_number : float
        The condition number of the design matrix
    """

    a: float
    b: np.ndarray
    quadratic: np.ndarray
    radii: list[float]
    remainder_exponent: float
    condition_number: float


def fit_expansion(
    v: ConformalFactor,
    radii: Sequence[float],
    directions_per_sphere: int | None = None,
) -> ExpansionFit:
    """Fit the far-field expansion of a decaying factor

    Parameters
    ----------
    v : ConformalFactor
        The factor
    radii : list of float
        Radii of the spheres (about the origin) to sample. They should
        enclose every exclusion.
    directions_per_sphere : int, optional
        Samples per sphere. Default is 16 n^2.

    Returns
    -------
    ExpansionFit
        The fitted coefficients and the estimated decay of the remainder

    Raises
    ------
    ConditioningError
        If the radii span less than a factor of 1.5 or the fit is otherwise
        ill-conditioned
    """
    n = v.n
    radii = sorted(float(radius) for radius in radii)
    if len(radii) < 2 or radii[-1] / radii[0] < 1.5:
        raise ConditioningError("The fit radii must span at least a factor of 1.5")
    count = directions_per_sphere or 16 * n * n
    directions = sphere_directions(n, count)
    points = np.vstack([radius * directions for radius in radii])
    r2 = np.sum(points**2, axis=1)

    upper = np.triu_indices(n)
    pairs = points[:, upper[0]] * points[:, upper[1]]
    design = np.column_stack((np.ones(len(points)), points / r2[:, None], pairs / (r2**2)[:, None]))
    target = v.u(points) * r2 ** ((n - 2) / 2)
    condition = float(np.linalg.cond(design))
    LOGGER.debug("Expansion fit: %d samples, condition number %.3g", len(points), condition)
    if condition > 1e12:
        raise ConditioningError(f"The expansion fit is ill-conditioned ({condition:.3g})")
    coefficients, *_ = np.linalg.lstsq(design, target, rcond=None)

    a, b = float(coefficients[0]), coefficients[1 : n + 1]
    quadratic = np.zeros((n, n))
    quadratic[upper] = coefficients[n + 1 :]
    quadratic = 0.5 * (quadratic + quadratic.T)

    remainder = v.u(points) - r2 ** ((2 - n) / 2) * (a + points @ b / r2)
    remainder = np.abs(remainder).reshape(len(radii), count).max(axis=1)
    scale = np.abs(target).reshape(len(radii), count).max(axis=1) * np.asarray(radii) ** (
        2.0 - n
    )
    if np.any(remainder <= 1e-12 * scale):
        exponent = math.nan
    else:
        exponent = float(np.polyfit(np.log(radii), np.log(remainder), 1)[0])
    return ExpansionFit(a, b, quadratic, radii, exponent, condition)


def choose_half_width(
    fit: ExpansionFit,
    enclosing_radius: float,
    decay_tol: float = 0.05,
    maximum: float = 50.0,
) -> float:
    """Pick the grid half-width L so that v < decay_tol * a outside it

    Returns
    -------
    float
        tol^(-1/(n-2)), clipped to [2 * enclosing_radius, maximum]
    """
    n = len(fit.b)
    width = decay_tol ** (-1 / (n - 2))
    return float(min(max(width, 2 * enclosing_radius), maximum))


def reflected_equation_defect(
    v: ConformalFactor, x, lam: float, spacing: float = 1e-3
):
    """How far the sampled w_lam is from solving its linear equation

    Returns
    -------
    float or ndarray
        (Delta w + c_lam w)(x), with the Laplacian from central differences,
        minus the difference of v's Yamabe residuals at x and at its reflection.
        For any v this vanishes up to discretization error.
    """
    points, single = _as_points(x, v.n)
    reflected = reflect(points, lam)

    def w(pts):
        return v.u(pts, check=False) - v.u(reflect(pts, lam), check=False)

    h = spacing * np.maximum(1.0, np.linalg.norm(points, axis=1))
    laplacian = -2 * w(points) * v.n
    for i in range(v.n):
        shift = h[:, None] * np.eye(v.n)[i]
        laplacian += w(points + shift) + w(points - shift)
    laplacian /= h * h

    values, values_reflected = v.u(points), v.u(reflected)
    defect = (
        laplacian
        + c_lambda(values, values_reflected, v.n) * (values - values_reflected)
        - (yamabe_residual(v, points) - yamabe_residual(v, reflected))
    )
    return float(defect[0]) if single else defect


def c_lambda_decay_exponent(
    v: ConformalFactor, lam: float, radii: Sequence[float], count: int = 256
) -> float:
    """The log-log slope of max |c_lam| over spheres about the origin (restricted
    to the region below the plane)"""
    directions = sphere_directions(v.n, count)
    maxima = []
    for radius in radii:
        points = radius * directions
        points = points[points[:, -1] <= lam]
        values = c_lambda(v.u(points), v.u(reflect(points, lam)), v.n)
        maxima.append(float(np.max(np.abs(values))))
    return float(np.polyfit(np.log(radii), np.log(maxima), 1)[0])


def normal_derivative_on_plane(v: ConformalFactor, lam: float, points) -> np.ndarray:
    """dw_lam/dx^n = 2 dv/dx^n at points moved onto {x^n = lam}"""
    points = np.array(np.atleast_2d(points), dtype=float)
    points[:, -1] = lam
    return 2 * v.grad(points)[:, -1]


def auxiliary_weight_laplacian(
    mu: float, x, n: int, spacing: float = 1e-3
) -> tuple[float, float]:
    """Laplacian of the auxiliary weight g = |x|^(-mu), two ways

    Parameters
    ----------
    mu : float
        The exponent, strictly between 0 and n - 2
    x : n-vector
        A nonzero point
    n : int
        The dimension
    spacing : float, optional
        The relative finite-difference spacing

    Returns
    -------
    float
        The closed form -mu (n - 2 - mu) |x|^(-mu-2)
    float
        A central-difference estimate

    Raises
    ------
    DomainError
        If mu is outside (0, n - 2) or x = 0
    """
    if not 0 < mu < n - 2:
        raise DomainError(f"mu must lie strictly between 0 and {n - 2} (got {mu})")
    x = np.asarray(x, dtype=float)
    radius = float(np.linalg.norm(x))
    if radius == 0:
        raise DomainError("The auxiliary weight is singular at the origin")
    closed_form = -mu * (n - 2 - mu) * radius ** (-mu - 2)
    weight = radial_power(n, 1.0, mu, exclusion_radius=min(1e-6, 0.5 * radius))
    return closed_form, float(weight.with_finite_differences(spacing).laplacian(x))


def auxiliary_sign_condition(v_val, v_lambda_val, x, n: int, mu: float | None = None):
    """c_lam + Delta g / g with g = |x|^(-mu), which must be negative far out"""
    mu = (n - 2) / 2 if mu is None else mu
    radius2 = np.sum(np.atleast_2d(x) ** 2, axis=1)
    value = c_lambda(v_val, v_lambda_val, n) - mu * (n - 2 - mu) / radius2
    return float(value[0]) if np.ndim(value) and np.ndim(x) == 1 else value


class MinimumLocationReport(NamedTuple):
    """Where a negative minimum of w_lam sits, and whether the auxiliary
    function argument applies outside R0

    `min_phi` and `argmin_phi` locate the minimum of phi = w_lam / g with
    g = |x|^(-mu). Whenever w_lam has a negative minimum, so does phi, and
    that minimum is at least as far from the origin as the minimum of w_lam.
    """

    status: str
    min_w: float
    argmin: list[float] | None
    argmin_radius: float | None
    inside_R0: bool | None
    max_sign_condition: float | None
    sign_condition_holds: bool | None
    min_phi: float | None
    argmin_phi: list[float] | None
    argmin_phi_radius: float | None
    phi_inside_R0: bool | None


def _off_plane(field: ReflectionField) -> np.ndarray:
    """Sampled points strictly below the plane and away from the origin"""
    return ~field.on_plane & (np.linalg.norm(field.points, axis=1) > 0)


def sign_condition_radius(field: ReflectionField, mu: float | None = None) -> float:
    """The smallest radius R0 beyond which c_lam + Delta g / g < 0 at every
    sampled point off the plane (0 if it holds everywhere)"""
    n = field.n
    mu = (n - 2) / 2 if mu is None else mu
    keep = _off_plane(field)
    if not np.any(keep):
        return 0.0
    condition = auxiliary_sign_condition(
        field.v[keep], field.v_reflected[keep], field.points[keep], n, mu
    )
    failing = condition >= 0
    if not np.any(failing):
        return 0.0
    return float(np.max(np.linalg.norm(field.points[keep][failing], axis=1)))


def minimum_location_check(
    field: ReflectionField, R0: float, mu: float | None = None
) -> MinimumLocationReport:
    """Check that a negative minimum of w_lam lies within R0 of the origin

    Parameters
    ----------
    field : ReflectionField
        The sampled field
    R0 : float
        The radius the minimum should lie within
    mu : float, optional
        The exponent of the auxiliary weight g = |x|^(-mu). Default is (n-2)/2.

    Returns
    -------
    MinimumLocationReport
        status "not-applicable" when the field is nonnegative, otherwise
        "inside" or "outside" according to |argmin| < R0. The sign condition
        c_lam + Delta g / g < 0 is evaluated at every sampled point with
        |x| > R0 off the plane, and phi = w_lam / g is minimized over the
        points off the plane.
    """
    n = field.n
    mu = (n - 2) / 2 if mu is None else mu
    if not 0 < mu < n - 2:
        raise DomainError(f"mu must lie strictly between 0 and {n - 2} (got {mu})")
    if field.argmin is None or field.min_w >= 0:
        return MinimumLocationReport(
            "not-applicable", field.min_w, None, None, None, None, None, None, None, None, None
        )
    radius = float(np.linalg.norm(field.argmin))
    radii = np.linalg.norm(field.points, axis=1)
    far = (radii > R0) & _off_plane(field)
    if np.any(far):
        condition = auxiliary_sign_condition(
            field.v[far], field.v_reflected[far], field.points[far], n, mu
        )
        worst = float(np.max(condition))
        holds = worst < 0
    else:
        worst, holds = None, None

    # phi vanishes at the origin, where g is infinite
    phi = np.where(~field.on_plane, field.w * radii**mu, np.inf)
    index = int(np.argmin(phi))
    phi_radius = float(radii[index])
    inside = radius < R0
    return MinimumLocationReport(
        "inside" if inside else "outside",
        field.min_w,
        field.argmin.tolist(),
        radius,
        inside,
        worst,
        holds,
        float(phi[index]),
        field.points[index].tolist(),
        phi_radius,
        phi_radius < R0,
    )
