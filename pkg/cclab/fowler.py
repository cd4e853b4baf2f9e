"""Fowler solutions: the cylindrical Yamabe ODE as a first-order Hamiltonian system

On the cylinder S^{n-1} x R a rotationally symmetric conformal factor v(t)
of a metric with scalar curvature n(n-1) solves

    v'' - ((n-2)^2 / 4) v + (n(n-2) / 4) v^((n+2)/(n-2)) = 0,

which, with w = v', is the Hamiltonian system generated by

    H(v, w) = w^2 - ((n-2)^2 / 4) v^2 + ((n-2)^2 / 4) v^(2n/(n-2)).

The periodic orbits around the equilibrium (v0, 0) are the Fowler solutions.
They are parametrized by their minimum value epsilon in (0, v0] and by the
time T at which that minimum is attained.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import (
    DegenerateOrbitError,
    DomainError,
    InsufficientSpanError,
    InvalidDimensionError,
    OrbitEscapeError,
)
from .logging import IMPORTANT

LOGGER = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
EVENT_TOLERANCE = 1e-12

# relative slack when deciding that epsilon sits on the equilibrium
_EQUILIBRIUM_SLACK = 1e-12


class PhasePoint(NamedTuple):
    """A point (v, w = dv/dt) of the phase plane

    The fields may also hold equal-length arrays of values.
    """

    v: float
    w: float


class _Coefficients(NamedTuple):
    linear: float  # (n-2)^2 / 4
    nonlinear: float  # n(n-2) / 4
    exponent: float  # (n+2) / (n-2)


def validate_dimension(n: int) -> int:
    """Ensure that the given dimension is an integer no smaller than 3

    Parameters
    ----------
    n : int
        The dimension

    Returns
    -------
    int
        The dimension, as an int

    Raises
    ------
    InvalidDimensionError
        If `n` is not an integer or if it is less than 3
    """
    if isinstance(n, bool) or int(n) != n or n < 3:
        raise InvalidDimensionError(f"n must be ≥ 3 (got {n})")
    return int(n)


def _coefficients(n: int) -> _Coefficients:
    return _Coefficients((n - 2) ** 2 / 4, n * (n - 2) / 4, (n + 2) / (n - 2))


def equilibrium_v0(n: int) -> float:
    """The positive equilibrium of the cylindrical ODE

    Parameters
    ----------
    n : int
        The dimension (at least 3)

    Returns
    -------
    float
        v0 = ((n-2)/n)^((n-2)/4), the scaling that gives the round cylinder
        scalar curvature n(n-1)

    Raises
    ------
    InvalidDimensionError
        If n < 3
    """
    n = validate_dimension(n)
    return ((n - 2) / n) ** ((n - 2) / 4)


def linearized_period(n: int) -> float:
    """The small-amplitude limit 2 pi / sqrt(n - 2) of the Fowler period"""
    n = validate_dimension(n)
    return 2 * math.pi / math.sqrt(n - 2)


def hamiltonian(point: PhasePoint | tuple, n: int) -> float:
    """Evaluate the Hamiltonian energy at a phase-plane point

    Parameters
    ----------
    point : PhasePoint or (v, w) tuple
        The point(s) to evaluate. Arrays are supported.
    n : int
        The dimension

    Returns
    -------
    float or ndarray
        H(v, w) = w^2 - ((n-2)^2/4) v^2 + ((n-2)^2/4) |v|^(2n/(n-2))

    Notes
    -----
    H is even in v (the equilibria are (0, 0) and (+/-v0, 0)), which is how
    negative values of v are handled.
    """
    n = validate_dimension(n)
    v, w = point
    coefficient = (n - 2) ** 2 / 4
    return (
        np.square(w)
        - coefficient * np.square(v)
        + coefficient * np.abs(v) ** (2 * n / (n - 2))
    )


def vector_field(point: PhasePoint | tuple, n: int) -> PhasePoint:
    """The Hamiltonian vector field (dv/dt, dw/dt)

    Parameters
    ----------
    point : PhasePoint or (v, w) tuple
        The point(s) to evaluate. Arrays are supported.
    n : int
        The dimension

    Returns
    -------
    PhasePoint
        (w, ((n-2)^2/4) v - (n(n-2)/4) v^((n+2)/(n-2)))

    Raises
    ------
    DomainError
        If v < 0, where the fractional power is undefined
    """
    n = validate_dimension(n)
    v, w = point
    if np.any(np.asarray(v) < 0):
        raise DomainError("The vector field is only defined for v ≥ 0")
    linear, nonlinear, exponent = _coefficients(n)
    return PhasePoint(w, linear * v - nonlinear * np.power(v, exponent))


@dataclass(frozen=True)
class FowlerParams:
    """Parameters of a Fowler solution

    Attributes
    ----------
    n : int
        The dimension
    epsilon : float
        The minimum value attained by v, in (0, v0]
    phase_T : float
        The time at which v attains its minimum
    """

    n: int
    epsilon: float
    phase_T: float = 0.0

    def __post_init__(self):
        validate_dimension(self.n)
        v0 = equilibrium_v0(self.n)
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive (got {self.epsilon})")
        if self.epsilon > v0 * (1 + _EQUILIBRIUM_SLACK):
            raise DomainError(
                f"epsilon must not exceed v0 = {v0:.17g} for n = {self.n}"
                f" (got {self.epsilon})"
            )

    @classmethod
    def from_fraction(
        cls, n: int, fraction: float, phase_T: float = 0.0
    ) -> "FowlerParams":
        """Specify epsilon as a fraction of v0(n)"""
        return cls(n, fraction * equilibrium_v0(n), phase_T)

    @property
    def is_equilibrium(self) -> bool:
        """Whether these parameters describe the constant solution v = v0"""
        return self.epsilon >= equilibrium_v0(self.n) * (1 - _EQUILIBRIUM_SLACK)


@dataclass(frozen=True, eq=False)
class FowlerTrajectory:
    """Dense samples of an orbit of the cylindrical ODE

    Attributes
    ----------
    t : ndarray
        Strictly increasing sample times
    v : ndarray
        The conformal factor at each sample
    w : ndarray
        dv/dt at each sample
    step : float
        The integration step
    n : int
        The dimension
    params : FowlerParams or None
        The Fowler parameters, when the orbit was started from a minimum
    """

    t: np.ndarray
    v: np.ndarray
    w: np.ndarray
    step: float
    n: int
    params: FowlerParams | None = None

    @property
    def samples(self) -> np.ndarray:
        """The samples as rows of (t, v, w)"""
        return np.column_stack((self.t, self.v, self.w))

    @property
    def span(self) -> tuple[float, float]:
        """The first and last sample times"""
        return float(self.t[0]), float(self.t[-1])

    @cached_property
    def dw_dt(self) -> np.ndarray:
        """dw/dt at each sample, straight from the vector field"""
        return vector_field((self.v, self.w), self.n).w

    @cached_property
    def _splines(self) -> tuple[CubicHermiteSpline, CubicHermiteSpline]:
        return (
            CubicHermiteSpline(self.t, self.v, self.w),
            CubicHermiteSpline(self.t, self.w, self.dw_dt),
        )

    def check_times(self, t) -> None:
        """Raise a DomainError if any of the given times are outside the span"""
        t_first, t_last = self.span
        slack = 1e-9 * self.step
        t = np.asarray(t)
        if np.any(t < t_first - slack) or np.any(t > t_last + slack):
            raise DomainError(
                f"Requested times fall outside the trajectory span"
                f" [{t_first:.17g}, {t_last:.17g}]"
            )

    def interpolate(self, t) -> PhasePoint:
        """Evaluate (v, w) at arbitrary times via cubic Hermite interpolation

        Parameters
        ----------
        t : float or array
            The time(s) to evaluate, within the sampled span

        Returns
        -------
        PhasePoint
            The interpolated values

        Raises
        ------
        DomainError
            If any time falls outside the sampled span
        """
        self.check_times(t)
        v_spline, w_spline = self._splines
        v, w = v_spline(t), w_spline(t)
        if np.ndim(t) == 0:
            return PhasePoint(float(v), float(w))
        return PhasePoint(v, w)

    def hamiltonian(self) -> np.ndarray:
        """The Hamiltonian energy at each sample"""
        return hamiltonian((self.v, self.w), self.n)

    def profile(self):
        """The orbit as a CylinderProfile, smooth enough for Euclidean
        finite differencing

        Returns
        -------
        conformal.CylinderProfile
            A profile defined over the sampled span
        """
        from .conformal import fowler_profile

        return fowler_profile(self)


def phase_point_at(trajectory: FowlerTrajectory, t) -> PhasePoint:
    """Evaluate a sampled orbit at arbitrary times (see
    `FowlerTrajectory.interpolate`)"""
    return trajectory.interpolate(t)


def _rk4_step(
    v: float, w: float, h: float, coefficients: _Coefficients
) -> tuple[float, float]:
    """Advance (v, w) by one classical Runge-Kutta step of size h"""
    linear, nonlinear, exponent = coefficients

    def accel(v_: float, w_: float) -> float:
        if v_ < 0 or (v_ == 0 and w_ != 0):
            raise OrbitEscapeError(
                "The orbit left the half-plane {v > 0}; its energy must be"
                " non-negative (epsilon outside (0, v0])"
            )
        return linear * v_ - nonlinear * v_**exponent

    a1 = accel(v, w)
    v2, w2 = v + 0.5 * h * w, w + 0.5 * h * a1
    a2 = accel(v2, w2)
    v3, w3 = v + 0.5 * h * w2, w + 0.5 * h * a2
    a3 = accel(v3, w3)
    v4, w4 = v + h * w3, w + h * a3
    a4 = accel(v4, w4)
    return (
        v + h / 6 * (w + 2 * w2 + 2 * w3 + w4),
        w + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4),
    )


def _grid_index(offset: float, rounding) -> int:
    nearest = round(offset)
    if abs(offset - nearest) < 1e-9:
        return int(nearest)
    return int(rounding(offset))


def integrate_orbit(
    n: int,
    start: PhasePoint,
    t_start: float,
    t0: float,
    t1: float,
    step: float = DEFAULT_STEP,
    params: FowlerParams | None = None,
) -> FowlerTrajectory:
    """Integrate the cylindrical ODE from arbitrary phase-plane data

    Parameters
    ----------
    n : int
        The dimension
    start : PhasePoint
        The state (v, w) at time `t_start`
    t_start : float
        The time of the initial condition. It does not need to lie in [t0, t1].
    t0, t1 : float
        The span to sample
    step : float, optional
        The fixed Runge-Kutta step. Default is 1e-3.
    params : FowlerParams, optional
        Parameters to attach to the resulting trajectory

    Returns
    -------
    FowlerTrajectory
        Samples on the grid t_start + k * step covering [t0, t1]

    Raises
    ------
    DomainError
        If t1 <= t0 or step <= 0
    OrbitEscapeError
        If v becomes non-positive (only possible for initial data with H >= 0)
    """
    n = validate_dimension(n)
    if not t1 > t0:
        raise DomainError(f"t1 must be greater than t0 (got [{t0}, {t1}])")
    if not step > 0:
        raise DomainError(f"The step must be positive (got {step})")

    k_lo = _grid_index((t0 - t_start) / step, math.floor)
    k_hi = _grid_index((t1 - t_start) / step, math.ceil)
    forward = max(k_hi, 0)
    backward = min(k_lo, 0)
    LOGGER.debug(
        "Integrating n=%d from (%.6g, %.6g) at t=%.6g: %d forward, %d backward steps",
        n,
        start.v,
        start.w,
        t_start,
        forward,
        -backward,
    )

    size = forward - backward + 1
    v = np.empty(size)
    w = np.empty(size)
    origin = -backward
    v[origin], w[origin] = float(start.v), float(start.w)
    coefficients = _coefficients(n)

    state = (v[origin], w[origin])
    for i in range(origin + 1, size):
        state = _rk4_step(*state, step, coefficients)
        v[i], w[i] = state
    state = (v[origin], w[origin])
    for i in range(origin - 1, -1, -1):
        state = _rk4_step(*state, -step, coefficients)
        v[i], w[i] = state

    keep = slice(k_lo - backward, k_hi - backward + 1)
    t = t_start + step * np.arange(k_lo, k_hi + 1, dtype=float)
    t[0] = t0 if abs(t[0] - t0) < 1e-9 * step else t[0]
    t[-1] = t1 if abs(t[-1] - t1) < 1e-9 * step else t[-1]
    return FowlerTrajectory(t, v[keep].copy(), w[keep].copy(), step, n, params)


def integrate(
    params: FowlerParams, t0: float, t1: float, step: float = DEFAULT_STEP
) -> FowlerTrajectory:
    """Integrate a Fowler solution

    Parameters
    ----------
    params : FowlerParams
        The dimension, minimum value epsilon and phase T. The orbit starts
        from (epsilon, 0) at t = T.
    t0, t1 : float
        The span to sample
    step : float, optional
        The fixed Runge-Kutta step. Default is 1e-3.

    Returns
    -------
    FowlerTrajectory
        The sampled orbit

    Raises
    ------
    DomainError
        If t1 <= t0 or step <= 0
    OrbitEscapeError
        If the orbit leaves {v > 0}
    """
    return integrate_orbit(
        params.n,
        PhasePoint(params.epsilon, 0.0),
        params.phase_T,
        t0,
        t1,
        step,
        params=params,
    )


def hamiltonian_drift(trajectory: FowlerTrajectory, relative: bool = False) -> float:
    """The largest deviation of H from its value at the first sample

    Parameters
    ----------
    trajectory : FowlerTrajectory
        The sampled orbit
    relative : bool, optional
        Divide by |H(first sample)|. Default is False.

    Returns
    -------
    float
        max |H(t) - H(t_first)|, optionally relative
    """
    energy = trajectory.hamiltonian()
    drift = float(np.max(np.abs(energy - energy[0])))
    if relative:
        return drift / abs(float(energy[0]))
    return drift


def _refine_crossing(
    v: float, w: float, h: float, coefficients: _Coefficients
) -> tuple[float, float]:
    """Locate where w changes sign within a step of size h starting from (v, w)

    Returns the offset into the step and the value of v there.
    """
    lo, hi = 0.0, h
    sign_lo = math.copysign(1.0, w)
    while hi - lo > EVENT_TOLERANCE:
        mid = 0.5 * (lo + hi)
        _, w_mid = _rk4_step(v, w, mid, coefficients)
        if w_mid == 0:
            lo = hi = mid
            break
        if math.copysign(1.0, w_mid) == sign_lo:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    v_tau, _ = _rk4_step(v, w, tau, coefficients) if tau > 0 else (v, w)
    return tau, v_tau


def period(epsilon: float, n: int, step: float = DEFAULT_STEP) -> float:
    """The period of the Fowler solution with minimum epsilon

    Parameters
    ----------
    epsilon : float
        The minimum value of v, strictly between 0 and v0(n)
    n : int
        The dimension
    step : float, optional
        The integration step. Default is 1e-3.

    Returns
    -------
    float
        The time between consecutive minima

    Raises
    ------
    DomainError
        If epsilon <= 0
    DegenerateOrbitError
        If epsilon >= v0, in which case the orbit is a point

    Notes
    -----
    The orbit is integrated from its minimum until w changes sign from
    negative to positive, and the crossing is refined by bisection (re-taking
    a single Runge-Kutta step of variable length) to 1e-12 in t.
    """
    n = validate_dimension(n)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive (got {epsilon})")
    v0 = equilibrium_v0(n)
    if epsilon >= v0 * (1 - _EQUILIBRIUM_SLACK):
        raise DegenerateOrbitError(
            f"epsilon = {epsilon} is the equilibrium v0 for n = {n}:"
            " the orbit is a single point with no period"
        )
    coefficients = _coefficients(n)
    # generous cap: periods grow only logarithmically as epsilon -> 0
    max_steps = int(1000 * linearized_period(n) / step) + 10

    v, w = float(epsilon), 0.0
    t = 0.0
    passed_maximum = False
    for _ in range(max_steps):
        v_next, w_next = _rk4_step(v, w, step, coefficients)
        if w > 0 >= w_next:
            passed_maximum = True
        elif passed_maximum and w < 0 <= w_next:
            tau, _ = _refine_crossing(v, w, step, coefficients)
            LOGGER.debug("Return to the minimum bracketed at t = %.6g", t)
            return t + tau
        v, w = v_next, w_next
        t += step
    raise DegenerateOrbitError(  # pragma: no cover
        f"No return to the minimum within {max_steps} steps"
    )


class OrbitExtrema(NamedTuple):
    """The extreme values of v along an orbit"""

    v_min: float
    v_max: float


def orbit_extrema(trajectory: FowlerTrajectory) -> OrbitExtrema:
    """Find the minimum and maximum of v along a sampled orbit

    Parameters
    ----------
    trajectory : FowlerTrajectory
        The sampled orbit. It must span at least one full period.

    Returns
    -------
    OrbitExtrema
        (v_min, v_max), each refined to sub-step accuracy

    Raises
    ------
    InsufficientSpanError
        If the trajectory is shorter than one period
    """
    params = trajectory.params
    if params is not None and params.is_equilibrium:
        return OrbitExtrema(float(trajectory.v.min()), float(trajectory.v.max()))

    t_first, t_last = trajectory.span
    if params is not None:
        required = period(params.epsilon, params.n, trajectory.step)
        if t_last - t_first < required * (1 - 1e-9):
            raise InsufficientSpanError(
                f"The trajectory spans {t_last - t_first:.6g}, which is shorter"
                f" than one period ({required:.6g})"
            )

    coefficients = _coefficients(trajectory.n)
    minima: list[float] = []
    maxima: list[float] = []
    v, w = trajectory.v, trajectory.w
    for i in range(len(v) - 1):
        if w[i] == 0:
            value = float(v[i])
        elif w[i] * w[i + 1] < 0:
            _, value = _refine_crossing(
                float(v[i]), float(w[i]), float(trajectory.t[i + 1] - trajectory.t[i]),
                coefficients,
            )
        else:
            continue
        if vector_field((value, 0.0), trajectory.n).w > 0:
            minima.append(value)
        else:
            maxima.append(value)

    if not minima or not maxima:
        raise InsufficientSpanError(
            "The trajectory does not contain both a minimum and a maximum of v"
        )
    return OrbitExtrema(min(minima), max(maxima))


class PeriodRow(NamedTuple):
    """One line of a period table"""

    fraction: float
    epsilon: float
    period: float


def period_table(
    n: int, fractions: Iterable[float], step: float = DEFAULT_STEP
) -> list[PeriodRow]:
    """Tabulate the Fowler period over a grid of epsilon = fraction * v0

    Parameters
    ----------
    n : int
        The dimension
    fractions : list of float
        Fractions of v0 in (0, 1]. The equilibrium (fraction 1) has no
        period and is recorded as NaN.
    step : float, optional
        The integration step. Default is 1e-3.

    Returns
    -------
    list of PeriodRow
        One row per fraction, in the order given

    Notes
    -----
    No monotonicity of P(epsilon) is asserted: the values are simply recorded.
    """
    v0 = equilibrium_v0(n)
    rows: list[PeriodRow] = []
    for fraction in fractions:
        epsilon = fraction * v0
        try:
            value = period(epsilon, n, step)
        except DegenerateOrbitError:
            LOGGER.info("epsilon = v0 is an equilibrium; recording NaN")
            value = math.nan
        rows.append(PeriodRow(float(fraction), epsilon, value))
        LOGGER.info("n=%d  epsilon/v0=%.6g  P=%.12g", n, fraction, value)
    return rows


def descending_phase(
    n: int, epsilon: float, fraction: float = 0.5, step: float = DEFAULT_STEP
) -> float:
    """Pick a time on the decreasing half of a Fowler orbit (phase T = 0)

    Parameters
    ----------
    n : int
        The dimension
    epsilon : float
        The minimum of v
    fraction : float, optional
        Where to land on the decreasing half-period: 0 is the maximum of v,
        1 is the next minimum. Default is 0.5 (mid-descent).
    step : float, optional
        The integration step used to compute the period

    Returns
    -------
    float
        A time t0 with dv/dt(t0) <= 0. For the equilibrium this is 0.

    Raises
    ------
    DomainError
        If the fraction is outside [0, 1]
    """
    if not 0 <= fraction <= 1:
        raise DomainError(f"The descent fraction must be in [0, 1] (got {fraction})")
    if FowlerParams(n, epsilon).is_equilibrium:
        return 0.0
    full = period(epsilon, n, step)
    t0 = 0.5 * full * (1 + fraction)
    LOGGER.log(IMPORTANT, "Descending-branch phase t0 = %.12g (P = %.12g)", t0, full)
    return t0
