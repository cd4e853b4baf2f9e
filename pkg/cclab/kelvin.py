"""Sphere inversions and the Kelvin transform of conformal factors"""
import logging
from typing import NamedTuple, Sequence

import numpy as np

from .conformal import (
    ON_SPHERE_TOLERANCE,
    Ball,
    ConformalFactor,
    Domain,
    HalfSpace,
    SingularSet,
    _as_points,
    _unwrap,
)
from .errors import DomainError, GeometryError

LOGGER = logging.getLogger(__name__)

# relative tolerance for deciding that a sphere or plane passes through the pole
THROUGH_POLE_TOLERANCE = 1e-12


class Inversion(NamedTuple):
    """The inversion x -> p + scale^2 (x - p) / |x - p|^2"""

    center: np.ndarray
    scale: float = 1.0

    @classmethod
    def of(cls, center: Sequence[float], scale: float = 1.0) -> "Inversion":
        """Create an inversion, validating its scale

        Raises
        ------
        DomainError
            If the scale is not positive
        """
        if not scale > 0:
            raise DomainError(f"The inversion scale must be positive (got {scale})")
        return cls(np.asarray(center, dtype=float), float(scale))

    @property
    def n(self) -> int:
        return len(self.center)


class ExteriorRegionMap(NamedTuple):
    """Where the interior of a ball or half-space lands under an inversion

    Attributes
    ----------
    image : Ball or HalfSpace
        The image of the bounding sphere (or plane), as a region
    exterior : bool
        True when the interior is carried to the complement of `image`
        (only possible when `image` is a Ball)
    """

    image: Ball | HalfSpace
    exterior: bool


def _invert(inversion: Inversion, points: np.ndarray) -> np.ndarray:
    offsets = points - inversion.center
    distance2 = np.sum(offsets**2, axis=1)
    if np.any(distance2 == 0):
        raise DomainError("The center of an inversion has no image")
    return inversion.center + inversion.scale**2 * offsets / distance2[:, None]


def invert_point(inversion: Inversion, x) -> np.ndarray:
    """Apply an inversion to a point (n,) or to points (m, n)

    Raises
    ------
    DomainError
        If any point is the center of the inversion
    """
    points, single = _as_points(x, inversion.n)
    return _unwrap(_invert(inversion, points), single)


def _passes_through_center(inversion: Inversion, ball: Ball) -> bool:
    distance = np.linalg.norm(ball.center - inversion.center)
    return abs(distance - ball.radius) < THROUGH_POLE_TOLERANCE * max(1.0, ball.radius)


def invert_ball(inversion: Inversion, ball: Ball) -> Ball | HalfSpace:
    """The image of a ball's bounding sphere

    Parameters
    ----------
    inversion : Inversion
        The inversion
    ball : Ball
        The ball

    Returns
    -------
    Ball or HalfSpace
        A ball when the sphere avoids the center of the inversion. Otherwise
        the half-space that is the image of the ball's interior, bounded by
        the image hyperplane.
    """
    p, rho2 = inversion.center, inversion.scale**2
    offset = ball.center - p
    if _passes_through_center(inversion, ball):
        axis = offset / ball.radius
        return HalfSpace(-axis, -(axis @ p + rho2 / (2 * ball.radius)))
    denominator = offset @ offset - ball.radius**2
    return Ball(p + rho2 * offset / denominator, rho2 * ball.radius / abs(denominator))


def invert_halfspace(inversion: Inversion, halfspace: HalfSpace) -> Ball | HalfSpace:
    """The image of a half-space's bounding hyperplane

    Returns
    -------
    Ball or HalfSpace
        The ball bounded by the image sphere, which passes through the center
        of the inversion. A hyperplane through the center is its own image, in
        which case the half-space itself is returned.
    """
    p, rho2 = inversion.center, inversion.scale**2
    height = halfspace.offset - halfspace.normal @ p
    if abs(height) < THROUGH_POLE_TOLERANCE * max(1.0, abs(halfspace.offset)):
        return halfspace
    return Ball(p + rho2 / (2 * height) * halfspace.normal, rho2 / (2 * abs(height)))


def exterior_region_map(
    inversion: Inversion, region: Ball | HalfSpace
) -> ExteriorRegionMap:
    """Work out where the interior of a ball or half-space is carried

    Returns
    -------
    ExteriorRegionMap
        The image of the boundary, and whether the interior lands outside it
    """
    p = inversion.center
    if isinstance(region, Ball):
        image = invert_ball(inversion, region)
        if isinstance(image, HalfSpace):
            return ExteriorRegionMap(image, False)
        return ExteriorRegionMap(image, bool(np.linalg.norm(region.center - p) < region.radius))
    image = invert_halfspace(inversion, region)
    if isinstance(image, HalfSpace):
        return ExteriorRegionMap(image, False)
    return ExteriorRegionMap(image, bool(region.signed_distance(p) < 0))


def transport_singular_set(inversion: Inversion, singular: SingularSet) -> SingularSet:
    """Carry a singular set through an inversion

    Returns
    -------
    SingularSet
        The images of the singular points, with an exclusion radius large
        enough to cover the image of every excluded ball

    Raises
    ------
    GeometryError
        If the center of the inversion lies in an excluded ball
    """
    if not singular:
        return singular
    images = _invert(inversion, singular.points)
    radius = 0.0
    for point, image in zip(singular.points, images):
        excluded = Ball(point, singular.exclusion_radius)
        if np.linalg.norm(point - inversion.center) <= singular.exclusion_radius:
            raise GeometryError("The inversion center lies in an excluded ball")
        image_ball = invert_ball(inversion, excluded)
        radius = max(radius, image_ball.radius + np.linalg.norm(image_ball.center - image))
    return SingularSet(images, float(radius))


def _transport_domain(
    inversion: Inversion, domain: Domain, pole_exclusion: float
) -> Domain:
    n = inversion.n
    singular = transport_singular_set(inversion, domain.singular)
    inside = outside = halfspace = None
    regions = [
        (region, interior)
        for region, interior in (
            (domain.inside, True),
            (domain.outside, False),
            (domain.halfspace, True),
        )
        if region is not None
    ]
    for region, interior in regions:
        image, exterior = exterior_region_map(inversion, region)
        if isinstance(image, HalfSpace):
            if not interior:
                image = HalfSpace(-image.normal, -image.offset)
            if halfspace is not None:
                raise GeometryError("The image domain needs more than one half-space")
            halfspace = image
        elif exterior == interior:
            if outside is not None:
                raise GeometryError("The image domain needs more than one excluded ball")
            outside = image
        else:
            if inside is not None:
                raise GeometryError("The image domain needs more than one bounding ball")
            inside = image

    if domain.inside is None:
        # the pole is the image of infinity, which the original domain reaches
        points = np.vstack((singular.points.reshape(-1, n), inversion.center))
        singular = SingularSet(points, max(singular.exclusion_radius, pole_exclusion))
    return Domain(singular, inside, outside, halfspace)


def kelvin_transform(
    inversion: Inversion, factor: ConformalFactor, pole_exclusion: float = 1e-6
) -> ConformalFactor:
    """The Kelvin transform of a conformal factor

    Parameters
    ----------
    inversion : Inversion
        The inversion I, with center p and scale rho
    factor : ConformalFactor
        The factor u
    pole_exclusion : float, optional
        The radius excluded around p when the original domain is unbounded

    Returns
    -------
    ConformalFactor
        v(y) = (rho / |y - p|)^(n-2) u(I(y)), defined on the image of the
        factor's domain. Its metric is the pull-back of u's metric through I,
        so solutions map to solutions. Analytic derivatives are assembled by
        the chain rule, and a finite-difference factor stays finite-difference.
    """
    n = factor.n
    if inversion.n != n:
        raise ValueError(f"The inversion is in R^{inversion.n}, not R^{n}")
    p, rho = inversion.center, inversion.scale

    def _pullback(y):
        offsets = y - p
        distance2 = np.sum(offsets**2, axis=1)
        if np.any(distance2 == 0):
            raise DomainError("The Kelvin transform is undefined at the inversion center")
        images = p + rho * rho * offsets / distance2[:, None]
        weight = (rho * rho / distance2) ** ((n - 2) / 2)
        return offsets, distance2, images, weight

    def value(y):
        _, _, images, weight = _pullback(y)
        return weight * factor.u(images, check=False)

    def gradient(y):
        offsets, distance2, images, weight = _pullback(y)
        u = factor.u(images, check=False)
        grad_u = factor.grad(images, check=False)
        radial = np.sum(offsets * grad_u, axis=1)
        chain = (
            rho
            * rho
            * (
                grad_u / distance2[:, None]
                - 2 * offsets * (radial / distance2**2)[:, None]
            )
        )
        return weight[:, None] * (
            -(n - 2) * offsets * (u / distance2)[:, None] + chain
        )

    def laplacian(y):
        _, distance2, images, _ = _pullback(y)
        return (rho * rho / distance2) ** ((n + 2) / 2) * factor.laplacian(
            images, check=False
        )

    domain = _transport_domain(inversion, factor.domain, pole_exclusion)
    LOGGER.debug("Kelvin transform about %s, image domain %s", p.tolist(), domain)
    return ConformalFactor(
        n,
        value,
        domain,
        gradient,
        laplacian,
        derivative_mode=factor.derivative_mode,
        spacing=factor.spacing,
        label=f"kelvin({factor.label})",
    )


def kelvin_bubble_parameters(
    inversion: Inversion, lam: float, center: Sequence[float]
) -> tuple[float, np.ndarray]:
    """The scale and center of the Kelvin transform of a bubble

    Returns
    -------
    float
        rho^2 lam / (lam^2 + |c - p|^2)
    ndarray
        p + rho^2 (c - p) / (lam^2 + |c - p|^2)
    """
    p, rho2 = inversion.center, inversion.scale**2
    offset = np.asarray(center, dtype=float) - p
    denominator = lam * lam + offset @ offset
    return rho2 * lam / denominator, p + rho2 * offset / denominator


def sigma_boundary_residual(v: ConformalFactor, sigma: Ball, h: float, x):
    """The defect of the boundary condition satisfied by a Kelvin transform
    on the image sphere

    Parameters
    ----------
    v : ConformalFactor
        The transformed factor, defined outside `sigma`
    sigma : Ball
        The ball B(a, r) whose boundary is the image of the original boundary
    h : float
        The mean curvature of the original boundary at the preimage point
    x : n-vector or (m, n) array
        Point(s) on the boundary of `sigma`

    Returns
    -------
    float or ndarray
        dv/dnu + ((n-2)/(2r)) v + ((n-2)/2) h v^(n/(n-2)), with nu = (x - a)/r
        pointing into the exterior region

    Raises
    ------
    GeometryError
        If a point is not on the sphere
    """
    n = v.n
    points, single = _as_points(x, n)
    offsets = points - sigma.center
    distances = np.linalg.norm(offsets, axis=1)
    if np.any(
        np.abs(distances - sigma.radius)
        > ON_SPHERE_TOLERANCE * max(1.0, sigma.radius)
    ):
        raise GeometryError("The boundary residual was requested off the sphere")
    normals = offsets / distances[:, None]
    values = v.u(points)
    normal_derivative = np.sum(v.grad(points, check=False) * normals, axis=1)
    residual = (
        normal_derivative
        + (n - 2) / (2 * sigma.radius) * values
        + (n - 2) / 2 * h * values ** (n / (n - 2))
    )
    return _unwrap(residual, single)


class RigidMotion(NamedTuple):
    """The orientation-preserving isometry x -> rotation @ x + translation"""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "RigidMotion":
        return cls(np.eye(n), np.zeros(n))

    def apply(self, x) -> np.ndarray:
        """Move a point (n,) or points (m, n)"""
        return np.asarray(x, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidMotion":
        return RigidMotion(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, first: "RigidMotion") -> "RigidMotion":
        """The motion that applies `first`, then this one"""
        return RigidMotion(
            self.rotation @ first.rotation,
            self.rotation @ first.translation + self.translation,
        )

    def move_ball(self, ball: Ball) -> Ball:
        return Ball(self.apply(ball.center), ball.radius)

    def move_halfspace(self, halfspace: HalfSpace) -> HalfSpace:
        normal = self.rotation @ halfspace.normal
        return HalfSpace(normal, halfspace.offset + normal @ self.translation)


def translation(n: int, shift: float | Sequence[float]) -> RigidMotion:
    """A pure translation, by a vector or (given a scalar) along x^n"""
    if np.ndim(shift) == 0:
        vector = np.zeros(n)
        vector[-1] = shift
    else:
        vector = np.asarray(shift, dtype=float)
    return RigidMotion(np.eye(n), vector)


def normalize_frame(halfspace: HalfSpace) -> RigidMotion:
    """The rigid motion taking a half-space onto {x^n >= 0}

    Parameters
    ----------
    halfspace : HalfSpace
        The half-space {<normal, x> <= offset}

    Returns
    -------
    RigidMotion
        A rotation (determinant +1) taking the normal to -e_n, followed by a
        translation along x^n, so the bounding plane becomes {x^n = 0}
    """
    normal = halfspace.normal / np.linalg.norm(halfspace.normal)
    n = len(normal)
    e_n = np.eye(n)[-1]
    axis = normal + e_n
    if np.linalg.norm(axis) < 1e-12:
        rotation = np.eye(n)
    else:
        householder = np.eye(n) - 2 * np.outer(axis, axis) / (axis @ axis)
        flip = np.eye(n)
        flip[0, 0] = -1
        rotation = flip @ householder
    return RigidMotion(rotation, halfspace.offset * e_n)


def move_factor(motion: RigidMotion, factor: ConformalFactor) -> ConformalFactor:
    """The factor z -> u(M^-1 z) seen after applying a rigid motion M"""
    inverse = motion.inverse()
    rotation = motion.rotation

    def value(z):
        return factor.u(inverse.apply(z), check=False)

    def gradient(z):
        return factor.grad(inverse.apply(z), check=False) @ rotation.T

    def laplacian(z):
        return factor.laplacian(inverse.apply(z), check=False)

    domain = factor.domain
    singular = domain.singular
    if singular:
        singular = SingularSet(motion.apply(singular.points), singular.exclusion_radius)
    moved = Domain(
        singular,
        motion.move_ball(domain.inside) if domain.inside is not None else None,
        motion.move_ball(domain.outside) if domain.outside is not None else None,
        motion.move_halfspace(domain.halfspace) if domain.halfspace is not None else None,
    )
    return ConformalFactor(
        factor.n,
        value,
        moved,
        gradient,
        laplacian,
        derivative_mode=factor.derivative_mode,
        spacing=factor.spacing,
        label=factor.label,
    )
