"""Tests for sphere inversions and the Kelvin transform"""
import numpy as np
import pytest

from cclab import conformal, kelvin
from cclab.conformal import Ball, HalfSpace
from cclab.errors import DomainError, GeometryError
from cclab.fixtures import relative_residual
from cclab.sampling import random_directions, sphere_directions

UNIT = kelvin.Inversion.of(np.zeros(3))


def _random_points(n: int, count: int = 100, seed: int = 0) -> np.ndarray:
    return conformal.random_points_in_annulus(
        n, count, 0.1, 10.0, np.random.default_rng(seed)
    )


class TestInvertPoint:
    def test_unit_sphere_is_fixed(self):
        points = sphere_directions(3, 25)
        assert kelvin.invert_point(UNIT, points) == pytest.approx(points, abs=1e-15)

    def test_radial_formula(self):
        assert kelvin.invert_point(UNIT, np.array([2.0, 0, 0])).tolist() == [0.5, 0, 0]

    @pytest.mark.parametrize("scale", (1.0, 0.3, 4.0))
    def test_involution(self, scale):
        inversion = kelvin.Inversion.of(np.zeros(4), scale)
        points = _random_points(4)
        twice = kelvin.invert_point(inversion, kelvin.invert_point(inversion, points))
        assert np.max(np.abs(twice - points) / np.linalg.norm(points, axis=1)[:, None]) < 1e-14

    def test_center_has_no_image(self):
        with pytest.raises(DomainError):
            kelvin.invert_point(UNIT, np.zeros(3))

    def test_scale_must_be_positive(self):
        with pytest.raises(DomainError):
            kelvin.Inversion.of(np.zeros(3), 0.0)


class TestInvertBall:
    def test_closed_form(self):
        image = kelvin.invert_ball(UNIT, Ball(np.array([2.0, 0, 0]), 1.0))
        assert isinstance(image, Ball)
        assert image.center == pytest.approx([2 / 3, 0, 0])
        assert image.radius == pytest.approx(1 / 3)

    @pytest.mark.parametrize(
        "center, radius, scale",
        (([0.4, 0.1, -0.3], 0.2, 1.0), ([0.1, 0.0, 0.2], 1.5, 0.5), ([3, 3, 3], 1, 2)),
    )
    def test_boundary_maps_onto_the_image_sphere(self, center, radius, scale):
        inversion = kelvin.Inversion.of([0.2, -0.1, 0.0], scale)
        ball = Ball(np.asarray(center, dtype=float), float(radius))
        image = kelvin.invert_ball(inversion, ball)
        rng = np.random.default_rng(5)
        points = kelvin.invert_point(
            inversion, ball.boundary_points(random_directions(3, 50, rng))
        )
        distances = np.linalg.norm(points - image.center, axis=1)
        assert np.max(np.abs(distances - image.radius)) < 1e-12 * max(1.0, image.radius)

    def test_sphere_through_the_center_becomes_a_plane(self):
        inversion = kelvin.Inversion.of([0.0, 0.0, 1.0])
        ball = Ball(np.zeros(3), 1.0)
        image = kelvin.invert_ball(inversion, ball)
        assert isinstance(image, HalfSpace)
        directions = random_directions(3, 50, np.random.default_rng(2))
        directions = directions[directions[:, 2] < 0.9]
        points = kelvin.invert_point(inversion, ball.boundary_points(directions))
        assert np.max(np.abs(image.signed_distance(points))) < 1e-12 * np.max(
            np.abs(points)
        )

    def test_image_half_space_contains_the_image_of_the_interior(self):
        inversion = kelvin.Inversion.of([0.0, 0.0, 1.0])
        image = kelvin.invert_ball(inversion, Ball(np.zeros(3), 1.0))
        inside = kelvin.invert_point(inversion, 0.5 * sphere_directions(3, 20))
        assert np.all(image.signed_distance(inside) < 0)

    def test_unit_sphere_is_its_own_image(self):
        image = kelvin.invert_ball(UNIT, Ball(np.zeros(3), 1.0))
        assert image.center == pytest.approx(np.zeros(3))
        assert image.radius == pytest.approx(1.0)

    def test_plane_maps_to_a_sphere_through_the_center(self):
        inversion = kelvin.Inversion.of([0.3, 0.0, 0.0], 2.0)
        plane = HalfSpace(np.array([0.0, 0.0, 1.0]), 0.5)
        image = kelvin.invert_halfspace(inversion, plane)
        assert isinstance(image, Ball)
        assert np.linalg.norm(image.center - inversion.center) == pytest.approx(image.radius)
        points = np.array([[x, y, 0.5] for x in (-1.0, 0.0, 2.0) for y in (-3.0, 1.0)])
        distances = np.linalg.norm(kelvin.invert_point(inversion, points) - image.center, axis=1)
        assert distances == pytest.approx(np.full(6, image.radius), rel=1e-12)

    def test_plane_through_the_center_is_fixed(self):
        plane = HalfSpace(np.array([0.0, 1.0, 0.0]), 0.0)
        assert kelvin.invert_halfspace(UNIT, plane) is plane


class TestExteriorRegionMap:
    def test_ball_around_the_center_turns_inside_out(self):
        region = kelvin.exterior_region_map(UNIT, Ball(np.array([0.5, 0, 0]), 1.0))
        assert isinstance(region.image, Ball)
        assert region.exterior

    def test_ball_away_from_the_center(self):
        region = kelvin.exterior_region_map(UNIT, Ball(np.array([2.0, 0, 0]), 1.0))
        assert not region.exterior

    def test_singular_points_land_in_the_image_region(self):
        inversion = kelvin.Inversion.of([0.5, 0.0, 0.0])
        singular = conformal.SingularSet.of([[0.0, 0.0, 0.0], [-0.3, 0.2, 0.1]], 1e-3)
        image_region = kelvin.exterior_region_map(inversion, Ball(np.zeros(3), 1.0))
        transported = kelvin.transport_singular_set(inversion, singular)
        distances = np.linalg.norm(transported.points - image_region.image.center, axis=1)
        assert image_region.exterior
        assert np.all(distances > image_region.image.radius)
        assert transported.exclusion_radius > 0

    def test_center_inside_an_excluded_ball(self):
        singular = conformal.SingularSet.of([[0.0, 0.0, 1e-4]], 1e-3)
        with pytest.raises(GeometryError):
            kelvin.transport_singular_set(UNIT, singular)


class TestKelvinTransform:
    @pytest.mark.parametrize("n", (3, 4, 5))
    def test_standard_bubble_is_invariant(self, n):
        standard = conformal.bubble(n, 1.0)
        transformed = kelvin.kelvin_transform(kelvin.Inversion.of(np.zeros(n)), standard)
        points = _random_points(n)
        assert np.max(np.abs(transformed.u(points) / standard.u(points) - 1)) < 1e-12

    def test_constant_becomes_the_fundamental_solution(self):
        n, scale = 4, 0.7
        inversion = kelvin.Inversion.of([0.1, 0.2, 0.3, 0.4], scale)
        transformed = kelvin.kelvin_transform(inversion, conformal.constant_factor(n))
        points = _random_points(n)
        distance = np.linalg.norm(points - inversion.center, axis=1)
        assert transformed.u(points) == pytest.approx((scale / distance) ** (n - 2), rel=1e-13)

    @pytest.mark.parametrize("n", (3, 4))
    def test_bubble_maps_to_a_bubble(self, n):
        inversion = kelvin.Inversion.of(np.linspace(0.1, 0.5, n), 1.3)
        center = np.linspace(-1.0, 0.0, n)
        transformed = kelvin.kelvin_transform(inversion, conformal.bubble(n, 0.8, center))
        lam, image_center = kelvin.kelvin_bubble_parameters(inversion, 0.8, center)
        expected = conformal.bubble(n, lam, image_center)
        points = _random_points(n)
        assert np.max(np.abs(transformed.u(points) / expected.u(points) - 1)) < 1e-12

    @pytest.mark.parametrize("n", (3, 4, 5))
    def test_solutions_map_to_solutions(self, n):
        inversion = kelvin.Inversion.of(np.eye(n)[0])
        transformed = kelvin.kelvin_transform(
            inversion, conformal.bubble(n, 1.0, 0.2 * np.eye(n)[1])
        )
        assert np.max(relative_residual(transformed, _random_points(n))) < 1e-10

    def test_analytic_gradient_matches_finite_differences(self):
        n = 3
        inversion = kelvin.Inversion.of([0.5, 0.0, 0.0])
        transformed = kelvin.kelvin_transform(inversion, conformal.bubble(n, 1.0))
        points = _random_points(n, 20)
        estimate = transformed.with_finite_differences(1e-5)
        assert estimate.grad(points) == pytest.approx(
            transformed.grad(points), rel=1e-6, abs=1e-8
        )

    def test_cylinder_image_excludes_the_pole_and_the_singular_point(self):
        inversion = kelvin.Inversion.of([0.5, 0.0, 0.0])
        transformed = kelvin.kelvin_transform(inversion, conformal.cylinder_factor(3))
        singular = transformed.domain.singular.points
        assert any(np.allclose(point, [-1.5, 0, 0]) for point in singular)
        assert any(np.allclose(point, [0.5, 0, 0]) for point in singular)
        with pytest.raises(DomainError):
            transformed.u(np.array([0.5, 0.0, 0.0]))

    def test_finite_difference_mode_is_preserved(self):
        factor = conformal.bubble(3, 1.0).with_finite_differences()
        assert not kelvin.kelvin_transform(UNIT, factor).analytic

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kelvin.kelvin_transform(UNIT, conformal.bubble(4, 1.0))


class TestSigmaBoundaryResidual:
    @pytest.fixture(scope="class")
    def inversion(self):
        return kelvin.Inversion.of([0.5, 0.0, 0.0])

    @pytest.fixture(scope="class")
    def sigma(self, inversion):
        image = kelvin.invert_ball(inversion, Ball(np.zeros(3), 1.0))
        assert isinstance(image, Ball)
        return image

    def _preimages(self, count: int = 40) -> np.ndarray:
        return sphere_directions(3, count)

    def test_cylinder_with_a_minimal_boundary(self, inversion, sigma):
        v = kelvin.kelvin_transform(inversion, conformal.cylinder_factor(3))
        points = kelvin.invert_point(inversion, self._preimages())
        residual = kelvin.sigma_boundary_residual(v, sigma, 0.0, points)
        assert np.max(np.abs(residual)) < 1e-8

    def test_boundary_curvature_is_carried_over(self, inversion, sigma):
        factor = conformal.bubble(3, 0.6, [0.2, 0.0, 0.0])
        v = kelvin.kelvin_transform(inversion, factor)
        unit = Ball(np.zeros(3), 1.0)
        for preimage in self._preimages(12):
            h = conformal.mean_curvature_sphere(factor, unit, preimage)
            x = kelvin.invert_point(inversion, preimage)
            assert abs(kelvin.sigma_boundary_residual(v, sigma, h, x)) < 1e-10

    def test_fundamental_solution_about_the_center(self):
        n, radius = 3, 0.8
        sigma = Ball(np.array([1.0, 2.0, 3.0]), radius)
        v = conformal.radial_power(n, 2.0, n - 2, center=sigma.center)
        points = sigma.boundary_points(sphere_directions(n, 10))
        residual = kelvin.sigma_boundary_residual(v, sigma, 0.0, points)
        # dv/dnu = -(n-2) v / r, so only half of it is cancelled
        assert residual == pytest.approx(-(n - 2) / (2 * radius) * v.u(points))

    def test_finite_differences_agree(self, inversion, sigma):
        v = kelvin.kelvin_transform(inversion, conformal.bubble(3, 1.3, [0.0, 0.3, 0.0]))
        points = kelvin.invert_point(inversion, self._preimages(10))
        analytic = kelvin.sigma_boundary_residual(v, sigma, 0.4, points)
        estimate = kelvin.sigma_boundary_residual(
            v.with_finite_differences(1e-4), sigma, 0.4, points
        )
        assert np.max(np.abs(estimate - analytic)) < 1e-6

    def test_point_off_sigma(self, sigma):
        v = conformal.constant_factor(3)
        with pytest.raises(GeometryError):
            kelvin.sigma_boundary_residual(v, sigma, 0.0, sigma.center)


class TestRigidMotions:
    @pytest.mark.parametrize(
        "normal, offset",
        (([0, 0, -1], 0.0), ([0, 0, 1], 2.0), ([1, 1, 0], -0.5), ([0.3, -0.2, 0.9], 1.0)),
    )
    def test_normalize_frame(self, normal, offset):
        normal = np.asarray(normal, dtype=float)
        halfspace = HalfSpace(normal / np.linalg.norm(normal), offset)
        motion = kelvin.normalize_frame(halfspace)
        assert np.linalg.det(motion.rotation) == pytest.approx(1.0)
        points = _random_points(3, 50)
        moved = motion.apply(points)
        inside = halfspace.signed_distance(points) < 0
        assert np.all(moved[inside, -1] > 0)
        assert np.all(moved[~inside, -1] <= 0)
        plane = motion.move_halfspace(halfspace)
        assert plane.normal == pytest.approx([0, 0, -1])
        assert plane.offset == pytest.approx(0, abs=1e-12)

    def test_inverse(self):
        motion = kelvin.normalize_frame(HalfSpace(np.array([0.6, 0.0, 0.8]), 0.3))
        points = _random_points(3, 10)
        assert motion.inverse().apply(motion.apply(points)) == pytest.approx(points)

    def test_compose(self):
        first = kelvin.translation(3, 1.5)
        second = kelvin.normalize_frame(HalfSpace(np.array([0.0, 1.0, 0.0]), 0.0))
        points = _random_points(3, 10)
        assert second.compose(first).apply(points) == pytest.approx(
            second.apply(first.apply(points))
        )

    def test_scalar_translation_is_vertical(self):
        assert kelvin.translation(4, 2.0).apply(np.zeros(4)).tolist() == [0, 0, 0, 2]

    def test_moved_factor(self):
        motion = kelvin.normalize_frame(HalfSpace(np.array([1.0, 0.0, 0.0]), 0.5))
        factor = conformal.bubble(3, 1.0, [0.2, 0.1, 0.0])
        moved = kelvin.move_factor(motion, factor)
        points = _random_points(3, 10)
        assert moved.u(motion.apply(points)) == pytest.approx(factor.u(points))
        assert moved.grad(motion.apply(points)) == pytest.approx(
            factor.grad(points) @ motion.rotation.T
        )
        assert moved.laplacian(motion.apply(points)) == pytest.approx(
            factor.laplacian(points)
        )
