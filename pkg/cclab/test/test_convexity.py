"""Tests for theorem instances, hypothesis checks, ball scans and the
reflection step"""
import math

import numpy as np
import pytest

from cclab import fowler
from cclab.conformal import Ball, SingularSet, mean_curvature_sphere
from cclab.convexity import (
    RADIUS_TIERS,
    build_bubble_instance,
    build_flat_instance,
    build_fowler_instance,
    radial_length,
    reflected_ball_step,
    sample_balls,
    scan_balls,
    verify_hypotheses,
)
from cclab.errors import GeometryError, HypothesisError
from cclab.export import to_json
from cclab.fixtures import cap_reflection_height, reflection_ball, reflection_fixture
from cclab.moving_planes import minimum_location_check, sign_condition_radius


class TestBuildFowlerInstance:
    def test_cylinder_has_a_minimal_boundary(self, cylinder_instance_3):
        assert cylinder_instance_3.boundary_h_min == pytest.approx(0, abs=1e-10)

    def test_boundary_at_the_orbit_maximum_is_minimal(self):
        epsilon = 0.5 * fowler.equilibrium_v0(3)
        t0 = fowler.descending_phase(3, epsilon, fraction=0.0)
        instance = build_fowler_instance(3, epsilon, t0)
        assert instance.boundary_h_min == pytest.approx(0, abs=1e-8)

    def test_mid_descent_is_mean_convex(self, fowler_instance_3):
        assert fowler_instance_3.boundary_h_min > 0
        assert not fowler_instance_3.override

    def test_singular_set_is_the_origin(self, fowler_instance_3):
        assert fowler_instance_3.singular.points.tolist() == [[0.0, 0.0, 0.0]]
        assert fowler_instance_3.singular.exclusion_radius == 1e-3

    def test_ascending_branch_is_rejected(self):
        epsilon = 0.5 * fowler.equilibrium_v0(3)
        t0 = 0.25 * fowler.period(epsilon, 3)
        with pytest.raises(HypothesisError, match="ascending"):
            build_fowler_instance(3, epsilon, t0)

    def test_ascending_branch_can_be_overridden(self):
        epsilon = 0.5 * fowler.equilibrium_v0(3)
        t0 = 0.25 * fowler.period(epsilon, 3)
        instance = build_fowler_instance(3, epsilon, t0, override=True)
        assert instance.override
        assert instance.boundary_h_min < 0

    def test_describe(self, fowler_instance_3):
        description = fowler_instance_3.describe()
        assert description["kind"] == "fowler"
        assert description["n"] == 3
        assert description["epsilon"] == pytest.approx(0.5 * fowler.equilibrium_v0(3))


class TestRadialLength:
    def test_cylinder_length_is_logarithmic(self, cylinder_instance_3):
        v0 = fowler.equilibrium_v0(3)
        length = radial_length(
            cylinder_instance_3.factor, np.zeros(3), (0.0, 1.0, 0.0), 1e-2, 0.5
        )
        assert length == pytest.approx(v0**2 * math.log(50), rel=1e-6)


class TestVerifyHypotheses:
    def test_cylinder(self, cylinder_instance_3):
        report = verify_hypotheses(cylinder_instance_3)
        assert report.passed
        assert report.max_residual < 1e-9
        assert report.min_boundary_h == pytest.approx(0, abs=1e-10)
        v0 = fowler.equilibrium_v0(3)
        assert report.completeness["slopes"] == pytest.approx(
            [v0**2] * len(report.completeness["slopes"]), rel=1e-3
        )

    def test_fowler(self, fowler_instance_3):
        report = verify_hypotheses(fowler_instance_3)
        assert report.passed
        assert min(report.completeness["slopes"]) > 0

    def test_bubble(self):
        report = verify_hypotheses(build_bubble_instance(4))
        assert report.passed
        assert report.completeness == {"status": "no singular points"}

    def test_flat_ball_fails_the_equation(self):
        report = verify_hypotheses(build_flat_instance(3))
        assert not report.residual_ok
        assert report.boundary_ok
        assert not report.passed

    def test_ascending_branch_fails_at_the_boundary(self):
        epsilon = 0.5 * fowler.equilibrium_v0(3)
        t0 = 0.25 * fowler.period(epsilon, 3)
        report = verify_hypotheses(build_fowler_instance(3, epsilon, t0, override=True))
        assert not report.boundary_ok

    def test_report_as_dict(self, cylinder_instance_3):
        as_dict = verify_hypotheses(cylinder_instance_3).to_dict()
        assert as_dict["passed"] is True
        assert set(as_dict) >= {"max_residual", "min_boundary_h", "completeness"}


class TestSampleBalls:
    @pytest.mark.parametrize("n", (3, 4))
    def test_balls_are_admissible(self, n):
        singular = SingularSet.of([np.zeros(n)], 1e-3)
        balls = sample_balls(n, singular, 40, np.random.default_rng(3))
        for _, ball in balls:
            assert np.linalg.norm(ball.center) + ball.radius < 1
            assert np.linalg.norm(ball.center) - ball.radius > 1e-3

    def test_mixture_with_singular_points(self):
        singular = SingularSet.of([np.zeros(3)], 1e-3)
        kinds = [kind for kind, _ in sample_balls(3, singular, 200, np.random.default_rng(0))]
        assert (kinds.count("uniform"), kinds.count("singular"), kinds.count("boundary")) == (
            100,
            50,
            50,
        )

    def test_mixture_without_singular_points(self):
        kinds = [
            kind for kind, _ in sample_balls(3, SingularSet.empty(3), 20, np.random.default_rng(0))
        ]
        assert (kinds.count("uniform"), kinds.count("singular"), kinds.count("boundary")) == (
            15,
            0,
            5,
        )

    def test_no_room(self):
        singular = SingularSet.of([np.zeros(3)], 1.0)
        with pytest.raises(GeometryError):
            sample_balls(3, singular, 4, np.random.default_rng(0))

    @pytest.mark.parametrize("n", (3, 4))
    def test_balls_hugging_an_exclusion_do_not_depend_on_the_seed(self, n):
        singular = SingularSet.of([np.zeros(n)], 1e-3)
        first, second = (
            [
                (ball.center.tolist(), ball.radius)
                for kind, ball in sample_balls(n, singular, 40, np.random.default_rng(seed))
                if kind != "uniform"
            ]
            for seed in (0, 1)
        )
        assert len(first) == 20
        assert first == second

    def test_radii_cycle_through_the_tiers(self):
        singular = SingularSet.of([np.zeros(3)], 1e-3)
        radii = [
            ball.radius
            for kind, ball in sample_balls(3, singular, 40, np.random.default_rng(0))
            if kind == "boundary"
        ]
        assert len(set(radii)) == len(RADIUS_TIERS)
        assert max(radii) / min(radii) == pytest.approx(RADIUS_TIERS[-1] / RADIUS_TIERS[0])


class TestScanBalls:
    def test_cylinder_balls_are_mean_convex(self, cylinder_instance_3):
        report = scan_balls(cylinder_instance_3, num_balls=40, boundary_samples=40)
        assert len(report.balls) == 40
        assert report.global_min_h > 0
        assert all(ball.min_h > 0 for ball in report.balls)

    def test_fowler_balls_are_mean_convex(self, fowler_instance_3):
        report = scan_balls(fowler_instance_3, num_balls=40, boundary_samples=40)
        assert report.global_min_h > 0
        assert report.hypotheses_verified

    def test_flat_ball_needs_an_override(self):
        with pytest.raises(HypothesisError):
            scan_balls(build_flat_instance(3), num_balls=4)

    def test_flat_ball_curvature_is_the_inverse_radius(self):
        report = scan_balls(build_flat_instance(3), num_balls=20, override=True)
        assert not report.hypotheses_verified
        assert report.to_dict()["hypotheses"]["passed"] is False
        for ball in report.balls:
            assert ball.min_h == pytest.approx(1 / ball.radius, rel=1e-12)
        assert report.global_min_h == pytest.approx(
            1 / max(ball.radius for ball in report.balls), rel=1e-12
        )

    def test_same_seed_same_report(self, fowler_instance_3):
        first = scan_balls(fowler_instance_3, 12, 16, rng_seed=5, threads=1)
        second = scan_balls(fowler_instance_3, 12, 16, rng_seed=5, threads=3)
        assert to_json(first.to_dict()) == to_json(second.to_dict())

    def test_different_seed_different_balls(self, fowler_instance_3):
        first = scan_balls(fowler_instance_3, 4, 8, rng_seed=1)
        second = scan_balls(fowler_instance_3, 4, 8, rng_seed=2)
        assert first.balls[0].center != second.balls[0].center

    def test_report_rows(self, cylinder_instance_3):
        report = scan_balls(cylinder_instance_3, num_balls=4, boundary_samples=8)
        header, rows = report.ball_rows()
        assert header == [
            "index", "kind", "c1", "c2", "c3", "radius", "min_h", "argmin1", "argmin2", "argmin3"
        ]
        assert [row[0] for row in rows] == [0, 1, 2, 3]
        assert report.to_dict()["num_balls"] == 4

    def test_curvature_scales_inversely_with_small_radii(self, fowler_instance_3):
        center = np.array([0.5, 0.0, 0.0])
        directions = np.eye(3)
        large, small = (
            mean_curvature_sphere(
                fowler_instance_3.factor,
                Ball(center, radius),
                center + radius * directions,
            )
            for radius in (0.01, 0.005)
        )
        assert np.all((small / large >= 1.8) & (small / large <= 2.2))


class TestReflectedBallStep:
    def test_spherical_cap(self):
        step = reflection_fixture("bubble", 3, grid_cells=12, tol=1e-8)
        assert step.symmetric
        assert step.lambda0 == pytest.approx(cap_reflection_height(3), abs=1e-6)

    @pytest.mark.parametrize("kind", ("bubble", "fowler"))
    def test_reflected_ball_lies_inside(self, kind):
        ball, _, _ = reflection_ball(3, kind)
        step = reflection_fixture(kind, 3, grid_cells=12)
        gap = np.linalg.norm(step.K.center - ball.center) + step.K.radius
        assert gap <= ball.radius + 1e-9
        assert step.K.radius < ball.radius
        assert step.lambda0 >= 0

    def test_negative_minimum_below_the_critical_height_lies_inside_R0(self):
        step = reflection_fixture("fowler", 3, grid_cells=12)
        field = step.scan.below
        assert field is not None and field.min_w < 0
        bound = max(sign_condition_radius(field), step.scan.enclosing_radius)
        report = minimum_location_check(field, bound + math.sqrt(3) * field.spacing)
        assert report.min_phi < 0
        assert report.inside_R0
        assert report.phi_inside_R0
        assert report.argmin_radius <= report.argmin_phi_radius * (1 + 1e-9)

    def test_other_boundary_points(self, fowler_instance_3):
        ball = Ball(np.array([0.5, 0.0, 0.0]), 0.3)
        p = ball.center + 0.3 * np.eye(3)[1]
        q = ball.center - 0.3 * np.eye(3)[1]
        step = reflected_ball_step(fowler_instance_3, ball, p, q, grid_cells=12)
        assert np.linalg.norm(step.K.center - ball.center) + step.K.radius <= 0.3 + 1e-9
        assert math.isfinite(step.dv_dxn_at_q)
        assert set(step.to_dict()) == {"K", "P", "lambda0", "symmetric", "dv_dxn_at_q", "lambda_scan"}

    def test_p_and_q_must_differ(self, fowler_instance_3):
        ball, p, _ = reflection_ball(3, "fowler")
        with pytest.raises(GeometryError, match="distinct"):
            reflected_ball_step(fowler_instance_3, ball, p, p)

    def test_points_must_be_on_the_sphere(self, fowler_instance_3):
        ball, p, _ = reflection_ball(3, "fowler")
        with pytest.raises(GeometryError, match="boundary"):
            reflected_ball_step(fowler_instance_3, ball, p, ball.center)

    def test_ball_must_avoid_the_singular_set(self, fowler_instance_3):
        ball = Ball(np.zeros(3), 0.5)
        with pytest.raises(GeometryError):
            reflected_ball_step(
                fowler_instance_3, ball, (0.0, 0.0, 0.5), (0.0, 0.0, -0.5)
            )
