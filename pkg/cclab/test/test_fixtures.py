"""Tests for the named fixtures and the acceptance suite"""
import dataclasses

import numpy as np
import pytest

from cclab import checks, fixtures
from cclab.conformal import random_points_in_annulus
from cclab.errors import DomainError


class TestKelvinCheck:
    @pytest.mark.parametrize("name", fixtures.KELVIN_FIXTURES)
    def test_fixture_passes(self, name):
        report = fixtures.kelvin_check(name, 3, samples=30)
        assert report.passed, report.to_dict()
        assert report.samples == 30

    def test_bubble_is_fixed_by_the_unit_inversion(self):
        report = fixtures.kelvin_check("bubble", 4, samples=20)
        assert report.invariance_error < 1e-12

    def test_only_the_bubble_reports_invariance(self):
        assert fixtures.kelvin_check("cylinder", 3, samples=10).invariance_error is None

    def test_report_as_dict(self):
        as_dict = fixtures.kelvin_check("cylinder", 4, samples=10).to_dict()
        assert as_dict["fixture"] == "cylinder"
        assert as_dict["inversion_center"] == [0.5, 0.0, 0.0, 0.0]
        assert as_dict["passed"] is True

    def test_unknown_fixture(self):
        with pytest.raises(DomainError, match="Unknown Kelvin fixture"):
            fixtures.kelvin_check("torus", 3)

    def test_relative_residual_of_an_exact_solution(self):
        factor = fixtures.kelvin_fixture("bubble", 3)
        points = np.array([[0.1, 0.2, 0.3], [-1.0, 2.0, 0.5]])
        assert np.all(fixtures.relative_residual(factor, points) < 1e-12)

    def test_fowler_fixture_is_inverted_about_a_point_of_its_boundary(self):
        report = fixtures.kelvin_check("fowler", 3, samples=20)
        assert report.inversion_center == [1.0, 0.0, 0.0]
        assert report.passed, report.to_dict()

    @pytest.mark.parametrize("n", (3, 4))
    def test_fowler_factor_solves_the_equation_by_finite_differences(self, n):
        factor = fixtures.kelvin_fixture("fowler", n)
        points = random_points_in_annulus(n, 50, 0.01, 0.9, np.random.default_rng(4))
        residual = fixtures.extrapolated_fd_residual(factor, points, 4e-3)
        assert residual.max() < fixtures.FD_RESIDUAL_TOLERANCE

    def test_finite_differences_only_see_the_values(self):
        factor = fixtures.kelvin_fixture("fowler", 3)
        scaled = dataclasses.replace(factor, value=lambda x: 1.01 * factor.value(x))
        points = random_points_in_annulus(3, 20, 0.01, 0.9, np.random.default_rng(5))
        # the analytic Laplacian is unchanged, so only the stencil notices
        residual = fixtures.extrapolated_fd_residual(scaled, points, 4e-3)
        assert residual == pytest.approx((1.01**5 - 1.01) / 1.01**5, rel=1e-4)


class TestSymmetricScan:
    def test_critical_height(self):
        scan = fixtures.symmetric_scan(3, grid_cells=8)
        assert scan.lambda0 == pytest.approx(fixtures.SYMMETRIC_HEIGHT, abs=1e-6)
        assert scan.symmetric

    def test_reflection_fixture_kind(self):
        with pytest.raises(DomainError):
            fixtures.reflection_fixture("cylinder", 3)

    @pytest.mark.parametrize("n", (3, 4))
    def test_reflection_ball_points_are_antipodal(self, n):
        ball, p, q = fixtures.reflection_ball(n, "fowler")
        assert np.linalg.norm(p - ball.center) == pytest.approx(ball.radius)
        assert p + q == pytest.approx(2 * ball.center)

    def test_cap_height_is_positive(self):
        assert fixtures.cap_reflection_height(3) > 0


class TestRunChecks:
    def test_quick_subset(self):
        results = checks.run_checks(quick=True, only=[5, 2, 3], threads=1)
        assert [result.number for result in results] == [2, 3, 5]
        assert all(result.passed for result in results), results

    def test_every_criterion_is_registered(self):
        assert sorted(checks.CHECKS) == list(range(1, 13))

    def test_unknown_criterion(self):
        with pytest.raises(ValueError, match="13"):
            checks.run_checks(only=[1, 13])

    def test_breakdowns_count_as_failures(self, monkeypatch):
        def broken(quick, threads):
            raise ArithmeticError("no convergence")

        monkeypatch.setitem(checks.CHECKS, 2, ("Broken", broken))
        (result,) = checks.run_checks(only=[2], threads=1)
        assert not result.passed
        assert result.measured == "ArithmeticError: no convergence"


class TestFormatTable:
    def test_columns_line_up(self):
        results = [
            checks.CheckResult(1, "First", True, "drift 1e-12", "< 1e-8", 0.31),
            checks.CheckResult(12, "Twelfth criterion", False, "reports differ", "", 3.0),
        ]
        lines = checks.format_table(results).splitlines()
        assert len(lines) == 3
        assert lines[0].split() == ["#", "criterion", "result", "measured", "target", "time"]
        assert lines[1].index("pass") == lines[2].index("FAIL")
        assert lines[1].endswith("0.3s")
        assert lines[2].startswith("12")
