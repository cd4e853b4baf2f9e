"""Tests for the cylindrical ODE and its Fowler solutions"""
import math

import numpy as np
import pytest

from cclab import fowler
from cclab.errors import (
    DegenerateOrbitError,
    DomainError,
    InsufficientSpanError,
    InvalidDimensionError,
    OrbitEscapeError,
)


class TestEquilibrium:
    @pytest.mark.parametrize(
        "n, expected",
        ((6, 2 / 3), (4, 1 / math.sqrt(2)), (3, 3**-0.25)),
    )
    def test_closed_form(self, n, expected):
        assert fowler.equilibrium_v0(n) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("n", (3, 4, 5, 6, 10))
    def test_equilibrium_is_a_fixed_point(self, n):
        v0 = fowler.equilibrium_v0(n)
        assert fowler.vector_field((v0, 0.0), n) == pytest.approx((0, 0), abs=1e-14)

    @pytest.mark.parametrize("n", (2, 1, 0, -3, 3.5))
    def test_invalid_dimension(self, n):
        with pytest.raises(InvalidDimensionError):
            fowler.equilibrium_v0(n)

    def test_invalid_dimension_is_a_value_error(self):
        with pytest.raises(ValueError):
            fowler.validate_dimension(2)

    @pytest.mark.parametrize("n", (3, 4, 6))
    def test_linearized_period(self, n):
        assert fowler.linearized_period(n) == pytest.approx(2 * math.pi / math.sqrt(n - 2))


class TestHamiltonian:
    @pytest.mark.parametrize("n", (3, 4, 5, 7))
    def test_vanishes_at_the_origin(self, n):
        assert fowler.hamiltonian((0.0, 0.0), n) == 0

    @pytest.mark.parametrize("n", (3, 4, 5, 7))
    def test_vanishes_at_one(self, n):
        assert fowler.hamiltonian((1.0, 0.0), n) == pytest.approx(0, abs=1e-15)

    def test_value_at_the_equilibrium(self, v0_4):
        assert fowler.hamiltonian((v0_4, 0.0), 4) == pytest.approx(-0.25, rel=1e-14)

    def test_vectorized(self):
        energy = fowler.hamiltonian((np.array([0.0, 1.0]), np.array([1.0, 2.0])), 4)
        assert energy.tolist() == pytest.approx([1.0, 4.0])


class TestVectorField:
    def test_below_the_equilibrium(self):
        assert fowler.vector_field((0.5, 0.0), 4) == pytest.approx((0.0, 0.25))

    def test_w_passes_through(self, v0_4):
        assert fowler.vector_field((v0_4, 0.1), 4) == pytest.approx((0.1, 0.0), abs=1e-15)

    def test_negative_v_is_rejected(self):
        with pytest.raises(DomainError):
            fowler.vector_field((-0.1, 0.0), 3)


class TestFowlerParams:
    def test_from_fraction(self, v0_4):
        assert fowler.FowlerParams.from_fraction(4, 0.5).epsilon == pytest.approx(
            0.5 * v0_4
        )

    @pytest.mark.parametrize("epsilon", (0.0, -0.2, 0.8))
    def test_epsilon_out_of_range(self, epsilon):
        with pytest.raises(DomainError):
            fowler.FowlerParams(4, epsilon)

    def test_equilibrium_is_allowed(self, v0_4):
        assert fowler.FowlerParams(4, v0_4).is_equilibrium


class TestIntegrate:
    @pytest.mark.parametrize("n", (4, 3))
    def test_equilibrium_stays_put(self, n):
        v0 = fowler.equilibrium_v0(n)
        trajectory = fowler.integrate(fowler.FowlerParams(n, v0), 0.0, 50.0)
        assert np.max(np.abs(trajectory.v - v0)) < 1e-10
        assert np.max(np.abs(trajectory.w)) < 1e-10

    def test_the_origin_stays_put(self):
        trajectory = fowler.integrate_orbit(4, fowler.PhasePoint(0.0, 0.0), 0.0, 0.0, 50.0)
        assert np.max(np.abs(trajectory.v)) == 0

    def test_samples_cover_the_span_in_order(self, half_orbit_4):
        t_first, t_last = half_orbit_4.span
        assert t_first == 0
        period = fowler.period(half_orbit_4.params.epsilon, 4)
        assert t_last == pytest.approx(10 * period, abs=half_orbit_4.step)
        assert np.all(np.diff(half_orbit_4.t) > 0)
        assert np.all(half_orbit_4.v > 0)

    def test_samples_as_rows(self, half_orbit_4):
        assert half_orbit_4.samples.shape == (len(half_orbit_4.t), 3)

    def test_energy_is_conserved_over_ten_periods(self, half_orbit_4):
        assert fowler.hamiltonian_drift(half_orbit_4, relative=True) < 1e-8

    def test_halving_the_step_reduces_the_drift(self, v0_4):
        params = fowler.FowlerParams(4, 0.5 * v0_4)
        coarse = fowler.hamiltonian_drift(fowler.integrate(params, 0.0, 20.0, 8e-3))
        fine = fowler.hamiltonian_drift(fowler.integrate(params, 0.0, 20.0, 4e-3))
        assert coarse / fine >= 8

    def test_orbit_is_symmetric_about_its_minimum(self):
        params = fowler.FowlerParams.from_fraction(3, 0.3)
        trajectory = fowler.integrate(params, -3.0, 3.0)
        assert len(trajectory.t) % 2 == 1
        assert np.max(np.abs(trajectory.v - trajectory.v[::-1])) < 1e-6

    def test_phase_shifts_the_minimum(self, v0_4):
        params = fowler.FowlerParams(4, 0.5 * v0_4, phase_T=1.25)
        trajectory = fowler.integrate(params, 0.0, 3.0)
        assert trajectory.interpolate(1.25).v == pytest.approx(0.5 * v0_4, abs=1e-12)
        assert trajectory.interpolate(1.25).w == pytest.approx(0, abs=1e-12)

    def test_interpolation_between_samples(self, half_orbit_4):
        params = half_orbit_4.params
        fine = fowler.integrate(params, 1.0, 1.1, 1e-4)
        t = np.linspace(1.0, 1.1, 37)
        expected = fine.interpolate(t)
        actual = fowler.phase_point_at(half_orbit_4, t)
        assert np.max(np.abs(actual.v - expected.v)) < 1e-9
        assert np.max(np.abs(actual.w - expected.w)) < 1e-8

    def test_interpolation_outside_the_span(self, half_orbit_4):
        with pytest.raises(DomainError):
            half_orbit_4.interpolate(-1.0)

    @pytest.mark.parametrize("t0, t1, step", ((1.0, 1.0, 1e-3), (0.0, 1.0, 0.0)))
    def test_invalid_span_or_step(self, t0, t1, step, v0_4):
        with pytest.raises(DomainError):
            fowler.integrate(fowler.FowlerParams(4, 0.5 * v0_4), t0, t1, step)

    def test_positive_energy_orbits_escape(self):
        with pytest.raises(OrbitEscapeError):
            fowler.integrate_orbit(4, fowler.PhasePoint(0.1, -1.0), 0.0, 0.0, 10.0)

    def test_escape_is_an_arithmetic_error(self):
        with pytest.raises(ArithmeticError):
            fowler.integrate_orbit(3, fowler.PhasePoint(0.05, -2.0), 0.0, 0.0, 1.0)


class TestPeriod:
    @pytest.mark.parametrize("n", (3, 4, 6))
    def test_small_amplitude_limit(self, n):
        v0 = fowler.equilibrium_v0(n)
        assert fowler.period(0.999 * v0, n) == pytest.approx(
            fowler.linearized_period(n), rel=1e-4
        )

    def test_matches_the_spacing_of_minima(self, half_orbit_4):
        w = half_orbit_4.w
        rising = np.nonzero((w[:-1] < 0) & (w[1:] >= 0))[0]
        spacing = np.diff(half_orbit_4.t[rising])
        period = fowler.period(half_orbit_4.params.epsilon, 4)
        assert np.max(np.abs(spacing - period)) <= 2 * half_orbit_4.step

    def test_orbit_repeats_after_one_period(self, half_orbit_4):
        period = fowler.period(half_orbit_4.params.epsilon, 4)
        t = np.linspace(0.0, period, 101)
        now = half_orbit_4.interpolate(t).v
        later = half_orbit_4.interpolate(t + period).v
        assert np.max(np.abs(later - now)) < 1e-6

    def test_equilibrium_has_no_period(self, v0_4):
        with pytest.raises(DegenerateOrbitError):
            fowler.period(v0_4, 4)

    @pytest.mark.parametrize("epsilon", (0.0, -0.1))
    def test_nonpositive_epsilon(self, epsilon):
        with pytest.raises(DomainError):
            fowler.period(epsilon, 4)

    def test_table_records_the_equilibrium_as_nan(self, v0_4):
        rows = fowler.period_table(4, (0.5, 1.0))
        assert [row.fraction for row in rows] == [0.5, 1.0]
        assert rows[0].epsilon == pytest.approx(0.5 * v0_4)
        assert rows[0].period == pytest.approx(fowler.period(0.5 * v0_4, 4))
        assert math.isnan(rows[1].period)


class TestOrbitExtrema:
    def test_minimum_is_epsilon(self, half_orbit_4):
        extrema = fowler.orbit_extrema(half_orbit_4)
        assert extrema.v_min == pytest.approx(half_orbit_4.params.epsilon, abs=1e-6)
        assert half_orbit_4.params.epsilon < extrema.v_max < 1

    def test_extrema_share_a_level_set(self, half_orbit_4):
        v_min, v_max = fowler.orbit_extrema(half_orbit_4)
        assert abs(
            fowler.hamiltonian((v_min, 0.0), 4) - fowler.hamiltonian((v_max, 0.0), 4)
        ) < 1e-8

    def test_equilibrium(self, v0_4):
        trajectory = fowler.integrate(fowler.FowlerParams(4, v0_4), 0.0, 5.0)
        assert fowler.orbit_extrema(trajectory) == pytest.approx((v0_4, v0_4), abs=1e-12)

    def test_short_trajectory(self, v0_4):
        trajectory = fowler.integrate(fowler.FowlerParams(4, 0.5 * v0_4), 0.0, 1.0)
        with pytest.raises(InsufficientSpanError):
            fowler.orbit_extrema(trajectory)


class TestDescendingPhase:
    @pytest.mark.parametrize("fraction", (0.0, 0.5, 0.9))
    def test_lands_on_the_descent(self, fraction, v0_4):
        epsilon = 0.5 * v0_4
        t0 = fowler.descending_phase(4, epsilon, fraction)
        trajectory = fowler.integrate(fowler.FowlerParams(4, epsilon), 0.0, t0 + 1.0)
        assert trajectory.interpolate(t0).w <= 1e-9

    def test_equilibrium(self, v0_4):
        assert fowler.descending_phase(4, v0_4) == 0

    def test_fraction_out_of_range(self, v0_4):
        with pytest.raises(DomainError):
            fowler.descending_phase(4, 0.5 * v0_4, 1.5)
