"""
Tests for the two-mode integrator, trajectories and residuals.
"""

import math

import numpy as np
import pytest

from src.core.dynamics import (
    PhaseState,
    Trajectory,
    extend_trajectory,
    forced_integrate,
    hamiltonian,
    integrate,
    residual,
    trajectory_frame,
)
from src.core.exceptions import DomainError, NumericalError
from src.core.nonlinearity import build_model
from src.models.config import IntegratorConfig


class TestHamiltonian:
    """H = v'² + w'² + M(v² + λ²w²)."""

    def test_pure_velocities(self, affine_model):
        """States (0,H₀,0,0) and (0,0,0,H₀) have energy H₀²."""
        assert hamiltonian(affine_model, 2.0, [0.0, 1.5, 0.0, 0.0]) == pytest.approx(2.25)
        assert hamiltonian(affine_model, 2.0, PhaseState(0.0, 0.0, 0.0, 1.5)) == pytest.approx(2.25)

    def test_unit_displacement(self, constant_model):
        """m ≡ 1, λ = 1, (1,0,0,0) → 1."""
        assert hamiltonian(constant_model, 1.0, [1.0, 0.0, 0.0, 0.0]) == 1.0

    def test_nonfinite_state_rejected(self):
        """PhaseState refuses nan."""
        with pytest.raises(DomainError):
            PhaseState(0.0, math.nan, 0.0, 0.0)


class TestIntegrate:
    """Unforced integration."""

    def test_harmonic_v(self, constant_model):
        """(0,1,0,0) → v = sin t, w ≡ 0."""
        traj = integrate(constant_model, 2.0, [0.0, 1.0, 0.0, 0.0], (0.0, 10.0))
        t = np.linspace(0.0, 10.0, 301)
        v, dv, w, dw = traj.state(t)
        assert np.max(np.abs(v - np.sin(t))) <= 1e-9
        assert np.max(np.abs(dv - np.cos(t))) <= 1e-9
        assert np.max(np.abs(w)) <= 1e-14

    def test_harmonic_w(self, constant_model):
        """(0,0,0,1) → w = sin(2t)/2."""
        traj = integrate(constant_model, 2.0, [0.0, 0.0, 0.0, 1.0], (0.0, 10.0))
        t = np.linspace(0.0, 10.0, 301)
        assert np.max(np.abs(traj.state(t)[2] - 0.5 * np.sin(2.0 * t))) <= 1e-9

    @pytest.mark.parametrize("params", [(1.0, 1.0), (1.0, 5.0), (2.0, 0.5)])
    def test_energy_conservation(self, params):
        """Relative drift ≤ 1e-9 over a long span."""
        model = build_model("affine", list(params))
        traj = integrate(model, 2.0, [0.3, 0.1, 0.2, -0.4], (0.0, 50.0))
        assert traj.max_relative_drift <= 1e-9
        assert not traj.warnings

    def test_backward_integration(self, affine_model):
        """Backward then forward returns to the start."""
        start = [0.3, 0.1, 0.2, -0.4]
        back = integrate(affine_model, 2.0, start, (0.0, -5.0))
        forward = integrate(affine_model, 2.0, back.state(-5.0), (-5.0, 0.0))
        assert np.allclose(forward.state(0.0), start, atol=1e-9)

    def test_recorded_drift_matches_reevaluation(self, affine_model):
        """H recorded at breakpoints equals a fresh evaluation there."""
        traj = integrate(affine_model, 2.0, [0.3, 0.1, 0.2, -0.4], (0.0, 10.0))
        again = np.asarray(traj.hamiltonian(traj.hamiltonian_times))
        assert np.allclose(again, traj.hamiltonian_values, rtol=1e-12, atol=1e-14)

    def test_degenerate_span(self, affine_model):
        """t0 == t1 is a domain error."""
        with pytest.raises(DomainError):
            integrate(affine_model, 2.0, [0.0, 1.0, 0.0, 0.0], (1.0, 1.0))

    def test_step_budget(self, affine_model):
        """Exhausting the step budget raises NumericalError with diagnostics."""
        config = IntegratorConfig(max_steps=3)
        with pytest.raises(NumericalError) as info:
            integrate(affine_model, 2.0, [0.3, 0.1, 0.2, -0.4], (0.0, 50.0), config)
        assert "last_t" in info.value.diagnostics

    def test_outside_span(self, constant_model):
        """Evaluation outside the span is refused."""
        traj = integrate(constant_model, 2.0, [0.0, 1.0, 0.0, 0.0], (0.0, 1.0))
        with pytest.raises(DomainError):
            traj.state(2.0)


class TestForcedIntegrate:
    """Integration with (φ, ψ)."""

    def test_zero_forcing_matches_unforced(self, affine_model):
        """Zero forcing reproduces the unforced run."""
        start = [0.3, 0.1, 0.2, -0.4]
        plain = integrate(affine_model, 2.0, start, (0.0, 5.0))
        forced = forced_integrate(affine_model, 2.0, start, lambda t: (0.0, 0.0), (0.0, 5.0))
        assert np.allclose(plain.state(5.0), forced.state(5.0), atol=1e-11)

    def test_resonant_oscillator(self, constant_model):
        """v'' + v = sin t from rest gives (sin t - t cos t)/2."""
        traj = forced_integrate(constant_model, 1.0, [0.0, 0.0, 0.0, 0.0],
                                lambda t: (math.sin(t), 0.0), (0.0, 5.0))
        t = np.linspace(0.0, 5.0, 101)
        exact = 0.5 * (np.sin(t) - t * np.cos(t))
        assert np.max(np.abs(traj.state(t)[0] - exact)) <= 1e-8


class TestTrajectoryOperations:
    """Shift, join, extension and sampled reconstruction."""

    def test_shift(self, constant_model):
        """shifted(dt) evaluates the original at t - dt."""
        traj = integrate(constant_model, 2.0, [0.0, 1.0, 0.0, 0.0], (0.0, 4.0))
        moved = traj.shifted(-2.0)
        assert moved.t_min == -2.0
        assert np.allclose(moved.state(-1.0), traj.state(1.0))

    def test_join_and_extend(self, affine_model):
        """Extension covers the requested span and agrees with the base piece."""
        base = integrate(affine_model, 2.0, [0.3, 0.1, 0.2, -0.4], (0.0, 2.0))
        longer = extend_trajectory(base, -3.0, 6.0)
        assert longer.t_min == -3.0 and longer.t_max == 6.0
        assert np.allclose(longer.state(1.0), base.state(1.0))

    def test_extend_forced_rejected(self, constant_model):
        """Forced trajectories cannot be continued without their forcing."""
        traj = forced_integrate(constant_model, 1.0, [0.0, 0.0, 0.0, 0.0],
                                lambda t: (1.0, 0.0), (0.0, 1.0))
        with pytest.raises(DomainError):
            extend_trajectory(traj, 0.0, 2.0)

    def test_from_samples_reconstruction(self, affine_model):
        """Quintic Hermite reconstruction from a 0.01 grid is accurate."""
        traj = integrate(affine_model, 2.0, [0.3, 0.1, 0.2, -0.4], (0.0, 5.0))
        t = np.arange(0.0, 5.0 + 1e-12, 0.01)
        rebuilt = Trajectory.from_samples(affine_model, 2.0, t, traj.state(t))
        times = np.linspace(0.003, 4.997, 211)
        assert np.max(np.abs(rebuilt.state(times) - traj.state(times))) <= 1e-8


class TestResidual:
    """Finite-difference residual of the unforced equations."""

    def test_unforced_trajectory(self, affine_model):
        """|r| ≤ 1e-6 at random interior times."""
        traj = integrate(affine_model, 2.0, [0.3, 0.1, 0.2, -0.4], (0.0, 20.0))
        times = np.random.default_rng(0).uniform(0.1, 19.9, 100)
        res = residual(affine_model, 2.0, traj, times)
        assert np.max(np.abs(res.r_v)) <= 1e-6
        assert np.max(np.abs(res.r_w)) <= 1e-6
        assert not res.one_sided.any()

    def test_analytic_solution(self, constant_model):
        """sin t exactly solves v'' + v = 0."""
        traj = Trajectory.from_interpolant(
            constant_model, 2.0,
            lambda t: np.array([np.sin(t), np.cos(t), 0 * t, 0 * t]), 0.0, 10.0)
        res = residual(constant_model, 2.0, traj, np.linspace(0.5, 9.5, 50))
        assert np.max(np.abs(res.r_v)) <= 1e-8

    def test_one_sided_near_ends(self, constant_model):
        """Points within h of an end use one-sided formulas."""
        traj = integrate(constant_model, 2.0, [0.0, 1.0, 0.0, 0.0], (0.0, 2.0))
        res = residual(constant_model, 2.0, traj, [0.0, 1.0, 2.0])
        assert res.one_sided.tolist() == [True, False, True]

    def test_frame_columns(self, constant_model):
        """CSV table layout."""
        traj = integrate(constant_model, 2.0, [0.0, 1.0, 0.0, 0.0], (0.0, 2.0))
        frame = trajectory_frame(traj, np.linspace(0.0, 2.0, 5))
        assert list(frame.columns)[:5] == ["t", "v", "dv", "w", "dw"]
