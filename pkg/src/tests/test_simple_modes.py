"""
Tests for simple modes, anchors and Floquet multipliers.
"""

import math

import numpy as np
import pytest

from src.core.exceptions import DomainError
from src.core.nonlinearity import build_model
from src.core.simple_modes import (
    SimpleMode,
    anchor_time,
    first_return_time,
    floquet_multipliers,
    floquet_scan,
    mode_eval,
    mode_period,
    sample_mode,
)


class TestModePeriod:
    """Period quadrature against closed forms and the ODE oracle."""

    def test_harmonic(self, constant_model):
        """m ≡ 1, H₀ = 1 → 2π."""
        assert mode_period(constant_model, 1.0) == pytest.approx(2.0 * math.pi, abs=1e-10)

    def test_stiff_constant(self):
        """m ≡ 4 → π."""
        assert mode_period(build_model("constant", [4.0]), 1.0) == pytest.approx(math.pi, abs=1e-10)

    def test_affine_matches_first_return(self, affine_model):
        """The quadrature agrees with direct integration to 1e-9."""
        assert mode_period(affine_model, 1.0) == pytest.approx(
            first_return_time(affine_model, 1.0), rel=1e-9)

    def test_pohozaev_matches_first_return(self):
        """Bounded-primitive family, still consistent."""
        model = build_model("pohozaev", [1.0, 1.0, 4.0])
        assert mode_period(model, 0.5) == pytest.approx(first_return_time(model, 0.5), rel=1e-9)

    def test_nonpositive_energy(self, constant_model):
        """H₀ ≤ 0 is rejected."""
        with pytest.raises(DomainError):
            mode_period(constant_model, 0.0)


class TestSimpleMode:
    """Evaluation of z_λ."""

    @pytest.fixture(scope="class")
    def affine_mode(self):
        return SimpleMode.build(build_model("affine", [1.0, 1.0]), 1.0)

    def test_quarter_value(self, constant_model):
        """m ≡ 1, λ = 2: z₂(π/4) = 1/2, z₂'(π/4) = 0."""
        mode = SimpleMode.build(constant_model, 1.0, lam=2.0)
        z, dz = mode_eval(mode, math.pi / 4.0)
        assert z == pytest.approx(0.5, abs=1e-12)
        assert dz == pytest.approx(0.0, abs=1e-10)

    def test_initial_and_periodic_state(self, affine_mode):
        """(0, H₀) at t = 0 and after one period."""
        mode = affine_mode.rescaled(3.0)
        for t in (0.0, mode.period, 5.0 * mode.period):
            z, dz = mode.evaluate(t)
            assert z == pytest.approx(0.0, abs=1e-11)
            assert dz == pytest.approx(1.0, abs=1e-10)

    def test_period_scaling(self, affine_mode):
        """π_λ = π₁/λ."""
        assert affine_mode.rescaled(2.5).period == affine_mode.period_1 / 2.5

    def test_energy_equality(self, affine_mode):
        """z_λ'² + M(λ²z_λ²) = H₀² along the orbit."""
        mode = affine_mode.rescaled(2.0)
        t = np.linspace(-7.0, 7.0, 997)
        assert np.max(np.abs(mode.energy_residual(t))) <= 1e-9

    def test_sup_bounds(self, affine_mode):
        """|z'|, λ|z| stay below H₁ = H₀ for μ₁ = 1."""
        mode = affine_mode.rescaled(2.0)
        z, dz = mode.evaluate(np.linspace(0.0, mode.period, 400))
        assert np.max(np.abs(dz)) <= 1.0 + 1e-12
        assert np.max(2.0 * np.abs(z)) <= 1.0 + 1e-12

    def test_second_derivative_matches_difference(self, affine_mode):
        """z'' from the ODE equals a central difference of z'."""
        h = 1e-5
        t = np.linspace(0.1, 5.0, 50)
        _, up = affine_mode.evaluate(t + h)
        _, down = affine_mode.evaluate(t - h)
        assert np.allclose((up - down) / (2 * h), affine_mode.second_derivative(t), atol=1e-7)

    def test_rescale_below_one(self, affine_mode):
        """λ < 1 is not a simple mode of the family."""
        with pytest.raises(DomainError):
            affine_mode.rescaled(0.5)

    def test_sample_mode_columns(self, affine_mode):
        """Tabulation has the documented columns."""
        frame = sample_mode(affine_mode, periods=1.0, samples=50)
        assert list(frame.columns) == ["t", "z", "dz", "energy_residual"]
        assert len(frame) == 50


class TestAnchorTime:
    """Upward zeros of z_λ(t - τ)."""

    def test_after_window_start(self, constant_model):
        """Next upward zero of sin after t = 2 is 2π."""
        mode = SimpleMode.build(constant_model, 1.0)
        assert anchor_time(mode, 0.0, 2.0) == pytest.approx(2.0 * math.pi, abs=1e-12)

    def test_shifted_anchor(self, constant_model):
        """τ = 0.3 from window start 0 gives 0.3."""
        mode = SimpleMode.build(constant_model, 1.0)
        assert anchor_time(mode, 0.3, 0.0) == pytest.approx(0.3, abs=1e-12)

    def test_affine_root_quality(self, affine_model):
        """The returned root satisfies the anchor identities."""
        mode = SimpleMode.build(affine_model, 1.0, lam=2.0)
        tau = 0.123
        t_star = anchor_time(mode, tau, 4.0)
        z, dz = mode.evaluate(t_star - tau)
        assert 4.0 <= t_star < 4.0 + mode.period
        assert abs(z) <= 1e-11
        assert abs(dz - 1.0) <= 1e-10


class TestFloquet:
    """Transverse monodromy of the source mode."""

    def test_constant_is_rotation(self, constant_model):
        """m ≡ 1, λ = 2: multipliers e^{±4πi}, i.e. on the unit circle."""
        result = floquet_multipliers(constant_model, 1.0, 2.0)
        assert all(abs(abs(mu) - 1.0) < 1e-8 for mu in result.multipliers)
        assert not result.unstable

    def test_liouville(self, affine_model):
        """det of the monodromy is 1."""
        result = floquet_multipliers(affine_model, 1.5, 2.3)
        assert result.determinant == pytest.approx(1.0, abs=1e-8)
        product = result.multipliers[0] * result.multipliers[1]
        assert abs(product - 1.0) < 1e-8

    def test_stable_mode_has_no_unstable_direction(self, constant_model):
        """Asking for the unstable eigenvector of a stable mode is a domain error."""
        with pytest.raises(DomainError):
            floquet_multipliers(constant_model, 1.0, 2.0).unstable_direction()

    def test_scan_finds_resonance_tongue(self):
        """a=1, b=5, H₀=2: some λ in [1, 3] is parametrically unstable."""
        model = build_model("affine", [1.0, 5.0])
        scan = floquet_scan(model, 2.0, np.linspace(1.0, 3.0, 41))
        assert list(scan.columns) == ["lam", "max_modulus", "unstable", "determinant", "trace"]
        assert scan["unstable"].any()
        assert np.allclose(scan["determinant"], 1.0, atol=1e-8)
