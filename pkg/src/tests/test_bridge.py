"""
Tests for the cutoff, the bridge profiles and their verification.
"""

import numpy as np
import pytest

from src.core.bridge import (
    bridge_frame,
    bridge_residual,
    build_bridge,
    build_bridges,
    make_cutoff,
    sup_forcing,
    verify_bridge,
)
from src.core.exceptions import DomainError
from src.models.config import BridgeConfig
from src.models.reports import VerdictStatus


@pytest.fixture(scope="module")
def cutoff():
    return make_cutoff()


class TestCutoff:
    """θ = 1 on (-∞, 1], θ = 0 on [2, ∞)."""

    def test_plateaus_and_midpoint(self, cutoff):
        """θ(0.5) = 1, θ(2.5) = 0 and θ(1.5) = 1/2 by symmetry."""
        assert cutoff(0.5) == 1.0
        assert cutoff(2.5) == 0.0
        assert cutoff(1.5) == pytest.approx(0.5, abs=1e-15)

    def test_monotone(self, cutoff):
        """θ is nonincreasing."""
        values = cutoff(np.linspace(0.0, 3.0, 3001))
        assert np.all(np.diff(values) <= 1e-15)

    def test_derivatives_match_differences(self, cutoff):
        """Analytic θ' agrees with central differences."""
        x = np.linspace(1.05, 1.95, 40)
        h = 1e-6
        numeric = (cutoff.theta(x + h) - cutoff.theta(x - h)) / (2.0 * h)
        assert np.allclose(cutoff.derivatives(x)[1], numeric, atol=1e-6)

    def test_gamma_dominates(self, cutoff):
        """|θ'| + |θ''| ≤ Γ everywhere."""
        _, d1, d2 = cutoff.derivatives(np.linspace(0.0, 3.0, 7777))
        assert np.max(np.abs(d1) + np.abs(d2)) <= cutoff.gamma


class TestBridgeProfile:
    """Bridges built from a genuine trajectory of the unforced system."""

    @pytest.fixture(scope="class")
    def bridges(self, ode_candidate, cutoff):
        return {b.S: b for b in build_bridges(ode_candidate, [2.0, 4.0, 8.0], cutoff)}

    @pytest.mark.parametrize("S", [2.0, 4.0, 8.0])
    def test_support(self, bridges, S):
        """Forcing vanishes identically on [-S, S] and for |t| ≥ 2S."""
        profile = bridges[S]
        t = np.concatenate([np.linspace(-S, S, 301), np.linspace(2 * S, 2 * S + 5, 101),
                            np.linspace(-2 * S - 5, -2 * S, 101)])
        phi, psi = profile.forcing(t)
        assert np.all(phi == 0.0) and np.all(psi == 0.0)

    @pytest.mark.parametrize("S", [2.0, 4.0, 8.0])
    def test_endpoint_identities(self, bridges, ode_candidate, S):
        """(z₁(t-τ₀), 0) before -2S and (0, z_λ(t-τ₁)) after 2S."""
        profile = bridges[S]
        c = ode_candidate
        t_neg = np.linspace(-2 * S - 3.0, -2 * S, 50)
        t_pos = np.linspace(2 * S, 2 * S + 3.0, 50)
        z1, dz1 = c.source.evaluate(t_neg - c.tau0)
        zl, dzl = c.target.evaluate(t_pos - c.tau1)
        assert np.array_equal(profile.state(t_neg), np.vstack([z1, dz1, 0 * z1, 0 * z1]))
        assert np.array_equal(profile.state(t_pos), np.vstack([0 * zl, 0 * zl, zl, dzl]))

    @pytest.mark.parametrize("S", [2.0, 4.0, 8.0])
    def test_residual(self, bridges, S):
        """The closed-form forcing makes the bridge an exact forced solution."""
        t = np.random.default_rng(1).uniform(-2 * S - 1, 2 * S + 1, 200)
        r_v, r_w = bridge_residual(bridges[S], t)
        assert np.max(np.abs(r_v)) <= 1e-6
        assert np.max(np.abs(r_w)) <= 1e-6

    def test_unchanged_core(self, bridges, ode_candidate):
        """Inside [-S, S] the bridge is the candidate itself."""
        profile = bridges[4.0]
        t = np.linspace(-4.0, 4.0, 33)
        assert np.array_equal(profile.state(t), ode_candidate.trajectory.state(t))

    def test_anchor_windows(self, bridges, ode_candidate):
        """S₁ ∈ (2S, 2S + π₁] and S₂ ∈ [2S, 2S + π_λ)."""
        profile = bridges[2.0]
        assert 4.0 < profile.S1 <= 4.0 + ode_candidate.source.period + 1e-12
        assert 4.0 <= profile.S2 < 4.0 + ode_candidate.target.period

    def test_verification_clauses(self, bridges):
        """Structural clauses pass; the bound clause depends on the fitted constants."""
        report = verify_bridge(bridges[2.0], BridgeConfig(samples=400))
        for name in ("residual", "support", "endpoint_identities", "continuity",
                     "anchors", "reintegration"):
            assert report.clause(name).status == VerdictStatus.PASS, name
        assert report.subject == "bridge_S2"

    def test_frame(self, bridges):
        """Tabulation columns."""
        frame = bridge_frame(bridges[2.0], samples=50)
        assert list(frame.columns) == ["t", "v_S", "w_S", "phi_S", "psi_S", "bound"]
        assert len(frame) == 50

    def test_extension_beyond_span(self, ode_candidate, cutoff):
        """S with 2S beyond the stored span extends the candidate."""
        profile = build_bridge(ode_candidate, 20.0, cutoff)
        assert profile.trajectory.t_min <= -40.0
        assert profile.trajectory.t_max >= 40.0

    def test_nonpositive_scale(self, ode_candidate, cutoff):
        """S ≤ 0 is rejected."""
        with pytest.raises(DomainError):
            build_bridge(ode_candidate, 0.0, cutoff)


class TestForcingBound:
    """Exponential majorant of the forcing."""

    @pytest.mark.parametrize("S", [2.0, 4.0])
    def test_sup_below_bound(self, synthetic_candidate, cutoff, S):
        """sup |φ_S|² + |ψ_S|² ≤ (1/S² + 1)² B₂ e^{-A₂S}."""
        profile = build_bridge(synthetic_candidate, S, cutoff)
        assert profile.bound_constants is not None
        assert sup_forcing(profile) <= profile.bound_constants.sup_bound(S)

    def test_bound_vanishes_off_window(self, synthetic_candidate, cutoff):
        """The pointwise majorant is zero outside S < |t| < 2S."""
        profile = build_bridge(synthetic_candidate, 3.0, cutoff)
        assert np.all(profile.bound(np.array([-7.0, -1.0, 0.0, 2.5, 6.5])) == 0.0)
        assert profile.bound(np.array([4.5]))[0] > 0.0

    def test_bound_shape_over_scales(self, synthetic_candidate, cutoff):
        """S = 2..12: sup under the majorant, log sup falling at least 0.9 A₂ per unit S."""
        scales = [float(S) for S in range(2, 13)]
        profiles = build_bridges(synthetic_candidate, scales, cutoff)
        sups = np.array([sup_forcing(p) for p in profiles])
        bounds = np.array([p.bound_constants.sup_bound(p.S) for p in profiles])
        assert np.all(sups <= bounds)
        slope = np.polyfit(scales, np.log(sups), 1)[0]
        assert slope <= -0.9 * profiles[0].A2
