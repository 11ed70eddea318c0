"""
Tests for schedules, the glued solution and the blow-up diagnostics.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.cli.commands.glue import _blowup_report
from src.core.blowup import (
    assemble,
    blowup_diagnostics,
    default_tail,
    direct_tail,
    energy_quantity,
    forcing_profile,
    junction_check,
    junction_states,
    junction_velocities,
    make_schedule,
    residual_check,
    solution_frame,
    weighted_gates,
)
from src.core.bridge import make_cutoff
from src.core.exceptions import DomainError, ScheduleRejected
from src.core.spectral import (
    OperatorSpec,
    RescaledBridge,
    gevrey_weight,
    subexponential_weight,
    zero_weight,
)
from src.models.reports import VerdictStatus


@pytest.fixture(scope="module")
def op():
    return OperatorSpec(2.0)


@pytest.fixture(scope="module")
def schedule(synthetic_candidate, op):
    return make_schedule(synthetic_candidate, op, K_max=4)


@pytest.fixture(scope="module")
def solution(synthetic_candidate, schedule):
    return assemble(synthetic_candidate, schedule, make_cutoff())


class _FastPiece(RescaledBridge):
    """Piece whose e_k velocity is 10% too large."""

    def coefficients(self, t):
        rows = super().coefficients(t)
        rows[1] = 1.1 * rows[1]
        return rows


class TestTail:
    """Σ_{k≥K} of the default interval bounds."""

    @pytest.mark.parametrize("K,lam,scale", [(1, 2.0, 1.0), (4, 1.5, 0.5), (12, 3.0, 2.0)])
    def test_closed_form_matches_summation(self, K, lam, scale):
        closed = default_tail(K, lam, 2.0 * math.pi, scale)
        assert closed == pytest.approx(direct_tail(K, lam, 2.0 * math.pi, scale), rel=1e-9)

    def test_tail_shrinks(self):
        tails = [default_tail(K, 2.0, 2.0 * math.pi) for K in range(1, 10)]
        assert np.all(np.diff(tails) < 0)


class TestSchedule:
    """Default and weighted S_k rules."""

    def test_default_scales(self, schedule):
        assert [r.S_k for r in schedule.records] == [1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0]
        assert schedule.K_max == 4
        assert schedule.times[0] == 0.0

    def test_interval_bounds(self, schedule):
        """T_{k+1} - T_k ≤ 4c/(k+1)² + π₁(λ^{-k} + λ^{-k-1})."""
        for record in schedule.records:
            assert 0.0 < record.length <= schedule.interval_bound(record.k) + 1e-12
        assert np.all(np.diff(schedule.times) > 0)

    def test_blowup_time(self, schedule):
        assert schedule.T_inf == pytest.approx(schedule.T_end + schedule.tail, rel=1e-15)
        assert schedule.T_inf == pytest.approx(
            schedule.T_end + default_tail(4, 2.0, schedule.period_1), rel=1e-15)

    def test_single_bridge(self, synthetic_candidate, op):
        single = make_schedule(synthetic_candidate, op, K_max=1)
        assert single.K_max == 1
        assert len(single.times) == 2

    def test_to_dict(self, schedule):
        payload = schedule.to_dict()
        assert payload["K_max"] == 4 and payload["rule"] == "default"
        assert len(payload["records"]) == 4

    @pytest.mark.parametrize("kwargs", [{"K_max": 0}, {"K_max": 2, "rule": "triangular"},
                                        {"K_max": 2, "rule": "weighted"}])
    def test_bad_arguments(self, synthetic_candidate, op, kwargs):
        with pytest.raises(DomainError):
            make_schedule(synthetic_candidate, op, **kwargs)

    def test_operator_mismatch(self, synthetic_candidate):
        with pytest.raises(DomainError):
            make_schedule(synthetic_candidate, OperatorSpec(3.0), K_max=2)

    def test_subexponential_gates_pass(self, op):
        gates = weighted_gates(subexponential_weight(1.0), op, A2=2.0)
        assert gates["cauchy"] and gates["divergence"] and gates["weight_valid"]
        assert gates["passed"]

    def test_gevrey_half_rejected(self, synthetic_candidate, op):
        """s = 1/2 makes S_k grow like λ^k: the weighted rule is refused."""
        with pytest.raises(ScheduleRejected) as info:
            make_schedule(synthetic_candidate, op, K_max=3, rule="weighted",
                          weight=gevrey_weight(1.0, 0.5))
        assert info.value.diagnostics["passed"] is False

    def test_weighted_schedule_built(self, synthetic_candidate, op):
        weighted = make_schedule(synthetic_candidate, op, K_max=2, rule="weighted",
                                 weight=subexponential_weight(1.0), scale=0.05)
        assert weighted.rule == "weighted"
        assert math.isfinite(weighted.tail) and weighted.tail > 0
        assert all(r.S_k >= 0.05 / (r.k + 1) ** 2 for r in weighted.records)


class TestGluedSolution:
    """Junctions, energy growth and forcing on the glued solution."""

    def test_junction_states_from_pieces(self, solution):
        """At each T_k the right piece sits at its source anchor: u = 0, u' = H₀ e_k."""
        _, rows = solution.coefficients(solution.schedule.times[:-1])
        assert np.allclose(rows[0], 0.0, atol=1e-12)
        assert np.allclose(rows[1], solution.H0, rtol=1e-12, atol=0.0)
        assert np.max(np.abs(rows[2:])) <= 1e-15
        assert [s["du"] for s in junction_states(solution)][2][2] == solution.H0

    def test_junction_velocities_one_sided(self, solution):
        """Both sides of an interior junction read H₀ e_k; T_0 and T_end have one side."""
        states = junction_velocities(solution)
        assert states[0]["left"] is None and states[-1]["right"] is None
        for state in states:
            for side in (state["left"], state["right"]):
                if side is not None:
                    assert side[state["k"]] == pytest.approx(solution.H0, rel=1e-12)
                    assert side.support == (state["k"],)

    def test_junction_check(self, solution):
        report = junction_check(solution)
        assert report.passed, report.failed()
        assert len(report.clauses) == 2 * (solution.schedule.K_max + 1)

    def test_junction_check_flags_shifted_anchor(self, solution):
        """Reading piece 2 a millisecond before its anchor breaks junction 2 only."""
        records = tuple(replace(r, S1k=r.S1k + 1e-3) if r.k == 2 else r
                        for r in solution.schedule.records)
        shifted = replace(solution, schedule=replace(solution.schedule, records=records))
        failed = junction_check(shifted).failed()
        assert "junction_2" in failed
        assert "junction_1" not in failed and "junction_3" not in failed

    def test_outside_domain(self, solution):
        with pytest.raises(DomainError):
            solution.coefficients(solution.T_end + 1.0)

    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_junction_law(self, solution, alpha):
        """|A^α u'(T_k)|² = H₀² λ^{4kα}: 4^k for α = 1/2, 16^k for α = 1."""
        diag = blowup_diagnostics(solution, alpha, samples_per_interval=50)
        expected = [16.0 ** (alpha * k) for k in range(5)]
        assert np.allclose(diag.junctions["measured"], expected, rtol=1e-10, atol=0.0)
        assert np.allclose(diag.junctions["exact"], expected, rtol=1e-12, atol=0.0)
        interior = diag.junctions.iloc[1:-1]
        assert np.allclose(interior["measured_left"], interior["measured_right"], rtol=1e-10)
        assert diag.log_slope == pytest.approx(4.0 * alpha * math.log(2.0), rel=1e-9)

    def test_junction_law_sees_perturbed_piece(self, solution):
        """A piece whose velocity is off by 10% shows up as a 21% energy excess."""
        pieces = tuple(_FastPiece(p.k, p.S_k, p.profile, p.op) if p.k == 2 else p
                       for p in solution.pieces)
        perturbed = replace(solution, pieces=pieces)
        table = blowup_diagnostics(perturbed, 0.5, samples_per_interval=10).junctions
        assert table.loc[2, "measured_right"] == pytest.approx(1.21 * table.loc[2, "exact"],
                                                               rel=1e-9)
        assert table.loc[2, "measured_left"] == pytest.approx(table.loc[2, "exact"], rel=1e-10)
        assert table.loc[3, "measured_left"] == pytest.approx(table.loc[3, "exact"], rel=1e-10)
        failed = junction_check(perturbed).failed()
        assert "junction_2" in failed and "junction_3" not in failed

    def test_orthogonal_velocities(self, solution):
        diag = blowup_diagnostics(solution, 1.0, samples_per_interval=20)
        assert np.all(diag.junctions["inner_next"].iloc[:-1] == 0.0)

    def test_energy_at_last_junction(self, solution):
        _, values = energy_quantity(solution, 0.5, solution.T_end)
        assert values[0] == pytest.approx(4.0 ** 4, rel=1e-9)

    def test_forcing_profile_table(self, solution):
        profile = forcing_profile(solution, zero_weight(), samples_per_interval=200)
        table = profile.table
        assert len(table) == solution.schedule.K_max
        assert table["k"].tolist() == [0, 1, 2, 3]
        assert np.all(table["sup_norm"] > 0.0)
        assert table["within_bound"].tolist() == [True] * 4

    def test_analytic_bound_diverges(self, solution):
        """s = 1 with r > A₂/λ: the weight outgrows the exponential decay."""
        A2 = solution.pieces[0].profile.A2
        profile = forcing_profile(solution, gevrey_weight(A2, 1.0), samples_per_interval=50)
        assert profile.bound_diverges
        assert np.all(np.diff(profile.table["log_bound_sq"]) > 0)

    def test_forcing_vanishes_after_end(self, solution):
        _, fa, fb = solution.forcing_coefficients(solution.T_end + 0.5)
        assert fa[0] == 0.0 and fb[0] == 0.0

    def test_frame(self, solution):
        frame = solution_frame(solution, [0.5, 1.0], zero_weight(), samples_per_interval=20)
        assert list(frame.columns) == ["t", "k", "energy_alpha_0.5", "energy_alpha_1",
                                       "forcing_norm"]
        assert len(frame) == 4 * 20 + 1

    def test_bad_alpha(self, solution):
        with pytest.raises(DomainError):
            blowup_diagnostics(solution, 0.0)


class TestLongSchedule:
    """Twelve bridges on the synthetic connection."""

    @pytest.fixture(scope="class")
    def long_solution(self, synthetic_candidate, op):
        schedule = make_schedule(synthetic_candidate, op, K_max=12)
        return assemble(synthetic_candidate, schedule, make_cutoff())

    def test_junctions_continuous(self, long_solution):
        report = junction_check(long_solution, tol=1e-9, second_tol=1e-6)
        assert report.passed, report.failed()
        assert len(report.clauses) == 26

    def test_energy_doubles_in_log(self, long_solution):
        """α = 1/2 gives 1, 4, 16, ..., 4¹² at the junctions."""
        table = blowup_diagnostics(long_solution, 0.5, samples_per_interval=10).junctions
        assert table["exact"].tolist() == [4.0 ** k for k in range(13)]
        assert np.allclose(table["measured"], table["exact"], rtol=1e-10, atol=0.0)
        assert np.all(table["inner_next"].iloc[:-1] == 0.0)


class TestForcingDecay:
    """A sharper connection makes the per-interval forcing eventually decrease."""

    @pytest.fixture(scope="class")
    def fast_solution(self, fast_synthetic_candidate, op):
        schedule = make_schedule(fast_synthetic_candidate, op, K_max=11)
        return assemble(fast_synthetic_candidate, schedule, make_cutoff())

    @pytest.mark.parametrize("weight", [zero_weight(), gevrey_weight(0.05, 2.0)],
                             ids=["zero", "gevrey"])
    def test_decay_verdict(self, fast_solution, weight):
        profile = forcing_profile(fast_solution, weight, samples_per_interval=400)
        series = profile.table["log_sup_norm"].to_numpy()
        peak = int(np.argmax(series))
        assert 0 < peak < len(series) - 1
        assert profile.decreasing
        assert profile.ratio < 1e-3
        assert profile.verdict == VerdictStatus.PASS

    def test_slow_connection_fails(self, solution):
        """Four bridges of the slow connection are still on the rise."""
        profile = forcing_profile(solution, zero_weight(), samples_per_interval=200)
        assert profile.verdict == VerdictStatus.FAIL


class TestGlueReport:
    """The glue command's junction-law clause reads both one-sided velocities."""

    def test_exact_solution_passes(self, solution):
        report = _blowup_report([blowup_diagnostics(solution, 0.5, samples_per_interval=10)])
        assert report.passed, report.failed()

    def test_perturbed_piece_fails(self, solution):
        pieces = tuple(_FastPiece(p.k, p.S_k, p.profile, p.op) if p.k == 1 else p
                       for p in solution.pieces)
        diag = blowup_diagnostics(replace(solution, pieces=pieces), 0.5, samples_per_interval=10)
        report = _blowup_report([diag])
        assert report.failed() == ["junction_law_alpha_0.5"]


class TestGlobalResidual:
    """The glued ODE-based solution solves the forced equation."""

    def test_residual(self, ode_candidate, op):
        schedule = make_schedule(ode_candidate, op, K_max=3)
        glued = assemble(ode_candidate, schedule, make_cutoff())
        clause = residual_check(glued, samples=300)
        assert clause.status == VerdictStatus.PASS, clause.value
