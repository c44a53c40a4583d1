import numpy as np
import pytest

import qgplab as q
from qgplab.dynamics import adiabatic_phase_series

from oracles import rotating_exact_state


@pytest.fixture(scope="module")
def neutron_traj(neutron, neutron_model):
    grid = q.TimeGrid.linspace(0.0, neutron.period, 1025)
    return q.track(neutron_model, grid, "analytic")


class TestAdiabaticState:
    def test_static_model_phase_only(self, static_three_level):
        grid = q.TimeGrid.linspace(0.0, 2.0, 65)
        traj = q.track(static_three_level, grid, "parallel_transport")
        state = q.adiabatic_state(traj, 1, 2.0)
        expect = np.exp(-2j * 2.0) * traj.frames[0, :, 1]
        assert np.abs(state.vector - expect).max() < 1e-10

    def test_rotating_phase_is_linear(self, neutron, neutron_traj):
        # both the energy and the connection are constants in this gauge
        a_plus = -neutron.omega * np.sin(0.5 * neutron.theta) ** 2
        phases = adiabatic_phase_series(neutron_traj, 1)
        expect = -(neutron.energy - a_plus) * neutron_traj.grid.samples
        assert np.abs(phases - expect).max() < 1e-9 * abs(expect[-1])

    def test_gauge_transform_leaves_the_state_invariant(self, neutron, neutron_traj):
        span = neutron_traj.grid.t1
        g = q.GaugeTransform(fs=(
            lambda t: 0.7 * np.sin(2.0 * np.pi * np.asarray(t, float) / span),
            lambda t: -0.4 * np.sin(4.0 * np.pi * np.asarray(t, float) / span),
        ))
        moved = q.apply_gauge(neutron_traj, g)
        t = float(neutron_traj.grid.samples[700])
        before = q.adiabatic_state(neutron_traj, 1, t).vector
        after = q.adiabatic_state(moved, 1, t).vector
        assert np.abs(before - after).max() < 1e-8

    def test_vector_is_normalized(self, neutron_traj):
        state = q.adiabatic_state(neutron_traj, 0, float(neutron_traj.grid.samples[123]))
        assert abs(np.linalg.norm(state.vector) - 1.0) < 1e-12


class TestExactState:
    def test_null_hamiltonian(self):
        model = q.custom_model(2, lambda t: np.zeros((2, 2), dtype=complex))
        psi0 = np.array([0.6, 0.8], dtype=complex)
        assert np.abs(q.exact_state(model, psi0, 1.7) - psi0).max() < 1e-12

    def test_static_eigenstate_gains_phase_only(self, static_three_level):
        psi0 = np.array([0.0, 0.0, 1.0], dtype=complex)
        out = q.exact_state(static_three_level, psi0, 0.9)
        assert np.abs(out - np.exp(-3j * 0.9) * psi0).max() < 1e-9

    def test_matches_closed_form_rotating(self, neutron, neutron_model):
        _, f0 = neutron_model.eig_at(0.0)
        psi0 = f0[:, 1]
        t = 0.6 * neutron.period
        out = q.exact_state(neutron_model, psi0, t, tol=1e-10)
        assert np.abs(out - rotating_exact_state(neutron, t, psi0)).max() < 1e-6

    def test_negative_time_rejected(self, neutron_model):
        with pytest.raises(ValueError):
            q.exact_state(neutron_model, np.array([1.0, 0.0]), -1.0)


class TestFidelity:
    def test_identical_states(self):
        psi = np.array([0.6, 0.8j])
        assert q.fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_states(self):
        assert q.fidelity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_equal_superposition(self):
        a = np.array([1.0, 0.0])
        b = np.array([1.0, 1.0]) / np.sqrt(2.0)
        assert q.fidelity(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_norm_violation_rejected(self):
        with pytest.raises(ValueError):
            q.fidelity(np.array([1.0, 1.0]), np.array([1.0, 0.0]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            q.fidelity(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_exact_vs_adiabatic_above_paper_bound(self, neutron, neutron_model, neutron_traj):
        psi0 = neutron_traj.frames[0, :, 1]
        t = neutron.period
        exact = q.exact_state(neutron_model, psi0, t, tol=1e-9)
        adiab = q.adiabatic_state(neutron_traj, 1, t).vector
        assert q.fidelity(exact, adiab) > 0.99


class TestAdiabaticityReport:
    def test_unit_parameter_closed_form(self, unit_params):
        # ratio = K / (2 (xi/eta + eta/xi) + 2 K eta / xi) = 1/6 at (1,1,1)
        model = q.rotating_field(unit_params)
        grid = q.TimeGrid.linspace(0.0, unit_params.period, 257)
        traj = q.track(model, grid, "analytic")
        report = q.adiabatic_report(traj, 0, 1)
        assert report.max_ratio_qgp == pytest.approx(1.0 / 6.0, rel=1e-10)

    def test_neutron_bound(self, neutron, neutron_traj):
        report = q.adiabatic_report(neutron_traj, 0, 1)
        closed = neutron.K / (
            2.0 * (neutron.xi / neutron.eta + neutron.eta / neutron.xi)
            + 2.0 * neutron.K * neutron.eta / neutron.xi
        )
        assert report.max_ratio_qgp < 5.0 / 1000.0
        assert report.max_ratio_qgp == pytest.approx(closed, rel=1e-9)

    def test_traditional_ratio_closed_form(self, neutron, neutron_traj):
        report = q.adiabatic_report(neutron_traj, 0, 1)
        closed = (
            neutron.K * neutron.eta * neutron.xi
            / (2.0 * (neutron.eta**2 + neutron.xi**2))
        )
        assert report.max_ratio_traditional == pytest.approx(closed, rel=1e-9)

    def test_static_model_has_zero_ratios(self, static_three_level):
        grid = q.TimeGrid.linspace(0.0, 1.0, 65)
        traj = q.track(static_three_level, grid, "parallel_transport")
        report = q.adiabatic_report(traj, 0, 1)
        assert report.max_ratio_qgp < 1e-12
        assert report.max_ratio_traditional < 1e-12

    def test_resonance_is_flagged_not_masked(self):
        # K < 0 with 2|K| eta cos(theta) = 2 sqrt(eta^2 + xi^2) cancels the
        # corrected gap identically
        p = q.RotatingFieldParams(eta=1.0, xi=1.0, K=-2.0)
        model = q.rotating_field(p)
        grid = q.TimeGrid.linspace(0.0, p.period, 257)
        traj = q.track(model, grid, "analytic")
        report = q.adiabatic_report(traj, 0, 1)
        assert report.resonance_flags.all()
        assert np.all(np.isinf(report.ratio_qgp) | (report.ratio_qgp > 1e6))
        assert np.isfinite(report.ratio_traditional).all()

    def test_fidelity_trace_requested(self, neutron, neutron_traj):
        report = q.adiabatic_report(neutron_traj, 0, 1, propagation_tol=1e-8)
        assert report.fidelity_trace is not None
        assert report.fidelity_trace.shape == (neutron_traj.grid.n,)
        assert report.fidelity_trace.min() > 0.99
        assert report.fidelity_trace.max() <= 1.0

    def test_same_level_rejected(self, neutron_traj):
        with pytest.raises(ValueError):
            q.adiabatic_report(neutron_traj, 1, 1)

    def test_gauge_invariance_of_ratios(self, neutron_traj):
        span = neutron_traj.grid.t1
        g = q.GaugeTransform(fs=(
            lambda t: 0.3 * np.sin(2.0 * np.pi * np.asarray(t, float) / span),
            lambda t: 0.5 * (1.0 - np.cos(2.0 * np.pi * np.asarray(t, float) / span)),
        ))
        base = q.adiabatic_report(neutron_traj, 0, 1)
        moved = q.adiabatic_report(q.apply_gauge(neutron_traj, g), 0, 1)
        assert np.abs(base.ratio_qgp - moved.ratio_qgp).max() < 1e-8 * base.max_ratio_qgp
        assert (
            np.abs(base.ratio_traditional - moved.ratio_traditional).max()
            < 1e-8 * base.max_ratio_traditional
        )


class TestAdiabaticLimit:
    def test_schroedinger_residual_bounded_by_overlap_rates(self, neutron, neutron_traj):
        # i d/dt of the adiabatic solution misses H by exactly the
        # off-diagonal overlap rate, projected onto the other level
        states = q.adiabatic_states(neutron_traj, 1)
        dstates = q.numerics.time_derivative(states, neutron_traj.grid)
        hs = neutron_traj.model.h_stack(neutron_traj.grid.samples)
        resid = 1j * dstates - np.einsum("tab,tb->ta", hs, states)
        norm = np.linalg.norm(resid, axis=1)
        bound = np.abs(q.overlap_rate_series(neutron_traj, 0, 1))
        interior = slice(4, -4)
        assert np.all(norm[interior] <= bound[interior] * (1.0 + 1e-6) + 1e-9 * neutron.energy)

    def test_fidelity_improves_as_transitions_slow(self, neutron):
        # shrinking xi at fixed (eta, K) lowers the ratio and lifts the
        # final fidelity toward one
        final = []
        for xi_hz in (7.21e3, 3.6e3, 1.8e3, 0.9e3, 0.45e3):
            p = q.RotatingFieldParams.from_frequencies(721e3, xi_hz, 5.0)
            model = q.rotating_field(p)
            grid = q.TimeGrid.linspace(0.0, p.period, 257)
            traj = q.track(model, grid, "analytic")
            psi0 = traj.frames[0, :, 1]
            exact = q.exact_state(model, psi0, p.period, tol=1e-10)
            final.append(q.fidelity(exact, q.adiabatic_state(traj, 1, p.period).vector))
        assert all(b >= a - 1e-12 for a, b in zip(final, final[1:]))
        assert final[-1] > final[0]
