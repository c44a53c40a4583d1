import numpy as np
import pytest

import qgplab as q
from qgplab import numerics
from qgplab.errors import DegenerateSpectrumError, NonHermitianError, PropagationError

from oracles import rotating_exact_state

SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


class TestTimeGrid:
    def test_linspace_uniform(self):
        g = q.TimeGrid.linspace(0.0, 2.0, 11)
        assert g.uniform and np.isclose(g.dt, 0.2)
        assert g.t0 == 0.0 and g.t1 == 2.0 and g.n == 11

    def test_long_linspace_stays_uniform(self):
        # diff jitter from sample rounding must not defeat the uniform flag
        g = q.TimeGrid.linspace(0.0, 5.548e-4, 64010)
        assert g.uniform

    def test_nonuniform_detected(self):
        g = q.TimeGrid(np.array([0.0, 0.1, 0.3, 0.35]))
        assert not g.uniform and g.dt is None

    @pytest.mark.parametrize("samples", [
        [0.0], [0.0, 0.0], [0.0, -1.0], [0.0, np.inf],
    ])
    def test_invalid_samples_rejected(self, samples):
        with pytest.raises(ValueError):
            q.TimeGrid(np.array(samples, dtype=float))

    def test_index_of(self):
        g = q.TimeGrid.linspace(0.0, 1.0, 5)
        assert g.index_of(0.75) == 3
        with pytest.raises(ValueError):
            g.index_of(0.3)


class TestHermitianEigh:
    def test_sigma_z(self):
        evals, evecs = q.hermitian_eigh(SZ)
        assert np.allclose(evals, [-1.0, 1.0])
        assert np.allclose(np.abs(evecs[:, 0]), [0.0, 1.0])
        assert np.allclose(np.abs(evecs[:, 1]), [1.0, 0.0])

    def test_transverse_free_limit(self):
        evals, _ = q.hermitian_eigh(2.0 * SZ)
        assert np.allclose(evals, [-2.0, 2.0])

    def test_rotating_model_spectrum_time_independent(self, neutron, neutron_model):
        # eigenvalues are +-sqrt(eta^2 + xi^2) at every instant
        rng = np.random.default_rng(7)
        ts = rng.uniform(0.0, 3.0 * neutron.period, 32)
        for t in ts:
            evals, _ = q.hermitian_eigh(neutron_model.h_at(t))
            assert np.allclose(evals, [-neutron.energy, neutron.energy], rtol=1e-13)

    @pytest.mark.parametrize("dim", [2, 3, 4, 5, 6, 7, 8])
    def test_random_hermitian_orthonormal_and_residual(self, dim):
        rng = np.random.default_rng(100 + dim)
        count = 1500
        a = rng.normal(size=(count, dim, dim)) + 1j * rng.normal(size=(count, dim, dim))
        hs = a + np.conj(np.swapaxes(a, 1, 2))
        evals, evecs = numerics.eigh_stack(hs)
        assert np.all(np.diff(evals, axis=1) >= 0)
        eye = np.eye(dim)
        gram = np.einsum("tak,taj->tkj", np.conj(evecs), evecs)
        assert np.abs(gram - eye).max() < 1e-10
        resid = np.einsum("tab,tbk->tak", hs, evecs) - evals[:, None, :] * evecs
        norms = np.linalg.norm(hs, axis=(1, 2))
        assert (np.abs(resid).max(axis=(1, 2)) / norms).max() < 1e-10

    def test_non_hermitian_rejected(self):
        bad = np.array([[0.0, 1.0], [0.5, 0.0]], dtype=complex)
        with pytest.raises(NonHermitianError):
            q.hermitian_eigh(bad)

    def test_degenerate_flagged_and_optional(self):
        h = np.diag([1.0, 1.0 + 1e-12]).astype(complex)
        with pytest.raises(DegenerateSpectrumError):
            q.hermitian_eigh(h)
        evals, _ = q.hermitian_eigh(h, check_degenerate=False)
        assert evals.shape == (2,)

    def test_custom_degeneracy_tolerance(self):
        h = np.diag([0.0, 1e-6]).astype(complex)
        q.hermitian_eigh(h)  # fine at the default tolerance
        with pytest.raises(DegenerateSpectrumError):
            q.hermitian_eigh(h, degeneracy_tolerance=1e-3)


class TestPropagate:
    def test_null_hamiltonian(self):
        grid = q.TimeGrid.linspace(0.0, 5.0, 9)
        psi0 = np.array([0.6, 0.8j])
        states = q.propagate(lambda t: np.zeros((2, 2), dtype=complex), psi0, grid)
        assert np.abs(states - psi0).max() < 1e-12

    def test_eigenstate_accumulates_global_phase(self):
        eta = 1.7
        grid = q.TimeGrid.linspace(0.0, 2.0, 17)
        psi0 = np.array([1.0, 0.0], dtype=complex)
        states = q.propagate(lambda t: eta * SZ, psi0, grid)
        expected = np.exp(-1j * eta * grid.samples)[:, None] * psi0
        assert np.abs(states - expected).max() < 1e-9

    def test_rotating_model_against_closed_form(self, neutron, neutron_model):
        _, f0 = neutron_model.eig_at(0.0)
        psi0 = f0[:, 1]
        grid = q.TimeGrid.linspace(0.0, neutron.period, 17)
        report = q.propagate_report(neutron_model.h_batch, psi0, grid, tol=1e-9)
        exact = rotating_exact_state(neutron, neutron.period, psi0)
        err = float(np.linalg.norm(report.states[-1] - exact))
        assert err < 1e-6
        # halving every step changes the answer by less than 4x the estimate
        assert err < 4.0 * max(report.error_estimate, 1e-12)

    def test_norm_conservation(self, neutron, neutron_model):
        psi0 = np.array([1.0, 0.0], dtype=complex)
        grid = q.TimeGrid.linspace(0.0, neutron.period, 5)
        states = q.propagate_fixed(neutron_model.h_batch, psi0, grid, substeps=2000)
        drift = np.abs(np.linalg.norm(states, axis=1) - 1.0).max()
        assert drift < 1e-9

    def test_second_order_scaling(self, neutron, neutron_model):
        _, f0 = neutron_model.eig_at(0.0)
        psi0 = f0[:, 1]
        grid = q.TimeGrid.linspace(0.0, neutron.period, 2)
        exact = rotating_exact_state(neutron, neutron.period, psi0)
        errs = []
        for n in (400, 800):
            states = q.propagate_fixed(neutron_model.h_batch, psi0, grid, substeps=n)
            errs.append(float(np.linalg.norm(states[-1] - exact)))
        ratio = errs[0] / errs[1]
        assert 4.0 * 0.8 < ratio < 4.0 * 1.2

    def test_step_underflow_reports_last_good_time(self, neutron_model, monkeypatch):
        monkeypatch.setattr(numerics, "_MAX_SUBSTEPS", 64)
        grid = q.TimeGrid.linspace(0.0, 1.0, 3)
        psi0 = np.array([1.0, 0.0], dtype=complex)
        with pytest.raises(PropagationError) as err:
            q.propagate(neutron_model.h_batch, psi0, grid, tol=1e-18)
        assert err.value.last_good_time is not None

    def test_unnormalized_initial_state_rejected(self):
        grid = q.TimeGrid.linspace(0.0, 1.0, 3)
        with pytest.raises(ValueError):
            q.propagate(lambda t: SZ, np.array([1.0, 1.0]), grid)

    def test_hermiticity_enforced_along_the_way(self):
        bad = np.array([[0.0, 1.0], [0.5, 0.0]], dtype=complex)
        grid = q.TimeGrid.linspace(0.0, 1.0, 3)
        with pytest.raises(NonHermitianError):
            q.propagate(lambda t: bad, np.array([1.0, 0.0]), grid)

    def test_three_level_path(self, static_three_level):
        # exercises the eigendecomposition kernel (dim > 2)
        grid = q.TimeGrid.linspace(0.0, 1.5, 7)
        psi0 = np.array([0.0, 1.0, 0.0], dtype=complex)
        states = q.propagate(static_three_level.h_at, psi0, grid)
        expected = np.exp(-2j * grid.samples)[:, None] * psi0
        assert np.abs(states - expected).max() < 1e-9


class TestIntegrate:
    def test_constant_over_interval(self):
        grid = q.TimeGrid.linspace(0.0, 2.0, 9)
        assert np.isclose(q.integrate(np.ones(9), grid), 2.0, atol=1e-14)
        two = q.TimeGrid.linspace(0.0, 2.0, 2)
        assert np.isclose(q.integrate(np.ones(2), two), 2.0, atol=1e-14)

    def test_sine_half_period(self):
        grid = q.TimeGrid.linspace(0.0, np.pi, 1001)
        val = q.integrate(np.sin(grid.samples), grid)
        assert abs(val - 2.0) < 1e-6

    def test_simpson_refinement_ratio(self):
        exact = np.e - 1.0
        errs = []
        for n in (65, 129):
            grid = q.TimeGrid.linspace(0.0, 1.0, n)
            errs.append(abs(q.integrate(np.exp(grid.samples), grid) - exact))
        ratio = errs[0] / errs[1]
        assert 10.0 < ratio < 22.0

    def test_even_sample_count_keeps_fourth_order(self):
        exact = np.e - 1.0
        errs = []
        for n in (64, 128):
            grid = q.TimeGrid.linspace(0.0, 1.0, n)
            errs.append(abs(q.integrate(np.exp(grid.samples), grid) - exact))
        assert 10.0 < errs[0] / errs[1] < 22.0

    def test_trapezoid_on_nonuniform(self):
        rng = np.random.default_rng(3)
        ts = np.sort(rng.uniform(0.0, 1.0, 200))
        ts[0], ts[-1] = 0.0, 1.0
        grid = q.TimeGrid(ts)
        val = q.integrate(ts**2, grid)
        assert abs(val - 1.0 / 3.0) < 1e-3

    def test_accumulate_prefix_consistency(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=31)
        grid = q.TimeGrid.linspace(0.0, 3.0, 31)
        running = q.accumulate(values, grid)
        for stop in (3, 4, 10, 17, 30, 31):
            sub = q.TimeGrid(grid.samples[:stop])
            assert abs(running[stop - 1] - q.integrate(values[:stop], sub)) < 1e-12

    def test_length_mismatch_rejected(self):
        grid = q.TimeGrid.linspace(0.0, 1.0, 5)
        with pytest.raises(ValueError):
            q.integrate(np.ones(4), grid)

    def test_complex_rejected(self):
        grid = q.TimeGrid.linspace(0.0, 1.0, 5)
        with pytest.raises(TypeError):
            q.integrate(np.ones(5, dtype=complex), grid)


class TestUnwrapPhase:
    def test_already_smooth(self):
        assert np.allclose(q.unwrap_phase([0.0, 0.1, 0.2]), [0.0, 0.1, 0.2])

    def test_branch_repair(self):
        out = q.unwrap_phase([3.0, -3.0])
        assert np.allclose(out, [3.0, -3.0 + 2.0 * np.pi])

    def test_linear_ramp_slope(self):
        ts = np.linspace(0.0, 2.0, 4001)
        wrapped = np.angle(np.exp(1j * 5.0 * ts))
        unwrapped = q.unwrap_phase(wrapped)
        slope = np.polyfit(ts, unwrapped, 1)[0]
        assert abs(slope - 5.0) < 1e-9
        assert np.allclose(np.mod(unwrapped - wrapped, 2.0 * np.pi), 0.0, atol=1e-9)


class TestTimeDerivative:
    def test_fourth_order_on_oscillation(self):
        errs = []
        for n in (101, 201):
            grid = q.TimeGrid.linspace(0.0, 1.0, n)
            series = np.exp(1j * 3.0 * grid.samples)
            deriv = numerics.time_derivative(series, grid)
            errs.append(np.abs(deriv - 3j * series).max())
        assert errs[0] / errs[1] > 12.0  # 2^4 with slack
