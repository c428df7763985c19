import math

import numpy as np
import pytest

from gemxpm import (DIM, HILBERT, GateParams, NumericalError, ProjectionError,
                    StabilityError, UndefinedPhaseError, build_hamiltonian,
                    collapse_operators, conditional_phase, evolve,
                    gate_fidelity, initial_state, lindblad_rhs, max_stable_dt,
                    phase_trace, propagator)
from gemxpm.gate import apply_propagator, ideal_image_state, liouvillian_matrix


@pytest.fixture(scope="module")
def caption_h(gate_params):
    return build_hamiltonian(gate_params)


class TestHilbertSpace:
    def test_dimension(self):
        assert HILBERT.dim == 28
        assert len(HILBERT.levels) == 7

    def test_index_map_atomic_major(self):
        assert HILBERT.index("1", 0, 0) == 0
        assert HILBERT.index("1", 0, 1) == 1
        assert HILBERT.index("1", 1, 0) == 2
        assert HILBERT.index("2", 0, 0) == 4
        assert HILBERT.index("3p", 1, 1) == 27

    def test_rejects_multiphoton(self):
        with pytest.raises(ValueError):
            HILBERT.index("1", 2, 0)


class TestBuildHamiltonian:
    def test_hermitian(self, caption_h):
        assert np.abs(caption_h - caption_h.conj().T).max() == 0.0

    def test_diagonal_when_uncoupled(self):
        p = GateParams(g=0.0, OmegaC=0.0, OmegaCPrime=0.0)
        h = build_hamiltonian(p)
        assert np.abs(h - np.diag(np.diag(h))).max() == 0.0

    def test_collective_probe_element(self, gate_params, caption_h):
        row = HILBERT.index("3", 0, 0)
        col = HILBERT.index("1", 1, 0)
        assert caption_h[row, col] == pytest.approx(
            gate_params.g * math.sqrt(gate_params.N))

    def test_signal_couplings(self, gate_params, caption_h):
        assert caption_h[HILBERT.index("4", 0, 0), HILBERT.index("2", 0, 1)] \
            == pytest.approx(gate_params.g24)
        assert caption_h[HILBERT.index("3p", 0, 0), HILBERT.index("1p", 0, 1)] \
            == pytest.approx(gate_params.g1p3p)

    def test_detuning_diagonals(self, gate_params, caption_h):
        assert caption_h[HILBERT.index("3", 0, 0), HILBERT.index("3", 0, 0)] \
            == gate_params.Delta
        assert caption_h[HILBERT.index("4", 1, 1), HILBERT.index("4", 1, 1)] \
            == gate_params.delta4

    def test_default_params_reference_set(self):
        p = GateParams()
        assert p.OmegaC == p.OmegaCPrime == 20.0
        assert p.Delta == p.DeltaPrime == 30.0 * p.OmegaC
        assert p.delta4 == 20.0
        assert p.g == 0.085
        assert p.N == 1e7
        assert p.bandwidth == 1.0
        assert p.g13 == p.g1p3p == pytest.approx(0.085 * math.sqrt(1e7))
        assert p.g24 == p.g

    def test_stored_signal_coupling(self):
        p = GateParams()
        d = p.with_stored_signal_coupling()
        w = math.hypot(p.g1p3p, p.OmegaCPrime)
        assert d.g24 == pytest.approx(p.g * p.OmegaCPrime / w)
        assert d.g13 == p.g13


class TestInitialState:
    def test_trace_one(self):
        rho = initial_state()
        assert rho.trace() == pytest.approx(1.0, abs=1e-14)

    def test_ground_coherence_element(self):
        rho = initial_state()
        val = rho[HILBERT.index("1", 0, 0), HILBERT.index("2", 0, 0)]
        assert val == pytest.approx(0.125)

    def test_no_excited_population(self):
        rho = initial_state()
        for level in ("3", "4", "3p"):
            for np_ in (0, 1):
                for ns in (0, 1):
                    i = HILBERT.index(level, np_, ns)
                    assert rho[i, i] == 0.0

    def test_positive_semidefinite(self):
        assert np.linalg.eigvalsh(initial_state()).min() >= -1e-15


class TestLindbladRhs:
    def test_traceless(self, caption_h):
        rho = initial_state()
        d = lindblad_rhs(rho, caption_h, 1.0)
        assert abs(d.trace()) < 1e-12

    def test_ground_population_nondecreasing_from_mixed(self):
        rho = np.eye(DIM, dtype=complex) / DIM
        h = np.diag(np.arange(DIM, dtype=complex))
        d = lindblad_rhs(rho, h, 1.0)
        for level in ("1", "2", "1p", "2p"):
            for np_ in (0, 1):
                for ns in (0, 1):
                    i = HILBERT.index(level, np_, ns)
                    assert d[i, i].real >= -1e-15

    def test_two_level_decay_against_analytic(self):
        rho0 = np.zeros((DIM, DIM), dtype=complex)
        i3 = HILBERT.index("3", 0, 0)
        rho0[i3, i3] = 1.0
        h = np.zeros((DIM, DIM), dtype=complex)
        traj = evolve(rho0, h, 1.0, 5.0, 1e-3,
                      snapshot_times=np.linspace(0, 5, 11))
        for t, rho in zip(traj.times, traj.states):
            assert rho[i3, i3].real == pytest.approx(math.exp(-t), abs=1e-6)

    def test_dimension_mismatch(self, caption_h):
        with pytest.raises(ValueError):
            lindblad_rhs(np.eye(4, dtype=complex), caption_h, 1.0)

    def test_matches_collapse_operator_form(self, caption_h):
        # the structured dissipator equals the textbook D[c] sum
        rng = np.random.default_rng(7)
        a = rng.normal(size=(DIM, DIM)) + 1j * rng.normal(size=(DIM, DIM))
        rho = a @ a.conj().T
        rho /= rho.trace()
        gamma = 0.7
        expected = -1j * (caption_h @ rho - rho @ caption_h)
        for c, rate in collapse_operators(gamma):
            cdc = c.conj().T @ c
            expected += rate * (c @ rho @ c.conj().T
                                - 0.5 * (cdc @ rho + rho @ cdc))
        got = lindblad_rhs(rho, caption_h, gamma)
        assert np.abs(got - expected).max() < 1e-12


class TestEvolve:
    def test_identity_evolution(self):
        rho0 = initial_state()
        h = np.zeros((DIM, DIM), dtype=complex)
        traj = evolve(rho0, h, 0.0, 3.0, 0.05, method="rk4")
        assert np.abs(traj.final - rho0).max() == 0.0

    def test_unitary_purity_conserved_rk4(self):
        # mild Hamiltonian: the explicit stepper holds the purity budget
        p = GateParams(OmegaC=0.5, OmegaCPrime=0.5, Delta=2.0, DeltaPrime=2.0,
                       delta4=1.0, g=1e-4)
        h = build_hamiltonian(p)
        rho0 = initial_state()
        traj = evolve(rho0, h, 0.0, 5.0, 1e-3, method="rk4")
        pur0 = np.trace(rho0 @ rho0).real
        pur1 = np.trace(traj.final @ traj.final).real
        assert abs(pur1 - pur0) < 1e-8

    def test_unitary_eigenvalues_conserved(self, caption_h):
        rho0 = initial_state()
        traj = evolve(rho0, caption_h, 0.0, 15.0, 1e-4)
        ev0 = np.sort(np.linalg.eigvalsh(rho0))
        ev1 = np.sort(np.linalg.eigvalsh(traj.final))
        assert np.abs(ev1 - ev0).max() < 1e-8

    def test_step_size_enforced(self, caption_h):
        with pytest.raises(StabilityError):
            evolve(initial_state(), caption_h, 1.0, 1.0, 1e-2)

    def test_trace_drift_abort(self, caption_h):
        # a non-normalised state trips the trace monitor immediately
        with pytest.raises(NumericalError, match="trace"):
            evolve(2.0 * initial_state(), caption_h, 1.0, 1.0, 1e-4)

    def test_unitary_method_requires_gamma_zero(self, caption_h):
        with pytest.raises(ValueError):
            evolve(initial_state(), caption_h, 1.0, 1.0, 1e-4,
                   method="unitary")

    def test_reference_run_trace_drift(self, gate_trajectory):
        for rho in gate_trajectory.states:
            assert abs(rho.trace().real - 1.0) < 1e-8

    def test_reference_run_positivity(self, gate_trajectory):
        for rho in gate_trajectory.states[::5]:
            assert np.linalg.eigvalsh(rho).min() >= -1e-8


class TestConditionalPhase:
    def test_initial_phase_zero(self):
        assert conditional_phase(initial_state()) == 0.0

    def test_global_phase_invariance(self, gate_trajectory):
        # conjugation by exp(i*theta)*I leaves rho unchanged up to the
        # rounding of the two matrix products themselves (~1e-17/element)
        rho = gate_trajectory.states[-1]
        theta = 0.7321
        u = np.exp(1j * theta) * np.eye(DIM)
        rho2 = u @ rho @ u.conj().T
        assert conditional_phase(rho2) == pytest.approx(
            conditional_phase(rho), abs=1e-12)

    def test_undefined_phase_signalled(self):
        rho = np.zeros((DIM, DIM), dtype=complex)
        rho[HILBERT.index("1p", 0, 0), HILBERT.index("1p", 0, 0)] = 1.0
        with pytest.raises(UndefinedPhaseError):
            conditional_phase(rho)

    def test_reference_phase_in_expected_window(self, gate_trajectory):
        # bare couplings: the free s photon shifts |2> by the full
        # g24^2*delta4/(gamma^2+delta4^2); compare at t = 15
        p = GateParams()
        rate = p.g24 ** 2 * p.delta4 / (p.gamma ** 2 + p.delta4 ** 2)
        phi = conditional_phase(gate_trajectory.final)
        assert abs(phi) == pytest.approx(rate * 15.0, rel=0.05)

    def test_dressed_phase_rate_matches_integrand(self, dressed_phase_trace):
        # beyond the transient the phase accrues at the stored-intensity
        # light-shift rate
        tr = dressed_phase_trace
        p = GateParams().with_stored_signal_coupling()
        rate_expected = p.g24 ** 2 * p.delta4 / (p.gamma ** 2 + p.delta4 ** 2)
        mask = tr.times >= 10.0
        slope = np.polyfit(tr.times[mask], tr.phi[mask], 1)[0]
        assert 0.5 < abs(slope) / rate_expected < 2.0


class TestGateFidelity:
    def test_ideal_image_fidelity_one(self):
        phi = -3.3e-3
        psi = ideal_image_state(phi)
        rho_q = np.outer(psi, psi.conj())
        # embed the two-qubit state back into the full space
        rho = np.zeros((DIM, DIM), dtype=complex)
        idx = [HILBERT.index(lv, 0, ns) for ns in (0, 1) for lv in ("1", "2")]
        rho[np.ix_(idx, idx)] = rho_q
        assert gate_fidelity(rho, phi) == pytest.approx(1.0, abs=1e-12)
        assert conditional_phase(rho) == pytest.approx(phi, abs=1e-12)

    def test_adiabatic_high_fidelity(self):
        # couplings weak enough that every second-order phase accumulated
        # over the window stays well below the fidelity budget
        p = GateParams(OmegaC=0.5, OmegaCPrime=0.5, g=0.00085, gamma=0.0)
        tr = phase_trace(p, t_end=15.0, n_samples=6, method="auto")
        assert tr.fidelity[-1] > 0.999

    def test_projection_error(self):
        rho = np.zeros((DIM, DIM), dtype=complex)
        rho[HILBERT.index("3p", 0, 0), HILBERT.index("3p", 0, 0)] = 1.0
        with pytest.raises(ProjectionError):
            gate_fidelity(rho, 0.0)

    def test_reference_run_fidelity(self, gate_trajectory):
        rho = gate_trajectory.final
        phi = conditional_phase(rho)
        f = gate_fidelity(rho, phi)
        assert 0.9 < f <= 1.0


class TestPhaseTrace:
    def test_starts_at_zero(self, dressed_phase_trace):
        assert dressed_phase_trace.phi[0] == 0.0
        assert dressed_phase_trace.fidelity[0] == pytest.approx(1.0, abs=1e-12)

    def test_times_increasing(self, dressed_phase_trace):
        assert np.all(np.diff(dressed_phase_trace.times) > 0)

    def test_dressed_phase_magnitude(self, dressed_phase_trace):
        phi_mrad = abs(dressed_phase_trace.phi[-1]) * 1e3
        assert 0.005 <= phi_mrad <= 0.08


class TestPropagator:
    def test_matches_rk4(self, gate_params, caption_h):
        rho0 = initial_state()
        prop = propagator(caption_h, gate_params.gamma, 2.0)
        via_prop = apply_propagator(prop, rho0)
        via_rk4 = evolve(rho0, caption_h, gate_params.gamma, 2.0,
                         max_stable_dt(caption_h, gate_params.gamma)).final
        assert np.abs(via_prop - via_rk4).max() < 1e-3
        assert conditional_phase(via_prop) == pytest.approx(
            conditional_phase(via_rk4), abs=1e-8)

    def test_liouvillian_traceless_action(self, caption_h):
        lv = liouvillian_matrix(caption_h, 1.0)
        rho = initial_state()
        d = (lv @ rho.reshape(-1)).reshape(DIM, DIM)
        assert abs(d.trace()) < 1e-12
        assert np.abs(d - lindblad_rhs(rho, caption_h, 1.0)).max() < 1e-12


class TestConvergence:
    @pytest.mark.slow
    def test_phi_converged_in_dt(self, gate_params, caption_h,
                                 gate_trajectory):
        dt = max_stable_dt(caption_h, gate_params.gamma)
        fine = evolve(initial_state(), caption_h, gate_params.gamma, 15.0,
                      dt / 2.0)
        phi_coarse = conditional_phase(gate_trajectory.final)
        phi_fine = conditional_phase(fine.final)
        assert phi_coarse == pytest.approx(phi_fine, rel=0.01)
