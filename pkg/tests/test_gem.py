import dataclasses
import math

import numpy as np
import pytest

from gemxpm import (EnsembleParams, GradientSchedule, PiecewiseConstant,
                    PulseSpec, StabilityError, NumericalError, StarkDrive,
                    apply_stark_drive, build_grid, constant_stark_drive,
                    excitation_balance, group_velocity, peak_k_trajectory,
                    polariton_transform, propagate, verify_fourier_relation)

from _reference import reference_storage_run


TWO_PI = 2.0 * math.pi


class TestStarkDrive:
    def test_zero_signal(self, baseline_params):
        drive = apply_stark_drive(PulseSpec(0.0, 5.0, 1.0), baseline_params)
        t = np.linspace(0, 10, 11)
        assert np.all(drive.delta_ac(t) == 0)
        assert np.all(drive.gamma_s(t) == 0)

    def test_on_resonance_pure_loss(self, baseline_params):
        drive = apply_stark_drive(PulseSpec(0.5, 5.0, 1.0), baseline_params,
                                  detuning=0.0)
        assert np.all(drive.delta_ac(np.linspace(0, 10, 21)) == 0)
        # peak loss = |Omega|^2 / gamma at pulse center
        assert drive.gamma_s(5.0) == pytest.approx(0.25 / baseline_params.gamma)

    def test_constant_drive_phase_advance(self, baseline_params,
                                          baseline_probe, baseline_schedule,
                                          baseline_grid, baseline_run):
        # rectangular drive over the stored interval: phase advance
        # Omega_s^2 * delta * tau / (gamma^2 + delta^2)
        omega_s, delta, lo, hi = 0.4, 25.0, 5.0, 8.0
        drive = constant_stark_drive(omega_s ** 2, delta,
                                     baseline_params.gamma, (lo, hi))
        run = propagate(baseline_params, baseline_probe, baseline_schedule,
                        baseline_grid, stark=drive)
        expected = omega_s ** 2 * delta * (hi - lo) / (
            baseline_params.gamma ** 2 + delta ** 2)
        measured = baseline_run.echo_phase - run.echo_phase
        assert measured == pytest.approx(expected, rel=1e-3)


class TestPropagate:
    def test_empty_medium_passes_pulse(self, baseline_probe,
                                       baseline_schedule):
        p = EnsembleParams(calN=1e-30)
        grid = build_grid(p, nz=64, nt=2048, t_max=20.0)
        res = propagate(p, baseline_probe, baseline_schedule, grid)
        t = grid.t
        out = np.abs(res.field.values[:, -1])
        expect = np.abs(baseline_probe.envelope(t))
        assert np.max(np.abs(out - expect)) < 1e-12
        assert res.efficiency == pytest.approx(0.0, abs=1e-9)

    def test_high_depth_efficiency(self, baseline_run):
        assert baseline_run.efficiency > 0.8
        assert baseline_run.efficiency < 1.0 + 1e-6

    def test_echo_time_reversal_against_reference(self, baseline_params):
        """Asymmetric double-hump input: the echo profile must match the
        time-mirrored input, and the independent coarse-grid integrator
        must agree on the recall efficiency."""
        sched = GradientSchedule(((0.0, 9.0, 8.0), (9.0, 20.0, -8.0)))
        grid = build_grid(baseline_params, nz=192, nt=3072, t_max=20.0)
        main = PulseSpec(1.0, 2.6, 0.7)
        side = PulseSpec(0.45, 4.4, 0.5)

        def envelope(t):
            return main.envelope(t) + side.envelope(t)

        res = propagate(baseline_params, main, sched, grid,
                        input_envelope=envelope)
        t = grid.t
        inp = np.abs(envelope(t))
        out = np.abs(res.field.values[:, -1])
        # mirror the input about the flip time and correlate with the echo
        mirrored = np.interp(2 * 9.0 - t, t, inp, left=0.0, right=0.0)
        w_echo = t >= 9.0
        a = out[w_echo] / np.linalg.norm(out[w_echo])
        b = mirrored[w_echo] / np.linalg.norm(mirrored[w_echo])
        assert float(a @ b) > 0.95

        ref = reference_storage_run(baseline_params, envelope, sched,
                                    nz=96, t_max=20.0)
        assert res.efficiency == pytest.approx(ref["efficiency"], abs=0.05)
        assert res.efficiency > 0.8

    def test_ground_state_decay_ratio(self, baseline_params, baseline_probe,
                                      baseline_schedule, baseline_grid,
                                      baseline_run):
        # storage time 2*(9-3) = 12; gamma0 = 1/12 gives e^-2 in intensity
        p = dataclasses.replace(baseline_params, gamma0=1.0 / 12.0)
        res = propagate(p, baseline_probe, baseline_schedule, baseline_grid)
        ratio = res.efficiency / baseline_run.efficiency
        assert ratio == pytest.approx(math.exp(-2.0), rel=0.05)

    def test_linearity_in_probe(self, baseline_params, baseline_schedule,
                                baseline_grid, baseline_run):
        for c in (0.1, 2.0, 10.0):
            res = propagate(baseline_params, PulseSpec(c, 3.0, 1.0),
                            baseline_schedule, baseline_grid)
            assert np.allclose(res.field.values, c * baseline_run.field.values,
                               rtol=1e-12, atol=1e-12)
            assert np.allclose(res.coherence.values,
                               c * baseline_run.coherence.values,
                               rtol=1e-12, atol=1e-12)

    def test_recall_phase_reproducible(self, baseline_params, baseline_probe,
                                       baseline_schedule, baseline_grid,
                                       baseline_run):
        res = propagate(baseline_params, baseline_probe, baseline_schedule,
                        baseline_grid)
        assert res.echo_phase == baseline_run.echo_phase

    def test_pure_phase_drive_preserves_efficiency(
            self, baseline_params, baseline_probe, baseline_schedule,
            baseline_grid, baseline_run):
        drive = StarkDrive(
            delta_ac=lambda t: 0.05 * ((np.asarray(t) >= 5) & (np.asarray(t) < 8)),
            gamma_s=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            max_delta_ac=0.05, max_gamma_s=0.0)
        res = propagate(baseline_params, baseline_probe, baseline_schedule,
                        baseline_grid, stark=drive)
        assert abs(res.efficiency - baseline_run.efficiency) < 1e-6
        assert abs(res.echo_phase - baseline_run.echo_phase) > 1e-3

    def test_excitation_conservation(self, baseline_params, baseline_run):
        resid = excitation_balance(baseline_run, baseline_params, 0.0, 20.0)
        assert resid < 1e-3
        resid_abs = excitation_balance(baseline_run, baseline_params, 0.0, 6.0)
        assert resid_abs < 1e-3

    def test_grid_convergence(self, baseline_params, baseline_probe,
                              baseline_schedule, baseline_run):
        coarse = build_grid(baseline_params, nz=128, nt=2048, t_max=20.0)
        res = propagate(baseline_params, baseline_probe, baseline_schedule,
                        coarse)
        assert abs(res.efficiency - baseline_run.efficiency) < 0.01

    def test_stability_rejection_reports_required_dt(self, baseline_params,
                                                     baseline_probe):
        sched = GradientSchedule(((0.0, 9.0, 500.0), (9.0, 20.0, -500.0)))
        grid = build_grid(baseline_params, nz=32, nt=64, t_max=20.0)
        with pytest.raises(StabilityError) as err:
            propagate(baseline_params, baseline_probe, sched, grid)
        assert err.value.dt_required < grid.dt
        assert "required dt" in str(err.value)

    def test_nan_detection_aborts(self, baseline_params, baseline_probe,
                                  baseline_schedule, baseline_grid):
        bad = StarkDrive(
            delta_ac=lambda t: np.where(np.asarray(t) < 5.0, 0.0, math.nan),
            gamma_s=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            max_delta_ac=0.1, max_gamma_s=0.0)
        with pytest.raises(NumericalError):
            propagate(baseline_params, baseline_probe, baseline_schedule,
                      baseline_grid, stark=bad)

    def test_schedule_must_cover_grid(self, baseline_params, baseline_probe):
        sched = GradientSchedule(((0.0, 5.0, 8.0), (5.0, 10.0, -8.0)))
        grid = build_grid(baseline_params, nz=32, nt=512, t_max=20.0)
        with pytest.raises(ValueError):
            propagate(baseline_params, baseline_probe, sched, grid)


class TestPolariton:
    def test_zero_records_zero_polariton(self, baseline_params):
        grid = build_grid(baseline_params, nz=64, nt=16, t_max=1.0)
        from gemxpm import FieldRecord, CoherenceRecord
        z = np.zeros((16, 64), dtype=complex)
        pol = polariton_transform(FieldRecord(z, grid),
                                  CoherenceRecord(z.copy(), grid),
                                  baseline_params)
        assert np.all(pol.values == 0)
        assert verify_fourier_relation(pol, baseline_params, 0.5) == 0.0

    def test_plane_wave_peak(self, baseline_params):
        grid = build_grid(baseline_params, nz=256, nt=4, t_max=1.0)
        from gemxpm import FieldRecord, CoherenceRecord
        k0 = 12 * TWO_PI / baseline_params.L
        window = np.exp(-((grid.z - 0.5) / 0.2) ** 2)
        coh = np.tile(window * np.exp(1j * k0 * grid.z), (4, 1))
        pol = polariton_transform(
            FieldRecord(np.zeros_like(coh), grid),
            CoherenceRecord(coh, grid), baseline_params)
        peak = pol.k[np.argmax(np.abs(pol.coherence_k[0]))]
        assert abs(peak - k0) <= TWO_PI / baseline_params.L + 1e-9

    def test_k_axis_symmetric(self, baseline_run, baseline_params):
        pol = polariton_transform(baseline_run.field, baseline_run.coherence,
                                  baseline_params)
        k = pol.k
        # every bin except the single Nyquist bin has its mirror
        nyquist = k.min()
        for kv in k:
            if kv != nyquist:
                assert np.any(np.isclose(k, -kv, atol=1e-12))

    def test_fourier_relation_during_storage(self, baseline_params,
                                             baseline_run):
        pol = polariton_transform(baseline_run.field, baseline_run.coherence,
                                  baseline_params)
        for t in (6.0, 6.5, 7.5):
            resid = verify_fourier_relation(pol, baseline_params, t)
            assert resid is not None and resid < 1e-2

    def test_peak_k_drift_rate(self, baseline_params, baseline_run,
                               baseline_grid):
        pol = polariton_transform(baseline_run.field, baseline_run.coherence,
                                  baseline_params)
        kk = peak_k_trajectory(pol)
        t = baseline_grid.t
        mask = (t >= 6.0) & (t <= 9.0)
        # with the exp(-ikz) transform the drift rate is -eta
        line = kk[mask][0] - 8.0 * (t[mask] - t[mask][0])
        dev = np.max(np.abs(kk[mask] - line))
        assert dev <= TWO_PI / baseline_params.L

    def test_coupling_off_signal(self, baseline_params, baseline_probe):
        # write, then switch the coupling off: the field must die and the
        # relation check must signal the off condition instead of a number
        sched = GradientSchedule(((0.0, 6.0, 8.0), (6.0, 14.0, 0.0)))
        coupling = PiecewiseConstant(((0.0, 6.0, 1.0), (6.0, 14.0, 0.0)))
        grid = build_grid(baseline_params, nz=192, nt=3072, t_max=14.0)
        res = propagate(baseline_params, baseline_probe, sched, grid,
                        coupling=coupling)
        pol = polariton_transform(res.field, res.coherence, baseline_params)
        assert verify_fourier_relation(pol, baseline_params, 10.0) is None
        t = grid.t
        hold = t >= 7.0
        peak_in = np.abs(baseline_probe.envelope(t)).max()
        assert np.abs(res.field.values[hold]).max() < 1e-6 * peak_in


class TestGroupVelocity:
    def test_scaling_law(self, baseline_params):
        v1 = group_velocity(10.0, baseline_params)
        v2 = group_velocity(20.0, baseline_params)
        assert v2 == pytest.approx(v1 / 4.0)

    def test_zero_coupling(self, baseline_params):
        p = dataclasses.replace(baseline_params, OmegaC=0.0)
        assert group_velocity(5.0, p) == 0.0

    def test_singular_at_zero(self, baseline_params):
        with pytest.raises(ValueError):
            group_velocity(0.0, baseline_params)

    def test_drift_matches_formula(self):
        # stop the polariton at large k so the bin quantisation and the
        # packet k-spread contribute little to the comparison
        p = EnsembleParams(calN=400.0)
        eta = TWO_PI * 255.0 / 256.0
        sched = GradientSchedule(((0.0, 20.0, eta), (20.0, 30.0, 0.0)))
        grid = build_grid(p, nz=256, nt=8192, t_max=30.0)
        res = propagate(p, PulseSpec(1.0, 4.0, 2.0), sched, grid)
        pol = polariton_transform(res.field, res.coherence, p)
        t = grid.t
        mask = (t >= 21.0) & (t <= 29.5)
        kk = peak_k_trajectory(pol)[mask]
        assert kk.max() == kk.min()   # stopped in k-space
        w = np.abs(res.field.values) ** 2
        zc = (w * grid.z[None, :]).sum(axis=1) / np.maximum(
            w.sum(axis=1), 1e-300)
        slope = np.polyfit(t[mask], zc[mask], 1)[0]
        assert slope == pytest.approx(group_velocity(kk[0], p), rel=0.10)
