"""Cross-phase-modulation calculators and protocol drivers.

Closed forms and quadratures for the ac-Stark phase and loss, probe/signal
scans built on the storage solver, the single-photon order-of-magnitude
estimate, and the double-storage protocol in which probe and signal are
held simultaneously in the memory.

Phase sign convention: reported XPM phases are positive for positive
detuning and equal the time integral of the light shift, i.e.
(reference echo phase) - (with-signal echo phase) for solver-based scans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import c as _C_LIGHT
from scipy.constants import epsilon_0 as _EPS0
from scipy.constants import hbar as _HBAR
from scipy.integrate import simpson

from .errors import NumericalError, ProtocolError, StabilityError
from .gem import (CoherenceRecord, FieldRecord, StarkDrive, StorageResult,
                  _centroid_phase, _cumtrapz_z, _window_integral, apply_stark_drive,
                  propagate)
from .model import (EnsembleParams, GradientSchedule, Grid, PiecewiseConstant,
                    PulseSpec)


@dataclass(frozen=True)
class XpmResult:
    """Phase and surviving-amplitude fraction of a stored coherence."""

    phase: float              # radians
    loss_factor: float        # amplitude fraction in [0, 1]
    interaction_time: float   # units of 1/gamma


def phi_free_signal(Omega_s: float, delta3: float, tau: float,
                    gamma: float) -> float:
    """Phase imprinted by a free-propagating signal of Rabi frequency
    Omega_s and duration tau:  Omega_s^2 * delta3 * tau / (2*(gamma^2 + delta3^2))."""
    denom = gamma * gamma + delta3 * delta3
    if denom == 0.0:
        raise ValueError("gamma and delta3 cannot both vanish")
    return Omega_s ** 2 * delta3 * tau / (2.0 * denom)


def phi_stored_pair(signal_envelope: Sequence[float], delta4: float,
                    gamma: float, tau1: float, tau2: float) -> XpmResult:
    """Phase and loss of a stored coherence driven by a stored signal.

    ``signal_envelope`` samples g*|E_s| uniformly on [tau1, tau2] (at least
    64 points).  The phase is the composite-Simpson quadrature of
    |g*E_s|^2 * delta4 / (gamma^2 + delta4^2); the loss factor is
    exp(-integral of |g*E_s|^2 * gamma / (gamma^2 + delta4^2)).
    """
    if not tau2 > tau1:
        raise ValueError(f"tau2 must exceed tau1, got ({tau1}, {tau2})")
    env = np.asarray(signal_envelope, dtype=float)
    if env.ndim != 1 or env.size < 64:
        raise ValueError(
            f"envelope must be sampled at >= 64 points on [tau1, tau2], "
            f"got {env.size}")
    denom = gamma * gamma + delta4 * delta4
    if denom == 0.0:
        raise ValueError("gamma and delta4 cannot both vanish")
    # integrate over elapsed time so the result depends on tau1, tau2 only
    # through the duration (manifest translation invariance)
    s = np.linspace(0.0, tau2 - tau1, env.size)
    intensity = env * env
    integral = float(simpson(intensity, x=s))
    phase = integral * delta4 / denom
    loss_exp = integral * gamma / denom
    return XpmResult(phase=phase, loss_factor=math.exp(-loss_exp),
                     interaction_time=tau2 - tau1)


def coupling_loss_rate(OmegaCPrime: float, DeltaPrime: float,
                       gamma: float) -> float:
    """Scattering rate gamma*(OmegaCPrime/DeltaPrime)^2 of a coherence whose
    coupling field is left on."""
    if DeltaPrime == 0.0:
        raise ValueError("DeltaPrime must be nonzero")
    return gamma * (OmegaCPrime / DeltaPrime) ** 2


def scattering_consistency(eff_with: float, eff_without: float) -> float:
    """Implied integrated scattering exponent -ln(eff_with / eff_without).

    Both efficiencies are intensity-like, so the returned exponent is in
    the intensity convention (twice the amplitude exponent).
    """
    if not (0.0 < eff_with <= eff_without <= 1.0):
        raise ValueError(
            f"need 0 < eff_with <= eff_without <= 1, got "
            f"({eff_with}, {eff_without})")
    return -math.log(eff_with / eff_without)


def spm_scan(params: EnsembleParams, base_probe: PulseSpec,
             amplitude_factors: Sequence[float], *,
             schedule: GradientSchedule, grid: Grid,
             stark: Optional[StarkDrive] = None) -> List[Tuple[float, float]]:
    """Recalled echo phase versus probe amplitude.

    Runs the storage solver once per amplitude factor (same drive for all)
    and returns (factor, echo_phase) pairs.  The semiclassical model is
    linear in the probe, so the phases are expected to coincide.
    """
    factors = [float(f) for f in amplitude_factors]
    if not factors or any(f <= 0 for f in factors):
        raise ValueError("amplitude factors must be positive")
    out = []
    for f in factors:
        probe = replace(base_probe, peak_amplitude=f * base_probe.peak_amplitude)
        result = propagate(params, probe, schedule, grid, stark=stark)
        out.append((f, result.echo_phase))
    return out


@dataclass(frozen=True)
class LinearityReport:
    """Fit of the recalled XPM phase against signal intensity."""

    amplitudes: Tuple[float, ...]
    numeric_phases: Tuple[float, ...]
    analytic_phases: Tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float
    analytic_slope: float
    analytic_r_squared: float


def _linear_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def xpm_linearity_scan(params: EnsembleParams,
                       signal_amplitudes: Sequence[float], tau: float, *,
                       probe: Optional[PulseSpec] = None,
                       schedule: Optional[GradientSchedule] = None,
                       grid: Optional[Grid] = None,
                       signal_center: Optional[float] = None,
                       detuning: Optional[float] = None) -> LinearityReport:
    """Scan the signal Rabi frequency and fit phase against Omega_s^2.

    The numeric branch stores the probe, applies a Gaussian signal drive of
    1/e half-width ``tau`` during storage, recalls, and measures the echo
    phase against a signal-free reference.  The analytic branch evaluates
    the free-signal closed form at the same amplitudes.
    """
    amps = [float(a) for a in signal_amplitudes]
    if len(amps) < 4:
        raise ValueError(f"need at least 4 signal amplitudes, got {len(amps)}")
    probe = probe if probe is not None else PulseSpec(1.0, 3.0, 1.0)
    schedule = schedule if schedule is not None else GradientSchedule(
        ((0.0, 9.0, 8.0), (9.0, 20.0, -8.0)))
    grid = grid if grid is not None else Grid(nz=256, nt=4096, t_max=20.0,
                                              L=params.L)
    center = signal_center if signal_center is not None else 6.0
    delta = params.delta3 if detuning is None else float(detuning)

    reference = propagate(params, probe, schedule, grid)
    numeric = []
    for amp in amps:
        drive = apply_stark_drive(PulseSpec(amp, center, tau), params,
                                  detuning=delta)
        run = propagate(params, probe, schedule, grid, stark=drive)
        numeric.append(reference.echo_phase - run.echo_phase)
    analytic = [phi_free_signal(a, delta, tau, params.gamma) for a in amps]

    x = np.array(amps) ** 2
    slope, intercept, r2 = _linear_fit(x, np.array(numeric))
    a_slope, _a_int, a_r2 = _linear_fit(x, np.array(analytic))
    return LinearityReport(amplitudes=tuple(amps),
                           numeric_phases=tuple(numeric),
                           analytic_phases=tuple(analytic),
                           slope=slope, intercept=intercept, r_squared=r2,
                           analytic_slope=a_slope, analytic_r_squared=a_r2)


@dataclass(frozen=True)
class TransitionData:
    """Dipole parameters of the signal transition (SI units).

    Defaults are alkali D2-line scale (Rb): effective dipole moment and
    wavelength; both are stated assumptions, not fitted values.
    """

    dipole_moment: float = 2.537e-29   # C m
    wavelength: float = 780.241e-9     # m


#: Documented experiment-like geometry for the single-photon estimate:
#: cm-scale beam, ~10 us pulse, ~2 GHz signal detuning, MHz-scale gamma.
EXPERIMENT_GEOMETRY = {
    "beam_waist": 5.0e-3,                 # m
    "pulse_duration": 1.0e-5,             # s
    "delta": 2.0 * math.pi * 2.0e9,       # rad/s
    "gamma": 2.0 * math.pi * 3.03e6,      # rad/s
}


@dataclass(frozen=True)
class SinglePhotonEstimate:
    """Single-photon XPM estimate with the inputs echoed."""

    phase: float                 # radians
    single_photon_rabi: float    # rad/s
    mode_volume: float           # m^3
    beam_waist: float
    pulse_duration: float
    delta: float
    gamma: float
    transition: TransitionData


def single_photon_estimate(beam_waist: float, pulse_duration: float,
                           delta: float, gamma: float,
                           transition_data: Optional[TransitionData] = None
                           ) -> SinglePhotonEstimate:
    """Order-of-magnitude phase for signal and probe at the photon level.

    The single-photon Rabi frequency follows from the field per photon in
    the travelling mode volume V = (pi*w0^2/2) * c * tau, and the phase is
    the free-signal closed form evaluated at that Rabi frequency.  All
    arguments are SI (meters, seconds, rad/s).
    """
    if beam_waist <= 0 or pulse_duration <= 0:
        raise ValueError("beam geometry must be positive")
    tr = transition_data if transition_data is not None else TransitionData()
    area = math.pi * beam_waist ** 2 / 2.0
    volume = area * _C_LIGHT * pulse_duration
    omega_opt = 2.0 * math.pi * _C_LIGHT / tr.wavelength
    field_per_photon = math.sqrt(_HBAR * omega_opt / (2.0 * _EPS0 * volume))
    rabi = tr.dipole_moment * field_per_photon / _HBAR
    phase = phi_free_signal(rabi, delta, pulse_duration, gamma)
    return SinglePhotonEstimate(phase=phase, single_photon_rabi=rabi,
                                mode_volume=volume, beam_waist=beam_waist,
                                pulse_duration=pulse_duration, delta=delta,
                                gamma=gamma, transition=tr)


@dataclass(frozen=True)
class DoubleStorageResult:
    """Outcome of the two-polariton hold protocol.

    ``xpm`` carries the recalled-probe phase (against the signal-free
    reference) and the coherence amplitude surviving the hold.  The k-t
    diagnostics of both coherences are reconstructed from the records.
    """

    xpm: XpmResult
    probe_field: FieldRecord
    probe_coherence: CoherenceRecord
    signal_field: FieldRecord
    signal_coherence: CoherenceRecord
    reference: StorageResult
    probe_echo_phase: float
    probe_efficiency: float
    tau1: float
    tau2: float
    hold_times: np.ndarray
    effective_signal_envelope: np.ndarray   # g|E_s| weighted over the probe


def _require(cond: bool, why: str) -> None:
    if not cond:
        raise ProtocolError(
            f"{why}; required pattern: write gradient of one sign with both "
            "pulses mapped in, eta = 0 hold on [tau1, tau2] with the probe "
            "coupling off and the signal coupling on, then an opposite-sign "
            "recall gradient")


def double_storage_run(params: EnsembleParams, probe: PulseSpec,
                       signal: PulseSpec, schedule: GradientSchedule,
                       grid: Grid) -> DoubleStorageResult:
    """Simulate probe and signal coherences held simultaneously in the cell.

    The probe coherence evolves under the storage equations with its
    coupling field off during the hold; the signal coherence evolves under
    the opposite-signed gradient with its coupling left on (and the
    corresponding coupling scattering rate).  During the hold the signal's
    photonic component, reconstructed by the same slaved-field march, acts
    on the probe coherence as a local ac-Stark drive with detuning delta4.

    Returns the recalled-probe phase relative to a signal-free reference
    run, the surviving coherence fraction, and both space-time records.
    """
    hold = schedule.hold_window()
    _require(hold is not None, "schedule has no eta = 0 hold segment")
    tau1, tau2 = hold
    flip = schedule.flip_time()
    _require(flip is not None, "schedule has no recall sign flip")
    _require(flip >= tau2 - 1e-12, "recall must not precede the hold")
    _require(probe.center_time < signal.center_time,
             "probe must precede the signal")
    _require(signal.center_time + 2.0 * signal.duration <= tau1,
             "signal pulse must be stored before the hold starts")
    _require(probe.center_time + 2.0 * probe.duration <= tau1,
             "probe pulse must be stored before the hold starts")
    if not schedule.covers(grid.t_max):
        raise ValueError("schedule does not cover the grid window")

    gamma = params.gamma
    delta4 = params.delta4
    denom = gamma * gamma + delta4 * delta4
    c_shift = delta4 / denom
    c_loss = gamma / denom
    sig_loss = coupling_loss_rate(params.OmegaCPrime, params.DeltaPrime, gamma)

    probe_coupling = PiecewiseConstant((
        (0.0, tau1, 1.0), (tau1, tau2, 0.0), (tau2, grid.t_max, 1.0)))

    # Stability: both subsystems see the gradient ramp; the probe also sees
    # the drive, bounded by the signal input peak intensity.
    peak_drive = signal.peak_amplitude ** 2 * max(abs(c_shift), c_loss)
    rate = (params.gamma0 + sig_loss + peak_drive
            + schedule.max_abs_eta * params.L / 2.0
            + params.coupling_density
            * max(params.raman_ratio, params.raman_ratio_signal) ** 2
            * params.L / (2.0 * math.pi))
    if grid.dt > 1.0 / rate:
        raise StabilityError(grid.dt, 1.0 / rate)

    nz, nt = grid.nz, grid.nt
    dz, dt = grid.dz, grid.dt
    zeta = grid.z - params.L / 2.0
    kappa = params.coupling_density
    ratio_p = params.raman_ratio
    ratio_s = params.raman_ratio_signal
    times = grid.t

    sig_p = np.zeros(nz, dtype=complex)
    sig_s = np.zeros(nz, dtype=complex)
    rec_p = np.empty((nt, nz), dtype=complex)
    rec_s = np.empty((nt, nz), dtype=complex)
    fld_p = np.empty((nt, nz), dtype=complex)
    fld_s = np.empty((nt, nz), dtype=complex)
    coup_p = np.empty(nt)
    buf = np.empty(nz, dtype=complex)

    def fields(sp, ss, t):
        mult = probe_coupling.value(t)
        ep = np.array(_cumtrapz_z(sp, dz, buf))
        ep *= 1j * kappa * ratio_p * mult
        ep += complex(probe.envelope(t))
        es = np.array(_cumtrapz_z(ss, dz, buf))
        es *= 1j * kappa * ratio_s
        es += complex(signal.envelope(t))
        return ep, es, mult

    def rhs(sp, ss, t):
        ep, es, mult = fields(sp, ss, t)
        eta = schedule.eta(t)
        if tau1 <= t < tau2:
            drive = np.abs(es) ** 2
            decay_p = params.gamma0 + c_loss * drive
            shift_p = eta * zeta + c_shift * drive
        else:
            decay_p = params.gamma0
            shift_p = eta * zeta
        dp = -(decay_p + 1j * shift_p) * sp + (1j * ratio_p * mult) * ep
        ds = (-(params.gamma0 + sig_loss + 1j * (-eta) * zeta) * ss
              + 1j * ratio_s * es)
        return dp, ds

    for n in range(nt):
        t = times[n]
        rec_p[n] = sig_p
        rec_s[n] = sig_s
        ep, es, mult = fields(sig_p, sig_s, t)
        fld_p[n] = ep
        fld_s[n] = es
        coup_p[n] = mult
        if n == nt - 1:
            break
        k1p, k1s = rhs(sig_p, sig_s, t)
        k2p, k2s = rhs(sig_p + 0.5 * dt * k1p, sig_s + 0.5 * dt * k1s,
                       t + 0.5 * dt)
        k3p, k3s = rhs(sig_p + 0.5 * dt * k2p, sig_s + 0.5 * dt * k2s,
                       t + 0.5 * dt)
        k4p, k4s = rhs(sig_p + dt * k3p, sig_s + dt * k3s, t + dt)
        sig_p = sig_p + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        sig_s = sig_s + (dt / 6.0) * (k1s + 2 * k2s + 2 * k3s + k4s)
        if n % 64 == 0 and not (np.all(np.isfinite(sig_p.view(float)))
                                and np.all(np.isfinite(sig_s.view(float)))):
            raise NumericalError(f"non-finite coherence at t={t + dt:.4f}")

    reference = propagate(params, probe, schedule, grid,
                          coupling=probe_coupling)

    probe_field = FieldRecord(values=fld_p, grid=grid, coupling=coup_p)
    probe_coh = CoherenceRecord(values=rec_p, grid=grid, coupling=coup_p)
    signal_field = FieldRecord(values=fld_s, grid=grid)
    signal_coh = CoherenceRecord(values=rec_s, grid=grid)

    input_energy = _window_integral(times, np.abs(probe.envelope(times)) ** 2,
                                    0.0, flip)
    echo_energy = _window_integral(times, np.abs(fld_p[:, -1]) ** 2,
                                   flip, grid.t_max)
    efficiency = echo_energy / input_energy if input_energy > 0 else 0.0
    echo_phase = _centroid_phase(times, fld_p[:, -1], flip, grid.t_max)
    phase = (reference.echo_phase - echo_phase
             if math.isfinite(echo_phase) and math.isfinite(reference.echo_phase)
             else math.nan)

    i2 = max(int(np.searchsorted(times, tau2, side="right")) - 1, 0)
    norm_sig = float(np.linalg.norm(rec_p[i2]))
    norm_ref = float(np.linalg.norm(reference.coherence.values[i2]))
    loss_factor = norm_sig / norm_ref if norm_ref > 0 else math.nan

    hold_mask = (times >= tau1) & (times <= tau2)
    hold_times = times[hold_mask]
    w = np.abs(reference.coherence.values[hold_mask]) ** 2
    w_sum = np.maximum(w.sum(axis=1), 1e-300)
    eff_intensity = (w * np.abs(fld_s[hold_mask]) ** 2).sum(axis=1) / w_sum
    eff_env = np.sqrt(eff_intensity)

    xpm = XpmResult(phase=phase,
                    loss_factor=min(loss_factor, 1.0) if math.isfinite(loss_factor) else loss_factor,
                    interaction_time=tau2 - tau1)
    return DoubleStorageResult(xpm=xpm, probe_field=probe_field,
                               probe_coherence=probe_coh,
                               signal_field=signal_field,
                               signal_coherence=signal_coh,
                               reference=reference,
                               probe_echo_phase=echo_phase,
                               probe_efficiency=efficiency,
                               tau1=tau1, tau2=tau2, hold_times=hold_times,
                               effective_signal_envelope=eff_env)
