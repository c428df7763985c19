"""Semiclassical 1-D Maxwell-Bloch solver for gradient-echo storage.

The model is the adiabatically eliminated two-field pair

    d(sigma)/dt = -[gamma0 + Gamma_s(z,t) + i*(eta(t)*(z - L/2) + delta_ac(z,t))]*sigma
                  + i*(OmegaC/Delta)*E,
    dE/dz       = i*(g*calN)*(OmegaC/Delta)*sigma,

where E = g*script-E is the probe Rabi envelope and sigma the collective
spin coherence.  The field is slaved: at every Runge-Kutta stage it is
marched along z from the boundary value (instantaneous-field limit), and
sigma is advanced in t with a classic fourth-order step.  The gradient is
centred on the cell (eta*(z - L/2)) and Gamma_s/delta_ac vanish unless an
ac-Stark drive is supplied.

Sign conventions worth knowing when reading diagnostics:

* the spatial Fourier transform uses the exp(-i*k*z) kernel, which makes
  the quasi-steady Maxwell relation read  k*E(k) = +g*calN*(OmegaC/Delta)*sigma(k);
* with that kernel and the equations above, the stored polariton's k peak
  moves at rate -eta(t) (the drift magnitude is |eta|; the sign is fixed by
  the transform convention and cannot be chosen independently of the
  Maxwell-relation sign).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NumericalError, StabilityError
from .model import (EnsembleParams, GradientSchedule, Grid, PiecewiseConstant,
                    PulseSpec)

# Explicit RK4 is stable up to |lambda|*dt = 2*sqrt(2) on the imaginary
# axis; we keep a wide margin because the z-marched coupling adds transient
# growth the scalar bound does not see.
_STABILITY_MARGIN = 1.0
_NAN_CHECK_STRIDE = 64


@dataclass(frozen=True)
class StarkDrive:
    """Space-uniform ac-Stark drive produced by a far-detuned signal field.

    ``delta_ac(t)`` is the light shift of the spin coherence and
    ``gamma_s(t)`` the induced amplitude scattering rate.  Both are
    vectorised callables of time; the maxima are used for step-size checks.
    """

    delta_ac: Callable[[np.ndarray], np.ndarray]
    gamma_s: Callable[[np.ndarray], np.ndarray]
    max_delta_ac: float
    max_gamma_s: float


def apply_stark_drive(signal: PulseSpec, params: EnsembleParams,
                      detuning: Optional[float] = None) -> StarkDrive:
    """Reduce a counter-propagating signal pulse to its ac-Stark drive.

    The signal illuminates the whole cell, so the drive carries no z
    dependence.  With intensity I(t) = |g*E_s(t)|^2 and detuning delta,

        delta_ac(t) = I(t) * delta / (gamma^2 + delta^2),
        Gamma_s(t)  = I(t) * gamma / (gamma^2 + delta^2).

    ``detuning`` defaults to params.delta3 (the free-propagating signal
    transition); pass params.delta4 for the stored-pair geometry.
    """
    delta = params.delta3 if detuning is None else float(detuning)
    gamma = params.gamma
    denom = gamma * gamma + delta * delta
    if denom == 0.0:
        raise ValueError("gamma and detuning cannot both vanish")
    c_shift = delta / denom
    c_loss = gamma / denom
    peak_intensity = signal.peak_amplitude ** 2

    def delta_ac(t):
        return c_shift * np.abs(signal.envelope(t)) ** 2

    def gamma_s(t):
        return c_loss * np.abs(signal.envelope(t)) ** 2

    return StarkDrive(delta_ac=delta_ac, gamma_s=gamma_s,
                      max_delta_ac=abs(c_shift) * peak_intensity,
                      max_gamma_s=c_loss * peak_intensity)


def constant_stark_drive(intensity: float, detuning: float, gamma: float,
                         window: Tuple[float, float]) -> StarkDrive:
    """Rectangular drive with |g*E_s|^2 = intensity inside ``window``."""
    denom = gamma * gamma + detuning * detuning
    if denom == 0.0:
        raise ValueError("gamma and detuning cannot both vanish")
    lo, hi = window
    c_shift = intensity * detuning / denom
    c_loss = intensity * gamma / denom

    def _gate(t):
        t = np.asarray(t, dtype=float)
        return ((t >= lo) & (t < hi)).astype(float)

    return StarkDrive(delta_ac=lambda t: c_shift * _gate(t),
                      gamma_s=lambda t: c_loss * _gate(t),
                      max_delta_ac=abs(c_shift), max_gamma_s=c_loss)


@dataclass(frozen=True)
class FieldRecord:
    """Complex probe envelope g*E(t, z) on the grid, plus the coupling-field
    on/off profile sampled at the grid times (1.0 everywhere by default)."""

    values: np.ndarray          # (nt, nz) complex
    grid: Grid
    coupling: Optional[np.ndarray] = None   # (nt,) multiplier on OmegaC

    def __post_init__(self):
        if self.values.shape != (self.grid.nt, self.grid.nz):
            raise ValueError("field array does not match the grid")
        if not np.all(np.isfinite(self.values.view(float))):
            raise ValueError("field record contains non-finite entries")


@dataclass(frozen=True)
class CoherenceRecord:
    """Collective spin coherence sigma(t, z) on the grid."""

    values: np.ndarray          # (nt, nz) complex
    grid: Grid
    coupling: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.values.shape != (self.grid.nt, self.grid.nz):
            raise ValueError("coherence array does not match the grid")
        if not np.all(np.isfinite(self.values.view(float))):
            raise ValueError("coherence record contains non-finite entries")


@dataclass(frozen=True)
class PolaritonRecord:
    """Spatial-Fourier picture of a run.

    values = k*E(t,k) + g*calN*(OmegaC/Delta)*sigma(t,k); the constituents
    are kept separately retrievable.  The k axis is the fftshifted discrete
    axis (ascending; for even nz the single Nyquist bin sits at -pi/dz).
    """

    values: np.ndarray          # (nt, nk) complex, the polariton
    field_k: np.ndarray         # (nt, nk) complex
    coherence_k: np.ndarray     # (nt, nk) complex
    k: np.ndarray               # (nk,)
    grid: Grid
    coupling: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StorageResult:
    """Full space-time solution of one storage/recall run.

    input_energy integrates |E|^2 of the boundary input over [0, flip);
    echo_energy integrates |E(L, t)|^2 over [flip, t_max].  echo_phase is
    the argument of the exit-face field at the energy-weighted centroid of
    the echo (NaN when the echo window is empty or dark).
    """

    field: FieldRecord
    coherence: CoherenceRecord
    input_energy: float
    echo_energy: float
    efficiency: float
    echo_phase: float
    flip_time: Optional[float]
    input_window: Tuple[float, float]
    echo_window: Tuple[float, float]


def _cumtrapz_z(values: np.ndarray, dz: float, out: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid along z with a leading zero, written into out."""
    out[0] = 0.0
    np.cumsum(values[1:] + values[:-1], out=out[1:])
    out[1:] *= 0.5 * dz
    return out


def _march_field(sigma: np.ndarray, e_in: complex, source: complex,
                 dz: float, buf: np.ndarray) -> np.ndarray:
    """Slaved field: E(z) = E(0) + source * integral_0^z sigma dz'."""
    _cumtrapz_z(sigma, dz, buf)
    buf *= source
    buf += e_in
    return buf


def propagate(params: EnsembleParams, probe: PulseSpec,
              schedule: GradientSchedule, grid: Grid,
              stark: Optional[StarkDrive] = None, *,
              coupling: Optional[PiecewiseConstant] = None,
              input_envelope: Optional[Callable] = None,
              extra_decay: float = 0.0) -> StorageResult:
    """Run one storage/recall simulation and return the full solution.

    ``coupling`` optionally switches the coupling field (a multiplier on
    OmegaC per time window); ``input_envelope`` overrides the Gaussian
    probe shape with an arbitrary complex callable of time (the PulseSpec
    still provides the timing used for precondition checks).

    Raises StabilityError when dt is too large for the stiffest phase rate
    in the run and NumericalError if the state goes non-finite mid-run.
    """
    if not schedule.covers(grid.t_max):
        raise ValueError(
            f"gradient schedule [{schedule.t_start}, {schedule.t_end}] does "
            f"not cover the grid window [0, {grid.t_max}]")
    flip = schedule.flip_time()
    if flip is not None and probe.center_time + 2.0 * probe.duration > flip:
        raise ValueError(
            "probe pulse must substantially enter before the recall flip "
            f"(center {probe.center_time} + 2*duration {probe.duration} "
            f"exceeds flip time {flip})")

    max_delta = stark.max_delta_ac if stark is not None else 0.0
    max_loss = stark.max_gamma_s if stark is not None else 0.0
    # Stiffest local rates seen by sigma: detuning ramp, drive, decay, and
    # the slowest-k polariton exchange frequency.
    rate = (params.gamma0 + extra_decay + max_loss + max_delta
            + schedule.max_abs_eta * params.L / 2.0
            + params.coupling_density * params.raman_ratio ** 2
            * params.L / (2.0 * math.pi))
    if rate > 0.0:
        dt_required = _STABILITY_MARGIN / rate
        if grid.dt > dt_required:
            raise StabilityError(grid.dt, dt_required)

    env = input_envelope if input_envelope is not None else probe.envelope
    nz, nt = grid.nz, grid.nt
    z = grid.z
    dz, dt = grid.dz, grid.dt
    zeta = z - params.L / 2.0
    ratio = params.raman_ratio
    kappa = params.coupling_density

    sigma = np.zeros(nz, dtype=complex)
    sigma_t = np.empty((nt, nz), dtype=complex)
    field_t = np.empty((nt, nz), dtype=complex)
    coupling_t = np.empty(nt, dtype=float)
    fbuf = np.empty(nz, dtype=complex)

    def coupling_at(t: float) -> float:
        return 1.0 if coupling is None else coupling.value(t)

    def rhs(sig: np.ndarray, t: float) -> np.ndarray:
        mult = coupling_at(t)
        src = 1j * kappa * ratio * mult
        e = _march_field(sig, complex(env(t)), src, dz, fbuf)
        decay = params.gamma0 + extra_decay
        shift = schedule.eta(t) * zeta
        if stark is not None:
            decay = decay + float(stark.gamma_s(t))
            shift = shift + float(stark.delta_ac(t))
        return -(decay + 1j * shift) * sig + (1j * ratio * mult) * e

    times = grid.t
    for n in range(nt):
        t = times[n]
        mult = coupling_at(t)
        sigma_t[n] = sigma
        field_t[n] = _march_field(sigma, complex(env(t)),
                                  1j * kappa * ratio * mult, dz, fbuf)
        coupling_t[n] = mult
        if n == nt - 1:
            break
        k1 = rhs(sigma, t)
        k2 = rhs(sigma + (0.5 * dt) * k1, t + 0.5 * dt)
        k3 = rhs(sigma + (0.5 * dt) * k2, t + 0.5 * dt)
        k4 = rhs(sigma + dt * k3, t + dt)
        sigma = sigma + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if n % _NAN_CHECK_STRIDE == 0 and not np.all(np.isfinite(sigma.view(float))):
            raise NumericalError(
                f"non-finite coherence at t={t + dt:.4f} (step {n + 1}); "
                "reduce dt or check the drive for singular values")

    if not np.all(np.isfinite(sigma_t.view(float))):
        raise NumericalError("non-finite values in the stored trajectory")

    field = FieldRecord(values=field_t, grid=grid, coupling=coupling_t)
    coherence = CoherenceRecord(values=sigma_t, grid=grid, coupling=coupling_t)

    t_flip = flip if flip is not None else grid.t_max
    input_window = (0.0, t_flip)
    echo_window = (t_flip, grid.t_max)
    boundary = np.abs(env(times)) ** 2
    exit_face = np.abs(field_t[:, -1]) ** 2
    input_energy = _window_integral(times, boundary, *input_window)
    echo_energy = _window_integral(times, exit_face, *echo_window)
    efficiency = echo_energy / input_energy if input_energy > 0.0 else 0.0
    echo_phase = _centroid_phase(times, field_t[:, -1], *echo_window)

    return StorageResult(field=field, coherence=coherence,
                         input_energy=input_energy, echo_energy=echo_energy,
                         efficiency=efficiency, echo_phase=echo_phase,
                         flip_time=flip, input_window=input_window,
                         echo_window=echo_window)


def _window_integral(t: np.ndarray, p: np.ndarray, lo: float, hi: float) -> float:
    i0 = int(np.searchsorted(t, lo, side="left"))
    i1 = int(np.searchsorted(t, hi, side="right"))
    if i1 - i0 < 2:
        return 0.0
    return float(np.trapezoid(p[i0:i1], t[i0:i1]))


def _centroid_phase(t: np.ndarray, e: np.ndarray, lo: float, hi: float) -> float:
    """Phase of e at the |e|^2-weighted centroid time inside [lo, hi].

    The complex field is interpolated linearly at the centroid so the phase
    is a continuous function of the data (a nearest-sample choice would hop
    by the local chirp under infinitesimal input changes).
    """
    i0 = int(np.searchsorted(t, lo, side="left"))
    i1 = int(np.searchsorted(t, hi, side="right"))
    if i1 - i0 < 2:
        return math.nan
    w = np.abs(e[i0:i1]) ** 2
    total = w.sum()
    if total <= 0.0 or not np.isfinite(total):
        return math.nan
    tc = float((t[i0:i1] * w).sum() / total)
    j = int(np.clip(np.searchsorted(t, tc) - 1, i0, i1 - 2))
    frac = (tc - t[j]) / (t[j + 1] - t[j])
    ec = e[j] * (1.0 - frac) + e[j + 1] * frac
    if ec == 0.0:
        return math.nan
    return float(np.angle(ec))


def spatial_spectrum(values: np.ndarray, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Continuum-normalised spatial DFT with the exp(-i*k*z) kernel.

    Returns (k, F) with k the fftshifted axis and F[t, k] = dz * sum_z
    f(t,z) exp(-i k z); magnitudes are grid-resolution independent.
    """
    k = 2.0 * math.pi * np.fft.fftshift(np.fft.fftfreq(grid.nz, d=grid.dz))
    f = np.fft.fftshift(np.fft.fft(values, axis=-1), axes=-1) * grid.dz
    return k, f


def polariton_transform(field: FieldRecord, coherence: CoherenceRecord,
                        params: EnsembleParams) -> PolaritonRecord:
    """Assemble psi(t,k) = k*E(t,k) + g*calN*(OmegaC/Delta)*sigma(t,k).

    The nominal (static) coupling ratio is used in the atomic term; when
    the coupling field is switched off the physical excitation is the bare
    coherence, retrievable from ``coherence_k``.
    """
    if field.grid != coherence.grid:
        raise ValueError("field and coherence live on different grids")
    k, ek = spatial_spectrum(field.values, field.grid)
    _, sk = spatial_spectrum(coherence.values, coherence.grid)
    weight = params.coupling_density * params.raman_ratio
    psi = k[None, :] * ek + weight * sk
    return PolaritonRecord(values=psi, field_k=ek, coherence_k=sk, k=k,
                           grid=field.grid, coupling=field.coupling)


def verify_fourier_relation(record: PolaritonRecord, params: EnsembleParams,
                            t: float) -> Optional[float]:
    """Residual of k*E(k) = g*calN*(OmegaC/Delta)*sigma(k) at time t.

    Returns max over k != 0 of |k*E - C*sigma| / max|C*sigma| with
    C = g*calN*(OmegaC/Delta).  Returns None (the coupling-off signal) when
    the coupling field is switched off at t, where the relation degenerates;
    an all-zero record yields 0.0.
    """
    grid = record.grid
    n = int(round(t / grid.dt))
    if not (0 <= n < grid.nt):
        raise ValueError(f"time {t} outside the grid window [0, {grid.t_max}]")
    if record.coupling is not None and record.coupling[n] < 1e-12:
        return None
    mult = 1.0 if record.coupling is None else float(record.coupling[n])
    weight = params.coupling_density * params.raman_ratio * mult
    mask = record.k != 0.0
    lhs = record.k[mask] * record.field_k[n, mask]
    rhs = weight * record.coherence_k[n, mask]
    scale = float(np.max(np.abs(rhs)))
    if scale == 0.0:
        return 0.0 if float(np.max(np.abs(lhs))) == 0.0 else math.inf
    return float(np.max(np.abs(lhs - rhs)) / scale)


def group_velocity(k: float, params: EnsembleParams) -> float:
    """Group velocity g*calN*(OmegaC/Delta)^2 / k^2 of a polariton stopped
    at spatial frequency k (eta = 0, coupling on)."""
    if k == 0.0:
        raise ValueError("group velocity is singular at k = 0")
    return params.coupling_density * params.raman_ratio ** 2 / (k * k)


def peak_k_trajectory(record: PolaritonRecord, source: str = "polariton") -> np.ndarray:
    """Peak-|.|  k value per time sample.

    Ties within a relative 1e-9 of the maximum resolve to the lowest |k|
    (and to the more negative k when +-k tie exactly).
    """
    if source == "polariton":
        mag = np.abs(record.values)
    elif source == "coherence":
        mag = np.abs(record.coherence_k)
    elif source == "field":
        mag = np.abs(record.field_k)
    else:
        raise ValueError(f"unknown source {source!r}")
    k = record.k
    out = np.empty(mag.shape[0])
    order = np.lexsort((k, np.abs(k)))   # by |k|, then by k
    for n in range(mag.shape[0]):
        m = mag[n]
        top = m.max()
        if top == 0.0:
            out[n] = 0.0
            continue
        candidates = order[m[order] >= top * (1.0 - 1e-9)]
        out[n] = k[candidates[0]]
    return out


def excitation_balance(result: StorageResult, params: EnsembleParams,
                       t_from: float, t_to: float) -> float:
    """Relative excitation-conservation residual over [t_from, t_to].

    Checks  Delta[ g*calN * integral |sigma|^2 dz ] =
            integral (|E(0,t)|^2 - |E(L,t)|^2) dt,
    normalised by the gross transported energy over the window (gamma0 = 0,
    no drive), so the residual measures the defect of the conservation law
    against the amount of excitation actually moved.
    """
    grid = result.field.grid
    t = grid.t
    i0 = int(np.searchsorted(t, t_from, side="left"))
    i1 = int(np.searchsorted(t, t_to, side="right")) - 1
    if i1 <= i0:
        raise ValueError("window too short for a balance check")
    sig2 = np.abs(result.coherence.values) ** 2
    stored = params.coupling_density * np.trapezoid(sig2, dx=grid.dz, axis=1)
    lhs = stored[i1] - stored[i0]
    influx = np.abs(result.field.values[i0:i1 + 1, 0]) ** 2
    outflux = np.abs(result.field.values[i0:i1 + 1, -1]) ** 2
    rhs = float(np.trapezoid(influx - outflux, t[i0:i1 + 1]))
    gross = float(np.trapezoid(influx + outflux, t[i0:i1 + 1]))
    scale = max(abs(lhs), abs(rhs), gross, 1e-300)
    return abs(lhs - rhs) / scale
