"""gemxpm: cross-phase modulation in a Raman gradient echo memory.

Semiclassical Maxwell-Bloch storage and recall with ac-Stark phase
imprinting, closed-form XPM calculators, a master-equation gate engine on
the truncated atom-photon space, and Choi-matrix process tomography.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, GemXpmError, LeakageError, NumericalError,
                     ProjectionError, ProtocolError, StabilityError,
                     UndefinedPhaseError)
from .model import (EnsembleParams, GradientSchedule, Grid, PiecewiseConstant,
                    PulseSpec, build_grid, gaussian_envelope)
from .gem import (CoherenceRecord, FieldRecord, PolaritonRecord, StarkDrive,
                  StorageResult, apply_stark_drive, constant_stark_drive,
                  excitation_balance, group_velocity, peak_k_trajectory,
                  polariton_transform, propagate, verify_fourier_relation)
from .xpm import (DoubleStorageResult, LinearityReport, SinglePhotonEstimate,
                  TransitionData, XpmResult, coupling_loss_rate,
                  double_storage_run, phi_free_signal, phi_stored_pair,
                  scattering_consistency, single_photon_estimate, spm_scan,
                  xpm_linearity_scan)
from .gate import (DIM, HILBERT, GateParams, HilbertSpace, PhaseTrace,
                   Trajectory, build_hamiltonian, collapse_operators,
                   conditional_phase, evolve, gate_fidelity, initial_state,
                   lindblad_rhs, max_stable_dt, phase_trace, propagator)
from .tomography import (ChoiMatrix, CptpReport, TwoQubitChannel,
                         channel_from_gate, choi_matrix, ideal_cphase_choi,
                         process_fidelity)

__all__ = [name for name in dir() if not name.startswith("_")]
