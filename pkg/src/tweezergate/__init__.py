"""
Simulation and pulse design for optical-tweezer-controlled trapped-ion gates.

Submodules
----------
chain     normal modes of tweezed ion chains and Lamb-Dicke parameters
dynamics  closed-form Molmer-Sorensen evolution, parity, fidelity, fits
fock      truncated Fock-space reference integrator
synth     multi-tone drives for n-controlled MS gates
noise     noise sampling, dynamical decoupling and Monte-Carlo fidelity
cli       command-line front end
"""
__version__ = "0.1.0"

from .constants import CONSTANTS, CA40_MASS, TWO_PI
from .errors import (TweezerGateError, DomainError, NumericError, FitError,
                     InfeasibleError, ConsistencyError)
from .chain import (ChainConfig, ModeSpectrum, ConditionalSpectrum, length_scale,
                    equilibrium_positions, optical_confinement, secular_matrix,
                    mode_spectrum, lamb_dicke, conditional_spectrum, paper_chain)
from .dynamics import (Tone, DriveSpec, GateContext, single_tone,
                       displacement_trajectory, entanglement_phase, ms_populations,
                       final_state, phase_from_state, cms_unitary, parity_scan,
                       state_fidelity, fit_detuning)
from .fock import fock_oracle
from .synth import (SynthProblem, SynthSolution, build_constraints, solve_amplitudes,
                    n_controlled_ms, verify_solution)
from .noise import (NoiseModel, DDSchedule, dd_schedule, control_coherence,
                    GateParams, gate_fidelity_mc)
