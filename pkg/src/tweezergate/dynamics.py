"""
Molmer-Sorensen dynamics of two driven ions coupled to one motional mode.

Sign conventions
----------------
A tone at sideband offset ``mu`` drives mode ``nu`` with detuning
``delta = nu - mu``; the gate tone sits *below* the mode so that an upward
tweezer shift of the mode increases the detuning. The phase-space
displacement per unit Lamb-Dicke parameter is

    A(t) = 1/2 sum_i Omega_i e^{i phi_i} int_0^t e^{i (nu - mu_i) t'} dt'

and the propagator is ``D(A S) exp(i Theta S^2)`` with
``S = eta_1 X_1 + eta_2 X_2`` and ``Theta = Im int dA/dt A* dt``. For equal
``eta`` this is ``exp(i Phi J_x^2)`` at loop closure with
``Phi = eta^2 Omega^2 T / delta``.
"""
from dataclasses import dataclass, field, replace
import warnings

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, FitError

__all__ = [
    "Tone", "DriveSpec", "GateContext", "TrajectoryResult", "PopulationTrace",
    "StateDescriptor", "CMSDescriptor", "ParityResult", "DetuningFit",
    "single_tone", "segment_integral", "phase_kernel",
    "displacement_trajectory", "entanglement_phase", "ms_populations",
    "final_state", "phase_from_state", "cms_unitary", "parity_scan",
    "state_fidelity", "fit_detuning", "default_grid",
]

SMALL_ARG = 1e-7  # |x| t below which a detuning is treated as exactly resonant


@dataclass(frozen=True)
class Tone:
    mu: float           # sideband offset from the carrier, rad/s
    rabi: float         # rad/s
    phase: float = 0.0  # rad


@dataclass(frozen=True)
class DriveSpec:
    """Multi-tone bichromatic drive of fixed duration."""
    tones: tuple
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        if any(t.rabi < 0 for t in self.tones):
            raise DomainError("tone Rabi frequencies must be non-negative")

    @property
    def amplitudes(self):
        return np.array([t.rabi * np.exp(1j * t.phase) for t in self.tones])

    @property
    def mus(self):
        return np.array([t.mu for t in self.tones], dtype=float)

    def scaled(self, factor):
        """Copy with every Rabi frequency multiplied by ``factor``."""
        return replace(self, tones=tuple(replace(t, rabi=t.rabi * factor)
                                         for t in self.tones))


def single_tone(mode_freq, delta, rabi, duration, phase=0.0):
    """One-tone MS drive detuned by ``delta`` below ``mode_freq``."""
    return DriveSpec((Tone(mode_freq - delta, rabi, phase),), duration)


@dataclass(frozen=True)
class GateContext:
    """Motional and thermal context of the two gate ions.

    ``eta`` is either a scalar (both ions) or a pair.
    """
    mode_freq: float
    eta: object
    nbar: float = 0.0
    control_state: str = "D"

    def __post_init__(self):
        if self.nbar < 0:
            raise DomainError("nbar must be non-negative")

    @property
    def etas(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        if eta.size == 1:
            return np.array([eta[0], eta[0]])
        if eta.size != 2:
            raise DomainError("only two participating ions are supported")
        return eta


@dataclass(frozen=True)
class TrajectoryResult:
    times: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True)
class PopulationTrace:
    """Two-qubit populations in the ``|SS>, |SD>+|DS>, |DD>`` partition."""
    times: np.ndarray
    p_SS: np.ndarray
    p_mixed: np.ndarray
    p_DD: np.ndarray
    coherence: np.ndarray = field(default=None, repr=False)  # rho[SS, DD]

    def state_at(self, index=-1):
        coh = 0.0 if self.coherence is None else complex(self.coherence[index])
        return StateDescriptor(float(self.p_SS[index]), float(self.p_mixed[index]),
                               float(self.p_DD[index]), coh)


@dataclass(frozen=True)
class StateDescriptor:
    p_SS: float
    p_mixed: float
    p_DD: float
    coherence: complex  # rho[SS, DD]


def default_grid(duration, samples=512):
    return np.linspace(0.0, duration, samples)


# --------------------------------------------------------------------------
# closed-form integrals
# --------------------------------------------------------------------------

def segment_integral(x, t):
    """``int_0^t exp(i x s) ds`` evaluated without cancellation."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return t * np.exp(0.5j * x * t) * np.sinc(x * t / (2.0 * np.pi))


def _ramp_integral(a, t):
    # int_0^t s exp(i a s) ds
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    small = np.abs(a * t) < SMALL_ARG
    a_safe = np.where(small, 1.0, a)
    e = np.exp(1j * a_safe * t)
    val = t * e / (1j * a_safe) + (e - 1.0) / a_safe**2
    return np.where(small, 0.5 * t**2 + 0j, val)


def phase_kernel(a, b, t):
    """``G(a, b; t) = int_0^t e^{i a s} conj(int_0^s e^{i b s'} ds') ds``.

    Broadcasts over ``a``, ``b`` and ``t``.
    """
    a, b, t = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                  np.asarray(t, float))
    small = np.abs(b * t) < SMALL_ARG
    b_safe = np.where(small, 1.0, b)
    val = (1j / b_safe) * (segment_integral(a - b_safe, t) - segment_integral(a, t))
    return np.where(small, _ramp_integral(a, t), val)


def _components(drive, mode_freq, counter_rotating):
    # (detuning, complex amplitude) of every rotating term driving the mode
    amps = drive.amplitudes
    x = mode_freq - drive.mus
    if counter_rotating:
        x = np.concatenate([x, mode_freq + drive.mus])
        amps = np.concatenate([amps, amps.conj()])
    return x, amps


def _unit_displacement(drive, mode_freq, times, counter_rotating=False):
    # A(t) for unit Lamb-Dicke parameter, shape (len(times),)
    x, amps = _components(drive, mode_freq, counter_rotating)
    return 0.5 * segment_integral(x[None, :], np.asarray(times)[:, None]) @ amps


def _unit_phase(drive, mode_freq, times, counter_rotating=False):
    # Theta(t) = Im int dA/dt A* dt for unit Lamb-Dicke parameter
    x, amps = _components(drive, mode_freq, counter_rotating)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    g = phase_kernel(x[None, :, None], x[None, None, :], times[:, None, None])
    w = np.outer(amps, amps.conj())
    return 0.25 * np.imag(np.einsum("tij,ij->t", g, w))


def displacement_trajectory(drive, mode_freq, eta, t_grid, counter_rotating=False):
    """Phase-space displacement and accumulated entanglement phase.

    Parameters
    ----------
    drive : DriveSpec
    mode_freq : float
        Mode frequency in rad/s.
    eta : float
        Lamb-Dicke parameter.
    t_grid : array_like
        Sorted times starting at 0.
    counter_rotating : bool
        Include the ``nu + mu`` sideband terms. The propagator stays exact
        because the commutator of the force at different times is a c-number
        multiple of ``S^2``.

    Returns
    -------
    TrajectoryResult
        ``alpha = eta A(t)`` and ``phi = 4 eta^2 Theta(t)``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.size and (t[0] != 0.0 or np.any(np.diff(t) < 0)):
        raise DomainError("t_grid must be sorted and start at 0")
    alpha = eta * _unit_displacement(drive, mode_freq, t, counter_rotating)
    phi = 4.0 * eta**2 * _unit_phase(drive, mode_freq, t, counter_rotating)
    return TrajectoryResult(t, alpha, phi)


def entanglement_phase(drive, mode_freq, eta, duration=None, counter_rotating=False):
    """Entanglement phase ``Phi`` accumulated at ``duration`` (default: drive end)."""
    T = drive.duration if duration is None else duration
    return float(4.0 * eta**2 * _unit_phase(drive, mode_freq, [T], counter_rotating)[0])


# --------------------------------------------------------------------------
# spin populations
# --------------------------------------------------------------------------

_PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)
_MINUS = np.array([1.0, -1.0]) / np.sqrt(2.0)
# columns: |++>, |+->, |-+>, |--> in the (S, D) product basis
X_BASIS = np.column_stack([np.kron(_PLUS, _PLUS), np.kron(_PLUS, _MINUS),
                           np.kron(_MINUS, _PLUS), np.kron(_MINUS, _MINUS)])
SS, SD, DS, DD = range(4)


def _spin_eigenvalues(etas):
    e1, e2 = etas
    return np.array([e1 + e2, e1 - e2, -e1 + e2, -e1 - e2])


def _initial_rho(initial):
    if isinstance(initial, str):
        idx = {"SS": SS, "SD": SD, "DS": DS, "DD": DD}[initial]
        psi = np.zeros(4, complex)
        psi[idx] = 1.0
        return np.outer(psi, psi.conj())
    arr = np.asarray(initial, dtype=complex)
    if arr.ndim == 1:
        arr = np.outer(arr, arr.conj()) / np.vdot(arr, arr).real
    return arr


def spin_density_matrices(ctx, drive, t_grid, initial="SS", counter_rotating=False):
    """Reduced two-qubit density matrices along ``t_grid``, shape (T, 4, 4)."""
    t = np.asarray(t_grid, dtype=float)
    s = _spin_eigenvalues(ctx.etas)
    A = _unit_displacement(drive, ctx.mode_freq, t, counter_rotating)
    theta = _unit_phase(drive, ctx.mode_freq, t, counter_rotating)
    rho_x = X_BASIS.T @ _initial_rho(initial) @ X_BASIS
    sq = s[:, None]**2 - s[None, :]**2
    ds2 = (s[:, None] - s[None, :])**2
    factor = np.exp(1j * theta[:, None, None] * sq
                    - 0.5 * (2.0 * ctx.nbar + 1.0) * np.abs(A)[:, None, None]**2 * ds2)
    return X_BASIS @ (rho_x * factor) @ X_BASIS.T


def _trace_from_rhos(t, rhos):
    pops = np.real(np.einsum("tii->ti", rhos))
    return PopulationTrace(t, pops[:, SS], pops[:, SD] + pops[:, DS], pops[:, DD],
                           rhos[:, SS, DD].copy())


def ms_populations(ctx, drive, t_grid=None, initial="SS", counter_rotating=False):
    """Closed-form MS populations traced over a thermal mode.

    Parameters
    ----------
    ctx : GateContext
    drive : DriveSpec
    t_grid : array_like, optional
        Defaults to 512 uniform samples over the drive.
    initial : str or array_like
        ``"SS"``, ``"SD"``, ``"DS"``, ``"DD"``, a state vector or a 4x4
        density matrix in the (S, D) product basis.
    counter_rotating : bool
        Include the ``nu + mu`` sideband terms (off by default).

    Returns
    -------
    PopulationTrace
    """
    t = default_grid(drive.duration) if t_grid is None else np.asarray(t_grid, float)
    return _trace_from_rhos(t, spin_density_matrices(ctx, drive, t, initial,
                                                     counter_rotating))


def final_state(ctx, drive, initial="SS", counter_rotating=False):
    """State descriptor at the end of the drive."""
    return ms_populations(ctx, drive, [0.0, drive.duration], initial,
                          counter_rotating).state_at(-1)


def phase_from_state(state):
    """Entanglement phase recovered from a state grown out of ``|SS>``.

    For ``exp(i Phi J_x^2)|SS>`` one has ``p_SS - p_DD = cos Phi`` and
    ``rho[SS, DD] = -(i/2) sin Phi``.
    """
    phi = float(np.arctan2(-2.0 * np.imag(state.coherence), state.p_SS - state.p_DD))
    # branch (-pi/2, 3pi/2] keeps both 0 and pi away from the cut
    return phi + 2.0 * np.pi if phi <= -0.5 * np.pi else phi


# --------------------------------------------------------------------------
# gate descriptors, parity and fidelity
# --------------------------------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)
_XX = np.kron(_X, _X)


@dataclass(frozen=True)
class CMSDescriptor:
    """Target-qubit blocks of a control-conditioned MS operation."""
    phi_D: float
    phi_S: float
    block_D: np.ndarray
    block_S: np.ndarray
    canonical: bool
    control_independent: bool

    def unitary(self):
        """Full 8x8 operator ordered (control, target1, target2), ``|S>`` = index 0."""
        u = np.zeros((8, 8), dtype=complex)
        u[:4, :4] = self.block_S
        u[4:, 4:] = self.block_D
        return u


def _ms_block(phi):
    jx2 = (2.0 * np.eye(4) + 2.0 * _XX) / 4.0
    w, v = np.linalg.eigh(jx2)
    return (v * np.exp(1j * phi * w)) @ v.conj().T


def _equal_up_to_phase(a, b, tol=1e-9):
    return abs(abs(np.trace(a.conj().T @ b)) / a.shape[0] - 1.0) < tol


def cms_unitary(phi_D, phi_S):
    """Blocks ``exp(i phi J_x^2)`` for control in ``|D>`` and ``|S>``.

    ``canonical`` is set when, after a local ``X_1 X_3`` on the targets, the
    blocks coincide (up to a phase per block, i.e. a control-qubit Z rotation)
    with ``exp(-i pi/8 (I - Z_2) X_1 X_3)``.
    """
    bd, bs = _ms_block(phi_D), _ms_block(phi_S)
    z_plus = np.eye(4, dtype=complex)                    # Z_2 = +1 block
    z_minus = np.cos(np.pi / 4) * np.eye(4) - 1j * np.sin(np.pi / 4) * _XX
    canonical = (_equal_up_to_phase(_XX @ bd, z_plus)
                 and _equal_up_to_phase(_XX @ bs, z_minus))
    return CMSDescriptor(float(phi_D), float(phi_S), bd, bs, canonical,
                         _equal_up_to_phase(bd, bs))


@dataclass(frozen=True)
class ParityResult:
    phi: np.ndarray
    parity: np.ndarray
    amplitude: float
    offset_phase: float
    residual: float
    degenerate: bool


def parity_scan(state, phi_grid=None, parity=None):
    """Parity ``<sigma_phi sigma_phi>`` and a fit to ``A_p sin(2 phi + phi_0)``.

    If ``parity`` is given it is fitted directly (measured data); otherwise it
    is computed from ``state``.
    """
    phi = np.linspace(0.0, np.pi, 33) if phi_grid is None else np.asarray(phi_grid, float)
    if parity is None:
        c = complex(state.coherence)
        parity = 2.0 * np.real(c * np.exp(2j * phi))
    parity = np.asarray(parity, dtype=float)
    basis = np.column_stack([np.sin(2 * phi), np.cos(2 * phi)])
    coef, *_ = np.linalg.lstsq(basis, parity, rcond=None)
    resid = float(np.sqrt(np.mean((basis @ coef - parity)**2)))
    amp = float(np.hypot(*coef))
    if amp < 1e-12:
        warnings.warn("flat parity curve; amplitude set to zero", RuntimeWarning)
        return ParityResult(phi, parity, 0.0, 0.0, resid, True)
    return ParityResult(phi, parity, amp, float(np.arctan2(coef[1], coef[0])),
                        resid, False)


def state_fidelity(p_SS, p_DD, amplitude, case):
    """Target-state fidelity from populations and parity contrast.

    Case ``"D"`` targets ``|DD>``; case ``"S"`` targets ``(|SS> + i|DD>)/sqrt 2``.
    """
    for p in (p_SS, p_DD):
        if not -1e-12 <= p <= 1 + 1e-12:
            raise DomainError("populations must lie in [0, 1]")
    if case == "D":
        return float(p_DD)
    if case == "S":
        return 0.5 * (p_SS + p_DD) + 0.5 * amplitude
    raise DomainError(f"unknown case {case!r}")


# --------------------------------------------------------------------------
# detuning fit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DetuningFit:
    delta: float
    delta_stderr: float
    rabi: float
    rabi_stderr: float
    residual_norm: float
    nfev: int


def fit_detuning(trace, ctx, drive, initial_guess, fit_rabi=False, initial="SS",
                 max_nfev=500):
    """Fit the single-tone gate detuning to a population trace.

    Parameters
    ----------
    trace : PopulationTrace
        Data; all three population channels are fitted jointly.
    ctx : GateContext
    drive : DriveSpec
        Single-tone template supplying the Rabi frequency and duration.
    initial_guess : float
        Starting detuning in rad/s.
    fit_rabi : bool
        Also fit the Rabi frequency.

    Returns
    -------
    DetuningFit
        One-sigma errors from the residual-scaled covariance.
    """
    if len(drive.tones) != 1:
        raise DomainError("fit_detuning expects a single-tone template")
    data = np.concatenate([trace.p_SS, trace.p_mixed, trace.p_DD])
    if np.ptp(trace.p_SS) < 1e-9 and np.ptp(trace.p_DD) < 1e-9:
        raise FitError("trace carries no dynamics; detuning not identifiable",
                       residual=float(np.ptp(data)))
    rabi0 = drive.tones[0].rabi
    t = np.asarray(trace.times, dtype=float)

    def model(p):
        rabi = p[1] * rabi0 if fit_rabi else rabi0
        d = single_tone(ctx.mode_freq, p[0] * initial_guess, rabi, drive.duration)
        tr = ms_populations(ctx, d, t, initial)
        return np.concatenate([tr.p_SS, tr.p_mixed, tr.p_DD]) - data

    x0 = np.array([1.0, 1.0]) if fit_rabi else np.array([1.0])
    res = least_squares(model, x0, method="lm", xtol=1e-10, ftol=1e-12,
                        gtol=1e-12, max_nfev=max_nfev * (x0.size + 1))
    if not res.success:
        raise FitError(f"detuning fit failed: {res.message}",
                       residual=float(np.linalg.norm(res.fun)))
    dof = max(data.size - x0.size, 1)
    s2 = float(res.fun @ res.fun) / dof
    jtj = res.jac.T @ res.jac
    if np.linalg.cond(jtj) > 1e14:
        raise FitError("singular fit Jacobian", residual=float(np.linalg.norm(res.fun)))
    cov = np.linalg.inv(jtj) * s2
    err = np.sqrt(np.diag(cov))
    rabi = res.x[1] * rabi0 if fit_rabi else rabi0
    rabi_err = err[1] * rabi0 if fit_rabi else 0.0
    return DetuningFit(float(res.x[0] * initial_guess), float(err[0] * abs(initial_guess)),
                       float(rabi), float(rabi_err), float(np.linalg.norm(res.fun)),
                       int(res.nfev))
