"""
Axial normal modes of a linear ion chain with state-dependent optical tweezers.

An ion illuminated by a tweezer while in ``|S>`` feels an additional harmonic
potential of angular frequency ``omega_op``; an ion in ``|D>`` does not. The
tweezer term enters only the diagonal of the dimensionless secular matrix, so
the equilibrium positions are those of the bare chain.

All frequencies are angular (rad/s); lengths in metres; masses in kg.
"""
from dataclasses import dataclass, field, replace
from itertools import combinations
import math

import numpy as np

from .constants import (CA40_MASS, ELEMENTARY_CHARGE, HBAR, TWO_PI,
                        VACUUM_PERMITTIVITY)
from .errors import DomainError, NumericError

__all__ = [
    "ChainConfig", "ModeSpectrum", "ConditionalSpectrum",
    "length_scale", "equilibrium_positions", "optical_confinement",
    "secular_matrix", "mode_spectrum", "lamb_dicke", "conditional_spectrum",
    "paper_chain",
]


@dataclass(frozen=True)
class ChainConfig:
    """Physical description of a tweezed ion chain.

    Parameters
    ----------
    n_ions : int
        Number of ions.
    axial_freq : float
        Axial (COM) trap frequency in rad/s.
    tweezer_flags : tuple of bool
        ``True`` for every ion illuminated by a tweezer.
    light_shift : float
        Tweezer light shift on a tweezed ion in ``|S>``, rad/s.
    beam_waist : float
        Tweezer waist in m.
    ion_mass : float
        Ion mass in kg.
    qubit_offsets : tuple of float
        Static per-ion qubit-frequency offsets in rad/s.
    drive_wavelength : float
        Wavelength of the gate drive in m.
    axis_projection : float
        Projection of the drive wavevector on the trap axis, in [0, 1].
    """
    n_ions: int
    axial_freq: float
    tweezer_flags: tuple = ()
    light_shift: float = 0.0
    beam_waist: float = 1e-6
    ion_mass: float = CA40_MASS
    qubit_offsets: tuple = ()
    drive_wavelength: float = 729e-9
    axis_projection: float = 1.0

    def __post_init__(self):
        if self.n_ions < 1:
            raise DomainError("n_ions must be >= 1")
        flags = tuple(bool(f) for f in self.tweezer_flags) or (False,) * self.n_ions
        offsets = tuple(float(o) for o in self.qubit_offsets) or (0.0,) * self.n_ions
        object.__setattr__(self, "tweezer_flags", flags)
        object.__setattr__(self, "qubit_offsets", offsets)
        if len(flags) != self.n_ions:
            raise DomainError("tweezer_flags length must equal n_ions")
        if len(offsets) != self.n_ions:
            raise DomainError("qubit_offsets length must equal n_ions")
        if not self.axial_freq > 0:
            raise DomainError("axial_freq must be positive")
        if not self.beam_waist > 0:
            raise DomainError("beam_waist must be positive")
        if self.light_shift < 0:
            raise DomainError("light_shift must be non-negative")
        if not self.ion_mass > 0:
            raise DomainError("ion_mass must be positive")
        if not 0.0 <= self.axis_projection <= 1.0:
            raise DomainError("axis_projection must lie in [0, 1]")

    @property
    def tweezed(self):
        """Indices of tweezed ions."""
        return tuple(i for i, f in enumerate(self.tweezer_flags) if f)

    def with_tweezed(self, indices):
        """Copy with exactly the given ions tweezed."""
        flags = tuple(i in set(indices) for i in range(self.n_ions))
        return replace(self, tweezer_flags=flags)


@dataclass(frozen=True)
class ModeSpectrum:
    """Axial modes, ascending in frequency.

    ``mode_matrix[m, i]`` is the participation of ion ``i`` in mode ``m``.
    """
    frequencies: np.ndarray
    mode_matrix: np.ndarray
    lamb_dicke: np.ndarray
    length_scale: float
    equilibria: np.ndarray
    eigenvalues: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class ConditionalSpectrum:
    """Gate-mode frequency versus the number ``k`` of tweezed ions in ``|S>``."""
    base_mode_index: int
    conditional_freqs: tuple   # ((k, freq), ...)
    per_shift: float
    subset_spread: float = 0.0  # max relative spread over choices of the k ions

    @property
    def frequencies(self):
        return np.array([f for _, f in self.conditional_freqs])


def length_scale(axial_freq, ion_mass=CA40_MASS):
    """Characteristic Coulomb length ``(e^2 / (4 pi eps0 m nu^2))^(1/3)`` in m."""
    if not (axial_freq > 0 and ion_mass > 0):
        raise DomainError("axial_freq and ion_mass must be positive")
    k_e = ELEMENTARY_CHARGE**2 / (4.0 * math.pi * VACUUM_PERMITTIVITY)
    return (k_e / (ion_mass * axial_freq**2)) ** (1.0 / 3.0)


def _forces(u):
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return u - np.sum(np.sign(d) / d**2, axis=1)


def _coulomb_hessian(u):
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    inv3 = 1.0 / d**3
    hess = -2.0 * inv3
    np.fill_diagonal(hess, 1.0 + 2.0 * inv3.sum(axis=1))
    return hess


def equilibrium_positions(n_ions, tol=1e-12, max_iter=200):
    """Dimensionless equilibrium positions of a harmonically confined chain.

    Damped Newton iteration on the force balance
    ``u_i - sum_{j<i} (u_i-u_j)^-2 + sum_{j>i} (u_i-u_j)^-2 = 0``.

    Parameters
    ----------
    n_ions : int
    tol : float
        Convergence threshold on the infinity norm of the net force.
    max_iter : int

    Returns
    -------
    numpy.ndarray
        Sorted positions, symmetric about zero.
    """
    if n_ions < 1:
        raise DomainError("n_ions must be >= 1")
    if n_ions == 1:
        return np.zeros(1)
    # central spacing ~ 2.018 N^-0.559 for large chains
    spacing = 2.018 / n_ions**0.559
    u = (np.arange(n_ions) - (n_ions - 1) / 2.0) * spacing
    f = _forces(u)
    res = np.max(np.abs(f))
    for _ in range(max_iter):
        if res <= tol:
            break
        step = np.linalg.solve(_coulomb_hessian(u), -f)
        lam = 1.0
        while lam > 1e-8:
            trial = u + lam * step
            if np.all(np.diff(trial) > 0):
                f_trial = _forces(trial)
                res_trial = np.max(np.abs(f_trial))
                if res_trial < res or res_trial <= tol:
                    break
            lam *= 0.5
        else:
            raise NumericError("equilibrium line search stalled", residual=res)
        u, f, res = trial, f_trial, res_trial
    else:
        if res > tol:
            raise NumericError(f"equilibrium solve did not converge (|F|={res:.3e})",
                               residual=res)
    # restore exact mirror symmetry
    u = 0.5 * (u - u[::-1])
    return u


def optical_confinement(light_shift, beam_waist, ion_mass=CA40_MASS):
    """Tweezer trap frequency ``2 sqrt(hbar omega_LS / (m w0^2))`` in rad/s."""
    if light_shift < 0:
        raise DomainError("light_shift must be non-negative (red-detuned tweezer)")
    if not beam_waist > 0 or not ion_mass > 0:
        raise DomainError("beam_waist and ion_mass must be positive")
    return 2.0 * math.sqrt(HBAR * light_shift / (ion_mass * beam_waist**2))


def secular_matrix(u, tweezer_flags=None, omega_op=0.0, axial_freq=1.0):
    """Dimensionless axial secular matrix including tweezer confinement."""
    u = np.asarray(u, dtype=float)
    n = u.size
    if n > 1 and np.min(np.abs(np.diff(np.sort(u)))) == 0.0:
        raise DomainError("coincident ion positions")
    a = _coulomb_hessian(u) if n > 1 else np.ones((1, 1))
    if tweezer_flags is not None:
        b = np.asarray(tweezer_flags, dtype=float)
        if b.size != n:
            raise DomainError("tweezer_flags length must match positions")
        a[np.diag_indices(n)] += (omega_op / axial_freq) ** 2 * b
    return 0.5 * (a + a.T)


def _sign_fix(vectors):
    # first component with magnitude above noise made positive, per row
    out = vectors.copy()
    for row in out:
        idx = np.flatnonzero(np.abs(row) > 1e-12)
        if idx.size and row[idx[0]] < 0:
            row *= -1.0
    return out


def _diagonalize(config, flags=None):
    u = equilibrium_positions(config.n_ions)
    flags = config.tweezer_flags if flags is None else flags
    w_op = optical_confinement(config.light_shift, config.beam_waist, config.ion_mass)
    a = secular_matrix(u, flags, w_op, config.axial_freq)
    lam, vec = np.linalg.eigh(a)
    if np.any(lam <= 0):
        raise NumericError("non-positive secular eigenvalue (unstable chain)",
                           residual=float(lam.min()))
    return u, lam, _sign_fix(vec.T)


def lamb_dicke(spectrum, drive_wavelength=729e-9, axis_projection=1.0,
               ion_mass=CA40_MASS):
    """Lamb-Dicke matrix ``eta[m, i] = b[m, i] k cos(theta) sqrt(hbar / 2 m nu_m)``."""
    if not drive_wavelength > 0:
        raise DomainError("drive_wavelength must be positive")
    if not 0.0 <= axis_projection <= 1.0:
        raise DomainError("axis_projection must lie in [0, 1]")
    k = TWO_PI / drive_wavelength * axis_projection
    freqs = np.asarray(spectrum.frequencies, dtype=float)
    scale = k * np.sqrt(HBAR / (2.0 * ion_mass * freqs))
    return np.asarray(spectrum.mode_matrix) * scale[:, None]


def mode_spectrum(config):
    """Solve for the axial modes of ``config``.

    Returns
    -------
    ModeSpectrum
    """
    u, lam, vec = _diagonalize(config)
    freqs = config.axial_freq * np.sqrt(lam)
    spec = ModeSpectrum(frequencies=freqs, mode_matrix=vec, lamb_dicke=None,
                        length_scale=length_scale(config.axial_freq, config.ion_mass),
                        equilibria=u, eigenvalues=lam)
    eta = lamb_dicke(spec, config.drive_wavelength, config.axis_projection,
                     config.ion_mass)
    return replace(spec, lamb_dicke=eta)


def conditional_spectrum(config, gate_mode, max_subsets=4096):
    """Gate-mode frequency for each number ``k`` of tweezed ions in ``|S>``.

    The ``k`` ions are the first ``k`` tweezed ions in chain order. When the
    number of subsets is at most ``max_subsets``, every choice of ``k`` ions
    is evaluated and the largest relative spread is reported, which measures
    how far the frequency depends on *which* ions are bright.
    """
    tweezed = config.tweezed
    n_tw = len(tweezed)
    if not 0 <= gate_mode < config.n_ions:
        raise DomainError("gate_mode out of range")
    check_all = 2**n_tw <= max_subsets
    freqs, spread = [], 0.0
    for k in range(n_tw + 1):
        _, lam, _ = _diagonalize(config, config.with_tweezed(tweezed[:k]).tweezer_flags)
        f_k = config.axial_freq * math.sqrt(lam[gate_mode])
        freqs.append((k, f_k))
        if check_all and 0 < k < n_tw:
            vals = []
            for subset in combinations(tweezed, k):
                _, lam_s, _ = _diagonalize(config,
                                           config.with_tweezed(subset).tweezer_flags)
                vals.append(config.axial_freq * math.sqrt(lam_s[gate_mode]))
            spread = max(spread, (max(vals) - min(vals)) / f_k)
    per_shift = (freqs[-1][1] - freqs[0][1]) / n_tw if n_tw else 0.0
    return ConditionalSpectrum(gate_mode, tuple(freqs), per_shift, spread)


def paper_chain(**overrides):
    """Three 40Ca+ ions at 360 kHz with the centre ion tweezed (10.4 MHz, 1 um)."""
    params = dict(n_ions=3, axial_freq=TWO_PI * 360e3,
                  tweezer_flags=(False, True, False), light_shift=TWO_PI * 10.4e6,
                  beam_waist=1e-6, ion_mass=CA40_MASS)
    params.update(overrides)
    return ChainConfig(**params)
