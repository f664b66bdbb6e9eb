"""
Noise sampling, dynamical decoupling and Monte-Carlo gate fidelity.

Noise enters through three channels:

``drive_intensity``
    fractional fluctuation of the gate-laser intensity; tone Rabi
    frequencies scale as ``sqrt(1 + eps)``.
``trap_freq``
    additive fluctuation of the axial COM frequency in rad/s. All axial
    modes scale with the trap frequency, so the gate mode moves by
    ``eps * nu_gate / nu_axial``.
``tweezer_intensity``
    fractional fluctuation of the tweezer intensity; the light shift and
    the motional shift ``delta_nu`` both scale as ``1 + eps``.

Three temporal models are available: quasi-static Gaussian (one draw per
shot), Ornstein-Uhlenbeck, and 1/f noise built from 20 log-spaced OU
processes.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .chain import mode_spectrum, paper_chain
from .dynamics import (X_BASIS, SS, DD, _initial_rho, _spin_eigenvalues,
                       phase_kernel, segment_integral)
from .errors import DomainError

__all__ = [
    "KINDS", "TARGETS", "NoiseModel", "DDSchedule", "dd_schedule", "sample_paths",
    "CoherenceResult", "control_coherence", "GateParams", "FidelityDistribution",
    "gate_fidelity_mc", "single_tone_final_states",
]

KINDS = ("quasi_static_gaussian", "ornstein_uhlenbeck", "one_over_f")
TARGETS = ("drive_intensity", "trap_freq", "tweezer_intensity")
ONE_OVER_F_COMPONENTS = 20


@dataclass(frozen=True)
class NoiseModel:
    """One noise channel.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    target : str
        One of :data:`TARGETS`.
    amplitude : float
        RMS value: fractional for intensities, rad/s for ``trap_freq``.
    correlation_time : float, optional
        OU correlation time in s; for 1/f the longest component time.
        Ignored for quasi-static noise.
    seed : int, optional
        Channel seed. When ``None`` the channel draws from the stream
        spawned by the caller's seed.
    """
    kind: str
    target: str
    amplitude: float
    correlation_time: float = None
    seed: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if self.target not in TARGETS:
            raise DomainError(f"unknown noise target {self.target!r}")
        if not self.amplitude >= 0:
            raise DomainError("amplitude must be non-negative")
        if self.kind != "quasi_static_gaussian":
            if self.correlation_time is None or not self.correlation_time > 0:
                raise DomainError(f"{self.kind} noise needs a positive correlation_time")


def _ou_paths(rng, times, sigma, tau, trials):
    # exact discretisation, stationary start
    out = np.empty((trials, times.size))
    out[:, 0] = sigma * rng.standard_normal(trials)
    dt = np.diff(times)
    decay = np.exp(-dt / tau)
    kick = sigma * np.sqrt(1.0 - decay**2)
    for j in range(dt.size):
        out[:, j + 1] = out[:, j] * decay[j] + kick[j] * rng.standard_normal(trials)
    return out


def sample_paths(model, times, trials, rng):
    """Noise realisations on ``times``, shape ``(trials, len(times))``.

    Parameters
    ----------
    model : NoiseModel
    times : array_like
        Sorted sample times in s.
    trials : int
    rng : numpy.random.Generator
    """
    times = np.asarray(times, float)
    if model.amplitude == 0:
        return np.zeros((trials, times.size))
    if model.kind == "quasi_static_gaussian":
        draw = model.amplitude * rng.standard_normal(trials)
        return np.repeat(draw[:, None], times.size, axis=1)
    if model.kind == "ornstein_uhlenbeck":
        return _ou_paths(rng, times, model.amplitude, model.correlation_time, trials)
    taus = np.geomspace(1e-3 * model.correlation_time, model.correlation_time,
                        ONE_OVER_F_COMPONENTS)
    sigma = model.amplitude / math.sqrt(ONE_OVER_F_COMPONENTS)
    return sum(_ou_paths(rng, times, sigma, tau, trials) for tau in taus)


def _channel_rngs(models, seed):
    # one independent stream per channel; explicit channel seeds take priority
    children = np.random.SeedSequence(seed).spawn(len(models))
    return [np.random.default_rng(m.seed if m.seed is not None else child)
            for m, child in zip(models, children)]


# --------------------------------------------------------------------------
# dynamical decoupling of the control qubit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DDSchedule:
    """Alternating drive / idle stages with a control flip after each."""
    n_stages: int
    stage_drive: float
    stage_idle: float
    pulse_times: tuple

    @property
    def total_duration(self):
        return self.n_stages * (self.stage_drive + self.stage_idle)

    def segments(self):
        """``(start, stop, kind)`` for every segment, kind ``"drive"`` or ``"idle"``."""
        out, t = [], 0.0
        for _ in range(self.n_stages):
            out.append((t, t + self.stage_drive, "drive"))
            t += self.stage_drive
            out.append((t, t + self.stage_idle, "idle"))
            t += self.stage_idle
        return out

    def toggling(self, times):
        """``+1`` during drive segments and ``-1`` during idle ones."""
        times = np.asarray(times, float)
        period = self.stage_drive + self.stage_idle
        phase = np.mod(times, period)
        return np.where(phase < self.stage_drive, 1.0, -1.0)


def dd_schedule(T, N):
    """Split a gate of duration ``T`` into ``N`` drive/idle stages of ``T / N``.

    >>> dd_schedule(500e-6, 1).pulse_times
    (0.0005, 0.001)
    """
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    if not T > 0:
        raise DomainError("T must be positive")
    N = int(N)
    tau = T / N
    flips = tuple(float(tau * j) for j in range(1, 2 * N + 1))
    return DDSchedule(N, tau, tau, flips)


@dataclass(frozen=True)
class CoherenceResult:
    coherence: float
    stderr: float
    trials: int


def control_coherence(noise, schedule, mean_light_shift, trials=1000, seed=None,
                      duration=None, steps=1024):
    """Monte-Carlo coherence ``W = |<exp(i phi)>|`` of the tweezed control qubit.

    The tweezer stays on throughout; it shifts the control by
    ``mean_light_shift * (1 + eps(t))``. Each flip reverses the sign with
    which the shift accumulates, so a constant shift cancels exactly.

    Parameters
    ----------
    noise : NoiseModel
        Must target ``tweezer_intensity``.
    schedule : DDSchedule or None
        ``None`` means a single drive segment of length ``duration``.
    mean_light_shift : float
        rad/s.
    trials : int
        At least 100.
    seed : int, optional
    duration : float, optional
        Evolution time without decoupling.
    steps : int
        Midpoint-rule samples over the whole sequence. Noise paths depend
        only on ``seed``, ``steps`` and the total duration, so schedules of
        equal length see identical realisations.

    Returns
    -------
    CoherenceResult
    """
    if noise.target != "tweezer_intensity":
        raise DomainError("control coherence needs tweezer_intensity noise")
    if trials < 100:
        raise DomainError("trials must be >= 100")
    if schedule is None:
        if duration is None or not duration > 0:
            raise DomainError("duration is required without a schedule")
        total = float(duration)
    else:
        total = schedule.total_duration
    dt = total / steps
    mid = (np.arange(steps) + 0.5) * dt
    sign = np.ones(steps) if schedule is None else schedule.toggling(mid)
    rng = _channel_rngs([noise], seed)[0]
    eps = sample_paths(noise, mid, trials, rng)
    phi = mean_light_shift * dt * ((1.0 + eps) @ sign)
    z = np.exp(1j * phi)
    mean = z.mean()
    w = float(abs(mean))
    if w > 0:
        proj = np.real(z * np.conj(mean) / w)
        stderr = float(proj.std(ddof=1) / math.sqrt(trials))
    else:
        stderr = float(np.abs(z).std(ddof=1) / math.sqrt(trials))
    return CoherenceResult(min(w, 1.0), stderr, trials)


# --------------------------------------------------------------------------
# Monte-Carlo gate fidelity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GateParams:
    """Single-tone controlled MS gate on the two outer ions.

    The drive sits ``delta0`` below the gate mode when the control is dark;
    a bright control raises the mode by ``delta_nu``.
    """
    mode_freq: float
    axial_freq: float
    eta: float
    delta0: float
    delta_nu: float
    duration: float
    rabi: float
    nbar: float = 0.0

    @classmethod
    def paper(cls, **overrides):
        """Three-ion gate: stretch-free axial mode 3, 4 kHz loops, 500 us."""
        spec = mode_spectrum(paper_chain().with_tweezed(()))
        eta = float(abs(spec.lamb_dicke[2, 0]))
        delta0 = 2.0 * math.pi * 4e3
        values = dict(mode_freq=float(spec.frequencies[2]),
                      axial_freq=paper_chain().axial_freq, eta=eta, delta0=delta0,
                      delta_nu=delta0, duration=4.0 * math.pi / delta0,
                      rabi=delta0 / (2.0 * eta))
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class FidelityDistribution:
    mean: float
    std: float
    stderr: float
    percentiles: dict
    trials: int
    shots: np.ndarray = field(default=None, repr=False)


def single_tone_final_states(eta, nbar, rabi, delta, duration, initial="SS"):
    """Closed-form final two-qubit states for arrays of ``(rabi, delta)``.

    Vectorised form of :func:`tweezergate.dynamics.final_state` for a single
    tone at detuning ``delta = nu - mu`` and equal ``eta`` on both ions.
    Returns density matrices of shape ``broadcast(rabi, delta).shape + (4, 4)``.
    """
    rabi, delta = np.broadcast_arrays(np.asarray(rabi, float), np.asarray(delta, float))
    A = 0.5 * rabi * segment_integral(delta, duration)
    theta = 0.25 * rabi**2 * np.imag(phase_kernel(delta, delta, duration))
    s = _spin_eigenvalues((eta, eta))
    sq = s[:, None]**2 - s[None, :]**2
    ds2 = (s[:, None] - s[None, :])**2
    rho_x = X_BASIS.T @ _initial_rho(initial) @ X_BASIS
    factor = np.exp(1j * theta[..., None, None] * sq
                    - 0.5 * (2.0 * nbar + 1.0) * np.abs(A)[..., None, None]**2 * ds2)
    return X_BASIS @ (rho_x * factor) @ X_BASIS.T


def _perturbations(params, noise_models, trials, seed):
    rngs = _channel_rngs(noise_models, seed)
    times = np.linspace(0.0, params.duration, 65)
    eps = {t: np.zeros(trials) for t in TARGETS}
    for model, rng in zip(noise_models, rngs):
        path = sample_paths(model, times, trials, rng)
        # slow noise: the gate responds to the path average over the pulse
        eps[model.target] = eps[model.target] + path.mean(axis=1)
    return eps


def gate_fidelity_mc(params, noise_models, trials=1000, seed=None, case="D",
                     keep_shots=False):
    """Fidelity distribution of the controlled MS gate under noise.

    Parameters
    ----------
    params : GateParams
    noise_models : list of NoiseModel
    trials : int
        At least 100.
    seed : int, optional
        Root seed; channel streams are spawned from it in list order.
    case : {"D", "S"}
        Control dark (target ``|DD>``) or bright (target Bell state).
    keep_shots : bool
        Attach per-shot fidelities.

    Returns
    -------
    FidelityDistribution
    """
    if trials < 100:
        raise DomainError("trials must be >= 100")
    if case not in ("D", "S"):
        raise DomainError(f"unknown case {case!r}")
    eps = _perturbations(params, list(noise_models), trials, seed)
    rabi = params.rabi * np.sqrt(np.clip(1.0 + eps["drive_intensity"], 0.0, None))
    mode_shift = eps["trap_freq"] * params.mode_freq / params.axial_freq
    delta = params.delta0 + mode_shift
    if case == "S":
        delta = delta + params.delta_nu * (1.0 + eps["tweezer_intensity"])
    rho = single_tone_final_states(params.eta, params.nbar, rabi, delta, params.duration)
    p_ss = np.real(rho[:, SS, SS])
    p_dd = np.real(rho[:, DD, DD])
    if case == "D":
        fid = p_dd
    else:
        fid = 0.5 * (p_ss + p_dd) + np.abs(rho[:, SS, DD])
    qs = (5, 25, 50, 75, 95)
    return FidelityDistribution(
        mean=float(fid.mean()), std=float(fid.std(ddof=1)),
        stderr=float(fid.std(ddof=1) / math.sqrt(trials)),
        percentiles={q: float(v) for q, v in zip(qs, np.percentile(fid, qs))},
        trials=trials, shots=fid if keep_shots else None)
