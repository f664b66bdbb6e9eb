"""
Multi-tone drive synthesis for control-conditioned MS gates.

Each configuration ``k`` (``k`` tweezed ions bright) sees the gate mode at
its own frequency ``nu_k``. A drive of real, signed tone amplitudes
``Omega_i`` at sideband offsets ``mu_i`` must

* close every phase-space loop: ``alpha_k(T) = C_k . Omega = 0`` (linear), and
* leave entanglement phase ``Phi_k = Omega^T Q_k Omega`` equal to a target
  (quadratic),

with the smallest drive power ``sum Omega_i^2``. The linear constraints are
removed by working in their null space; the quadratic ones are solved by an
SQP Newton iteration with multistart. On tone lattices commensurate with
``2 pi / T`` every ``Q_k`` is diagonal and the problem reduces to a linear
program in ``Omega_i^2``, solved exactly.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import linprog

from .chain import conditional_spectrum, mode_spectrum, ChainConfig
from .dynamics import DriveSpec, Tone, phase_kernel, segment_integral
from .errors import ConsistencyError, DomainError, InfeasibleError, NumericError

__all__ = [
    "SynthProblem", "SynthSolution", "ConstraintSystem", "VerificationReport",
    "CircuitDescriptor", "tone_lattice", "duration_candidates",
    "build_constraints", "solve_amplitudes", "n_controlled_ms", "verify_solution",
]


@dataclass(frozen=True)
class SynthProblem:
    """Phase targets over a set of control-conditioned mode frequencies.

    Parameters
    ----------
    effective_modes : sequence of float
        ``nu_k`` in rad/s, one per configuration.
    eta : float or sequence of float
        Lamb-Dicke parameter of the gate ions, scalar or per configuration.
    target_phases : sequence of float
        ``Phi_k`` targets in rad.
    duration : float, optional
        Gate time in s. ``None`` scans :func:`duration_candidates`.
    tone_detunings : sequence of float, optional
        Tone sideband offsets ``mu_i`` in rad/s. ``None`` uses
        :func:`tone_lattice` for each duration.
    max_total_rabi : float, optional
        Budget on ``sum |Omega_i|`` in rad/s.
    """
    effective_modes: tuple
    eta: object
    target_phases: tuple
    duration: float = None
    tone_detunings: tuple = None
    max_total_rabi: float = None

    def __post_init__(self):
        object.__setattr__(self, "effective_modes",
                           tuple(float(v) for v in self.effective_modes))
        object.__setattr__(self, "target_phases",
                           tuple(float(v) for v in self.target_phases))
        if self.tone_detunings is not None:
            object.__setattr__(self, "tone_detunings",
                               tuple(float(v) for v in self.tone_detunings))
        if len(self.target_phases) != len(self.effective_modes):
            raise DomainError("target_phases must match effective_modes")
        if self.duration is not None and not self.duration > 0:
            raise DomainError("duration must be positive")
        if np.size(self.eta) not in (1, len(self.effective_modes)):
            raise DomainError("eta must be scalar or one per configuration")

    @property
    def etas(self):
        return np.broadcast_to(np.asarray(self.eta, float),
                               (len(self.effective_modes),)).copy()

    @property
    def splitting(self):
        nu = np.sort(self.effective_modes)
        return float(np.min(np.diff(nu))) if nu.size > 1 else None


@dataclass(frozen=True)
class SynthSolution:
    """Tone table ``(mu, |Omega|, sign)`` with residual diagnostics."""
    tones: tuple
    residual_closure: float
    residual_phase: float
    total_rabi: float
    achieved_duration: float
    rms_rabi: float = 0.0
    peak_rabi: float = 0.0
    phases: tuple = ()
    closure_scale: float = 0.0
    method: str = ""
    scanned: tuple = field(default=(), repr=False)  # (T, total_rabi or nan)

    @property
    def amplitudes(self):
        return np.array([r * s for _, r, s in self.tones])

    @property
    def mus(self):
        return np.array([m for m, _, _ in self.tones])

    def to_drive(self):
        return DriveSpec(tuple(Tone(m, r, 0.0 if s > 0 else math.pi)
                               for m, r, s in self.tones), self.achieved_duration)


@dataclass(frozen=True)
class ConstraintSystem:
    """``alpha_k(T) = closure[k] @ Omega``; ``Phi_k = Omega @ phase[k] @ Omega``."""
    closure: np.ndarray   # (K, M) complex
    phase: np.ndarray     # (K, M, M) real symmetric
    duration: float
    mus: np.ndarray


def tone_lattice(effective_modes, duration, margin=None, min_gap=0.1):
    """Tone offsets on the lattice ``nu_0 + j 2 pi / T`` around the mode band.

    The lattice is anchored at the lowest configuration so that every tone
    closes its loop in that configuration. Points closer than
    ``min_gap * 2 pi / T`` to any mode are skipped.
    """
    nu = np.sort(np.asarray(effective_modes, float))
    step = 2.0 * math.pi / duration
    if margin is None:
        margin = float(np.min(np.diff(nu))) if nu.size > 1 else 2.0 * step
    j_lo = math.ceil((nu[0] - margin - nu[0]) / step - 1e-9)
    j_hi = math.floor((nu[-1] + margin - nu[0]) / step + 1e-9)
    mus = nu[0] + step * np.arange(j_lo, j_hi + 1)
    gap = np.min(np.abs(mus[:, None] - nu[None, :]), axis=1)
    return mus[gap > min_gap * step]


def duration_candidates(splitting, count=16):
    """Uniform grid of ``count`` durations over ``[2 pi, 8 pi] / splitting``."""
    return np.linspace(2.0 * math.pi, 8.0 * math.pi, count) / splitting


def build_constraints(problem, duration=None, mus=None):
    """Closed-form closure map and phase forms for every configuration."""
    T = problem.duration if duration is None else duration
    if T is None:
        raise DomainError("a duration is required")
    if mus is None:
        mus = (np.asarray(problem.tone_detunings, float)
               if problem.tone_detunings is not None
               else tone_lattice(problem.effective_modes, T))
    mus = np.asarray(mus, float)
    nu = np.asarray(problem.effective_modes, float)
    eta = problem.etas
    x = nu[:, None] - mus[None, :]                                   # (K, M)
    closure = 0.5 * eta[:, None] * segment_integral(x, T)
    g = phase_kernel(x[:, :, None], x[:, None, :], T)                # (K, M, M)
    q = np.imag(g)
    phase = eta[:, None, None]**2 * 0.5 * (q + np.swapaxes(q, 1, 2))
    return ConstraintSystem(closure, phase, float(T), mus)


# --------------------------------------------------------------------------
# solvers
# --------------------------------------------------------------------------

def _null_space(closure, ref, rel_tol=1e-10):
    # ``ref`` is the natural size of a closure coefficient, eta T / 2
    b = np.vstack([closure.real, closure.imag])
    m = b.shape[1]
    if not b.size:
        return np.eye(m)
    _, s, vt = np.linalg.svd(b)
    rank = int(np.sum(s > rel_tol * ref))
    if rank == 0:
        return np.eye(m)
    return vt[rank:].T


def _solve_lp(p_diag, targets):
    # min sum w  s.t.  p_diag @ w = targets, w >= 0
    col = np.max(np.abs(p_diag), axis=0)
    col[col == 0] = 1.0
    a = p_diag / col
    res = linprog(1.0 / col, A_eq=a, b_eq=targets, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return np.sqrt(np.maximum(res.x / col, 0.0))


def _feasibility(p, theta, y, tol=1e-13, max_iter=100):
    # minimum-norm Gauss-Newton onto {y : y P_k y = theta_k}
    for _ in range(max_iter):
        c = np.einsum("i,kij,j->k", y, p, y) - theta
        if np.max(np.abs(c)) <= tol:
            return y, True
        jac = 2.0 * np.einsum("kij,j->ki", p, y)
        step = -np.linalg.lstsq(jac, c, rcond=None)[0]
        lam = 1.0
        base = np.sum(np.abs(c))
        while lam > 1e-6:
            trial = y + lam * step
            ct = np.einsum("i,kij,j->k", trial, p, trial) - theta
            if np.sum(np.abs(ct)) < base:
                break
            lam *= 0.5
        y = trial
    c = np.einsum("i,kij,j->k", y, p, y) - theta
    return y, bool(np.max(np.abs(c)) <= 1e3 * tol)


def _sqp(p, theta, y0, max_iter=300):
    """Newton iteration on the KKT conditions of min |y|^2 s.t. y P_k y = theta."""
    y, ok = _feasibility(p, theta, y0)
    if not ok:
        return None
    k, d = theta.size, y.size
    for _ in range(max_iter):
        c = np.einsum("i,kij,j->k", y, p, y) - theta
        jac = 2.0 * np.einsum("kij,j->ki", p, y)
        lam = np.linalg.lstsq(jac.T, 2.0 * y, rcond=None)[0]
        hess = 2.0 * np.eye(d) - 2.0 * np.einsum("k,kij->ij", lam, p)
        # convexify on the tangent space of the constraints
        q, _ = np.linalg.qr(jac.T, mode="complete")
        z = q[:, min(k, d):]
        if z.size:
            red = z.T @ hess @ z
            low = np.min(np.linalg.eigvalsh(red))
            if low < 1e-3:
                hess = hess + (1e-3 - low) * np.eye(d)
        kkt = np.block([[hess, jac.T], [jac, np.zeros((k, k))]])
        rhs = -np.concatenate([2.0 * y - jac.T @ lam, c])
        try:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        step = sol[:d]
        rho = 2.0 * np.max(np.abs(lam)) + 1.0
        merit = y @ y + rho * np.sum(np.abs(c))
        t = 1.0
        while t > 1e-8:
            trial = y + t * step
            ct = np.einsum("i,kij,j->k", trial, p, trial) - theta
            if trial @ trial + rho * np.sum(np.abs(ct)) <= merit - 1e-4 * t * (step @ step):
                break
            t *= 0.5
        y = trial
        if np.linalg.norm(t * step) <= 1e-12 * (1.0 + np.linalg.norm(y)):
            break
    y, ok = _feasibility(p, theta, y)
    return y if ok else None


def _solve_fixed(problem, T, mus, starts, rng):
    cs = build_constraints(problem, T, mus)
    theta = np.asarray(problem.target_phases, float)
    m = cs.mus.size
    if not np.any(theta):
        return np.zeros(m), cs, "zero"
    if m == 0:
        raise InfeasibleError("no tones available", "closure")
    n = _null_space(cs.closure, 0.5 * float(np.max(problem.etas)) * T)
    if n.shape[1] == 0:
        raise InfeasibleError("closure constraints leave no free amplitudes", "closure")
    p = np.einsum("ia,kij,jb->kab", n, cs.phase, n)
    scale = np.max(np.abs(p))
    p_s = p / scale
    off = p_s - np.einsum("kii->ki", p_s)[:, :, None] * np.eye(p_s.shape[1])
    if np.max(np.abs(off)) <= 1e-10:
        y = _solve_lp(np.einsum("kii->ki", p_s), theta)
        if y is None:
            raise InfeasibleError("phase targets unreachable on this tone set", "phase")
        return n @ (y / math.sqrt(scale)), cs, "lp"
    if n.shape[1] < theta.size:
        raise InfeasibleError(
            f"{n.shape[1]} free amplitudes for {theta.size} phase targets", "closure")
    best = None
    for _ in range(starts):
        y0 = rng.standard_normal(n.shape[1])
        y0 *= math.sqrt(np.max(np.abs(theta)) / max(abs(y0 @ p_s[-1] @ y0), 1e-3))
        y = _sqp(p_s, theta, y0)
        if y is not None and (best is None or y @ y < best @ best):
            best = y
    if best is None:
        raise InfeasibleError("no start reached the phase targets", "phase")
    return n @ (best / math.sqrt(scale)), cs, "sqp"


def _package(omega, cs, problem, method, scanned=()):
    alpha_t = cs.closure @ omega
    phases = np.einsum("i,kij,j->k", omega, cs.phase, omega)
    eta_max = float(np.max(np.abs(problem.etas)))
    amp = np.abs(omega)
    scale = eta_max * float(np.max(amp, initial=0.0)) * cs.duration
    keep = amp > 1e-12 * max(float(np.max(amp, initial=0.0)), 1e-300)
    tones = tuple((float(mu), float(abs(om)), 1 if om >= 0 else -1)
                  for mu, om, k in zip(cs.mus, omega, keep) if k)
    return SynthSolution(
        tones=tones,
        residual_closure=float(np.max(np.abs(alpha_t), initial=0.0)),
        residual_phase=float(np.max(np.abs(phases - np.asarray(problem.target_phases)))),
        total_rabi=float(np.sum(amp)),
        achieved_duration=cs.duration,
        rms_rabi=float(math.sqrt(np.sum(amp**2))),
        peak_rabi=float(np.max(amp, initial=0.0)),
        phases=tuple(float(v) for v in phases),
        closure_scale=scale,
        method=method,
        scanned=tuple(scanned))


def solve_amplitudes(problem, closure_tol=1e-6, phase_tol=1e-4, starts=8, seed=0,
                     n_durations=16, selection="fastest"):
    """Minimum-power signed tone amplitudes meeting closure and phase targets.

    Parameters
    ----------
    problem : SynthProblem
    closure_tol : float
        Bound on ``max_k |alpha_k(T)|`` relative to ``eta max|Omega| T``.
    phase_tol : float
        Bound on ``max_k |Phi_k - target_k|`` in rad.
    starts : int
        Multistart count for the Newton solver.
    seed : int
    n_durations : int
        Durations scanned when ``problem.duration`` is ``None``.
    selection : {"fastest", "min_rabi"}
        Among feasible scanned durations return the shortest, or the one
        with the smallest total Rabi frequency.

    Returns
    -------
    SynthSolution

    Raises
    ------
    InfeasibleError
        If no duration admits a solution within tolerances and budget.
    """
    if selection not in ("fastest", "min_rabi"):
        raise DomainError(f"unknown selection {selection!r}")
    if problem.duration is not None:
        durations = [problem.duration]
    else:
        split = problem.splitting
        if split is None:
            raise DomainError("a duration is required for a single configuration")
        durations = list(duration_candidates(split, n_durations))
    budget = np.inf if problem.max_total_rabi is None else problem.max_total_rabi
    found, scanned, last_err = [], [], None
    for T in durations:
        rng = np.random.default_rng([seed, len(scanned)])
        try:
            omega, cs, method = _solve_fixed(problem, T, problem.tone_detunings,
                                             starts, rng)
        except InfeasibleError as exc:
            scanned.append((float(T), float("nan")))
            last_err = exc
            continue
        sol = _package(omega, cs, problem, method)
        scanned.append((float(T), sol.total_rabi))
        if sol.residual_phase > phase_tol:
            last_err = NumericError(
                f"phase residual {sol.residual_phase:.2e} rad above tolerance",
                residual=sol.residual_phase)
            continue
        if sol.residual_closure > closure_tol * max(sol.closure_scale, 1e-300) \
                and sol.closure_scale > 0:
            last_err = NumericError(
                f"closure residual {sol.residual_closure:.2e} above tolerance",
                residual=sol.residual_closure)
            continue
        if sol.total_rabi > budget:
            last_err = InfeasibleError(
                f"total Rabi {sol.total_rabi:.4g} rad/s exceeds budget {budget:.4g}",
                "rabi_budget")
            continue
        found.append(sol)
        if selection == "fastest":
            break
    if not found:
        if isinstance(last_err, NumericError):
            raise last_err
        raise last_err or InfeasibleError("no feasible duration", "closure")
    best = found[0] if selection == "fastest" else min(found, key=lambda s: s.total_rabi)
    return _with_scan(best, scanned)


def _with_scan(sol, scanned):
    from dataclasses import replace
    return replace(sol, scanned=tuple(scanned))


# --------------------------------------------------------------------------
# n-controlled MS
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CircuitDescriptor:
    n_controls: int
    target_angle: float
    configuration_phases: tuple
    equivalent_to: str


def n_controlled_ms(n, nu_com=None, delta_nu=None, target_angle=math.pi / 2,
                    chain=None, eta=None, exact_eta=False, duration=None,
                    max_total_rabi=None, gate_mode=0, tone_detunings=None,
                    **solver_options):
    """Drive for an ``n``-controlled MS gate on the two untweezed ions.

    Configuration ``k`` (``k`` controls bright) receives zero phase for
    ``k < n`` and ``target_angle`` for ``k = n``.

    Parameters
    ----------
    n : int
        Number of tweezed control ions.
    nu_com, delta_nu : float, optional
        COM frequency and per-ion shift in rad/s. When omitted they come
        from :func:`conditional_spectrum` of ``chain`` (COM mode).
    chain : ChainConfig, optional
        ``n + 2`` ion chain with ``n`` tweezed ions. Supplies ``eta`` too.
    eta : float, optional
        Lamb-Dicke parameter of the target ions; overrides ``chain``.
    exact_eta : bool
        Use the per-configuration eigen-solve value of ``eta``.
    gate_mode : int
        Mode index driven by the gate (0, the COM mode, by default).
    tone_detunings : sequence of float, optional
        Fixed tone offsets in rad/s instead of the default lattice.

    Returns
    -------
    (SynthSolution, CircuitDescriptor, SynthProblem)
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if chain is not None:
        if chain.n_ions != n + 2 or len(chain.tweezed) != n:
            raise DomainError("chain must have n tweezed ions and two untweezed")
    if nu_com is not None and delta_nu is not None:
        modes = nu_com + delta_nu * np.arange(n + 1)
    elif chain is not None:
        modes = conditional_spectrum(chain, gate_mode, max_subsets=0).frequencies
    else:
        raise DomainError("give nu_com and delta_nu, or a chain")
    if eta is None:
        if chain is None:
            chain = ChainConfig(n + 2, float(modes[0]),
                                tweezer_flags=(False,) + (True,) * n + (False,))
        targets = [i for i, f in enumerate(chain.tweezer_flags) if not f]
        if exact_eta:
            eta = []
            for k in range(n + 1):
                sub = chain.with_tweezed(chain.tweezed[:k])
                ld = mode_spectrum(sub).lamb_dicke[gate_mode, targets]
                eta.append(float(np.mean(np.abs(ld))))
        else:
            base = chain.with_tweezed(())
            eta = float(np.mean(np.abs(mode_spectrum(base).lamb_dicke[gate_mode, targets])))
    targets_phi = np.zeros(n + 1)
    targets_phi[-1] = target_angle
    problem = SynthProblem(tuple(modes), eta, tuple(targets_phi), duration=duration,
                           tone_detunings=tone_detunings, max_total_rabi=max_total_rabi)
    sol = solve_amplitudes(problem, **solver_options)
    circuit = CircuitDescriptor(
        n_controls=n, target_angle=float(target_angle),
        configuration_phases=tuple(targets_phi),
        equivalent_to=(f"{n}-controlled MS({target_angle:.6g}); up to single-qubit "
                       + ("rotations a CNOT" if n == 1 else
                          f"rotations a {n - 1}-controlled Toffoli")))
    return sol, circuit, problem


# --------------------------------------------------------------------------
# verification by direct integration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationReport:
    alpha_T: np.ndarray
    phi_T: np.ndarray
    times: np.ndarray
    trajectories: np.ndarray   # (K, len(times)) complex
    phases_t: np.ndarray       # (K, len(times))
    closure_ok: bool
    phase_ok: bool
    max_discrepancy: float


def verify_solution(solution, problem, samples=257, closure_tol=1e-6,
                    phase_tol=1e-4, consistency_tol=1e-6):
    """Re-integrate every configuration's trajectory numerically.

    The displacement and phase are integrated as ODEs
    ``d alpha / dt = eta/2 sum_i Omega_i e^{i(nu_k - mu_i)t}``,
    ``d Phi / dt = 4 Im(d alpha/dt alpha*)`` with an adaptive Runge-Kutta
    scheme, independently of the closed forms used to assemble constraints.

    Raises
    ------
    ConsistencyError
        If integrated and closed-form end values differ by more than
        ``consistency_tol`` (relative to the displacement scale and in rad).
    """
    T = solution.achieved_duration
    times = np.linspace(0.0, T, samples)
    omega = solution.amplitudes
    mus = solution.mus
    nu = np.asarray(problem.effective_modes, float)
    etas = problem.etas
    trajs = np.zeros((nu.size, samples), complex)
    phis = np.zeros((nu.size, samples))
    for k, (nu_k, eta_k) in enumerate(zip(nu, etas)):
        x = nu_k - mus
        def rhs(t, y, x=x, eta_k=eta_k):
            drive = 0.5 * eta_k * np.sum(omega * np.exp(1j * x * t))
            alpha = y[0] + 1j * y[1]
            dphi = 4.0 * np.imag(drive * np.conj(alpha))
            return [drive.real, drive.imag, dphi]
        if omega.size:
            sol = solve_ivp(rhs, (0.0, T), [0.0, 0.0, 0.0], method="DOP853",
                            t_eval=times, rtol=1e-12, atol=1e-14)
            if not sol.success:
                raise NumericError(f"verification integration failed: {sol.message}")
            trajs[k] = sol.y[0] + 1j * sol.y[1]
            phis[k] = sol.y[2]
    alpha_T = trajs[:, -1]
    phi_T = phis[:, -1]
    cs = build_constraints(problem, T, mus)
    closed_alpha = cs.closure @ omega
    closed_phi = np.einsum("i,kij,j->k", omega, cs.phase, omega)
    scale = max(solution.closure_scale, 1e-300)
    disc = max(float(np.max(np.abs(alpha_T - closed_alpha), initial=0.0)) / scale,
               float(np.max(np.abs(phi_T - closed_phi), initial=0.0)))
    if omega.size and disc > consistency_tol:
        raise ConsistencyError(f"closed form and integration differ by {disc:.2e}")
    target = np.asarray(problem.target_phases)
    return VerificationReport(
        alpha_T=alpha_T, phi_T=phi_T, times=times, trajectories=trajs, phases_t=phis,
        closure_ok=bool(np.max(np.abs(alpha_T), initial=0.0) <= closure_tol * scale
                        or not omega.size),
        phase_ok=bool(np.max(np.abs(phi_T - target)) <= phase_tol),
        max_discrepancy=disc)
