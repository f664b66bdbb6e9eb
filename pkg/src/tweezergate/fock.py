"""
Truncated Fock-space integration of the two-ion, one-mode MS problem.

Serves as the reference for the closed-form propagator in
:mod:`tweezergate.dynamics`: the Schrodinger equation is integrated directly
under the Lamb-Dicke-linearised bichromatic Hamiltonian

    H(t) = S (f(t) a^dag + f(t)^* a) + sum_j offsets_j Z_j / 2,
    f(t) = i sum_k Omega_k cos(mu_k t - phi_k) e^{i nu t},

which keeps both the near-resonant (``nu - mu``) and the counter-rotating
(``nu + mu``) sideband terms. ``S = eta_1 X_1 + eta_2 X_2``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import sqrtm

from .dynamics import PopulationTrace, _initial_rho, default_grid, SS, SD, DS, DD
from .errors import DomainError, NumericError

__all__ = ["FockResult", "fock_oracle", "thermal_weights", "motional_fidelity"]

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])
_I2 = np.eye(2)


@dataclass(frozen=True)
class FockResult:
    trace: PopulationTrace
    spin_rho: np.ndarray      # final reduced two-qubit state, (S, D) product basis
    motion_rho: np.ndarray    # final reduced motional state
    initial_motion: np.ndarray
    cutoff: int
    converged: bool
    convergence_error: float


def thermal_weights(nbar, cutoff):
    """Thermal occupations ``p_n``, n < cutoff (not renormalised)."""
    n = np.arange(cutoff)
    if nbar == 0:
        return (n == 0).astype(float)
    return nbar**n / (nbar + 1.0) ** (n + 1)


def motional_fidelity(rho, sigma):
    """Uhlmann fidelity between two density matrices."""
    sr = sqrtm(rho)
    val = np.trace(sqrtm(sr @ sigma @ sr))
    return float(np.real(val) ** 2)


def _evolve(ctx, drive, t, cutoff, initial, counter_rotating, offsets, rtol, atol):
    e1, e2 = ctx.etas
    s_op = e1 * np.kron(_X, _I2) + e2 * np.kron(_I2, _X)
    z_op = np.zeros((4, 4))
    if offsets is not None:
        o1, o2 = offsets
        z_op = 0.5 * (o1 * np.kron(_Z, _I2) + o2 * np.kron(_I2, _Z))
    adag_t = np.diag(np.sqrt(np.arange(1, cutoff)), 1)  # (a^dag)^T
    a_t = adag_t.T
    nu = ctx.mode_freq
    mus = drive.mus
    rabis = np.array([tn.rabi for tn in drive.tones])
    phases = np.array([tn.phase for tn in drive.tones])
    amps = rabis * np.exp(1j * phases)

    if counter_rotating:
        def f(time):
            return 1j * np.sum(rabis * np.cos(mus * time - phases)) * np.exp(1j * nu * time)
    else:
        def f(time):
            return 0.5j * np.sum(amps * np.exp(1j * (nu - mus) * time))

    def rhs(time, y):
        psi = y.reshape(4, cutoff)
        fv = f(time)
        s_psi = s_op @ psi
        out = s_psi @ (fv * adag_t + np.conj(fv) * a_t)
        if offsets is not None:
            out = out + z_op @ psi
        return (-1j * out).ravel()

    rho0 = _initial_rho(initial)
    w_spin, v_spin = np.linalg.eigh(rho0)
    p_n = thermal_weights(ctx.nbar, cutoff)
    # keep only occupations that leave headroom below the cutoff
    n_keep = int(np.searchsorted(np.cumsum(p_n), 1.0 - 1e-10)) + 1
    n_keep = max(1, min(cutoff // 2, n_keep))
    rhos = np.zeros((t.size, 4, 4), complex)
    motion = np.zeros((cutoff, cutoff), complex)
    for ws, vs in zip(w_spin, v_spin.T):
        if ws < 1e-14:
            continue
        for n in range(n_keep):
            if p_n[n] < 1e-14:
                continue
            psi0 = np.zeros((4, cutoff), complex)
            psi0[:, n] = vs
            sol = solve_ivp(rhs, (t[0], t[-1]), psi0.ravel(), method="DOP853",
                            t_eval=t, rtol=rtol, atol=atol)
            if not sol.success:
                raise NumericError(f"Fock integration failed: {sol.message}")
            psi_t = sol.y.T.reshape(t.size, 4, cutoff)
            weight = ws * p_n[n]
            rhos += weight * np.einsum("tsn,trn->tsr", psi_t, psi_t.conj())
            final = psi_t[-1]
            motion += weight * final.T @ final.conj()
    init_motion = np.diag(p_n[:cutoff].astype(complex))
    init_motion[n_keep:, n_keep:] = 0.0
    return rhos, motion, init_motion / np.trace(init_motion).real


def fock_oracle(ctx, drive, cutoff=30, t_grid=None, initial="SS",
                counter_rotating=True, qubit_offsets=None, tol=1e-4,
                max_cutoff=240, rtol=1e-10, atol=1e-12):
    """Integrate the spin-boson Schrodinger equation in a truncated Fock basis.

    Parameters
    ----------
    ctx : GateContext
    drive : DriveSpec
    cutoff : int
        Number of Fock states kept (at least 10).
    t_grid : array_like, optional
    initial : str or array_like
        Initial two-qubit state, as in :func:`ms_populations`.
    counter_rotating : bool
        Keep the ``nu + mu`` sideband terms.
    qubit_offsets : pair of float, optional
        Static qubit-frequency offsets of the two ions, rad/s.
    tol : float
        Populations at ``cutoff`` and ``2 cutoff`` must agree to ``tol``.
    max_cutoff : int
        Largest cutoff tried before giving up.

    Returns
    -------
    FockResult
    """
    if cutoff < 10:
        raise DomainError("cutoff must be >= 10")
    t = default_grid(drive.duration) if t_grid is None else np.asarray(t_grid, float)
    args = (initial, counter_rotating, qubit_offsets, rtol, atol)
    rhos, motion, init = _evolve(ctx, drive, t, cutoff, *args)
    err = np.inf
    while True:
        rhos2, motion2, init2 = _evolve(ctx, drive, t, 2 * cutoff, *args)
        pops = np.real(np.einsum("tii->ti", rhos))
        pops2 = np.real(np.einsum("tii->ti", rhos2))
        err = float(np.max(np.abs(pops - pops2)))
        cutoff *= 2
        rhos, motion, init = rhos2, motion2, init2
        if err <= tol:
            break
        if 2 * cutoff > max_cutoff:
            raise NumericError(f"Fock oracle not converged at cutoff {cutoff}",
                               residual=err)
    pops = np.real(np.einsum("tii->ti", rhos))
    trace = PopulationTrace(t, pops[:, SS], pops[:, SD] + pops[:, DS], pops[:, DD],
                            rhos[:, SS, DD].copy())
    return FockResult(trace, rhos[-1], motion, init, cutoff, True, err)
