import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from tweezergate import (ChainConfig, ConsistencyError, InfeasibleError, SynthProblem,
                         build_constraints, n_controlled_ms, paper_chain, solve_amplitudes,
                         verify_solution)
from tweezergate.chain import mode_spectrum
from tweezergate.constants import TWO_PI
from tweezergate.synth import SynthSolution, duration_candidates, tone_lattice
import tweezergate.synth as synth_mod

NU0 = TWO_PI * 360e3
DNU = TWO_PI * 4e3
ETA = 0.04


def _quad_closure(nu_k, mu, T):
    x = nu_k - mu
    re = quad(lambda t: math.cos(x * t), 0, T, limit=400, epsabs=1e-16, epsrel=1e-13)[0]
    im = quad(lambda t: math.sin(x * t), 0, T, limit=400, epsabs=1e-16, epsrel=1e-13)[0]
    return complex(re, im)


def _ode_phase(nu_k, eta, mus, omega, T):
    x = nu_k - np.asarray(mus)

    def rhs(t, y):
        d = 0.5 * eta * np.sum(omega * np.exp(1j * x * t))
        a = y[0] + 1j * y[1]
        return [d.real, d.imag, 4 * np.imag(d * np.conj(a))]

    sol = solve_ivp(rhs, (0, T), [0, 0, 0], method="DOP853", rtol=1e-13, atol=1e-16)
    return sol.y[2, -1]


# ---------------------------------------------------------------- constraints

@pytest.mark.parametrize("n_loops", [1, 3])
def test_single_tone_reduces_to_phase_pin(n_loops):
    delta = TWO_PI * 7e3
    T = TWO_PI * n_loops / delta
    omega = np.array([TWO_PI * 40e3])
    prob = SynthProblem((NU0,), ETA, (0.0,), duration=T, tone_detunings=(NU0 - delta,))
    cs = build_constraints(prob)
    assert np.max(np.abs(cs.closure)) <= 1e-12 * ETA * T
    phi = omega @ cs.phase[0] @ omega
    assert phi == pytest.approx(ETA**2 * omega[0] ** 2 * T / delta, rel=1e-12)


def test_two_configuration_closure_against_quadrature():
    d0 = DNU
    T = 4 * math.pi / d0
    mu = NU0 - d0
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0, math.pi / 2), duration=T,
                        tone_detunings=(mu,))
    cs = build_constraints(prob)
    assert abs(cs.closure[0, 0]) <= 1e-12 * ETA * T
    ref = 0.5 * ETA * _quad_closure(NU0 + DNU, mu, T)
    # loop closure at 2 delta0 also holds after T = 4 pi / delta0
    assert abs(cs.closure[1, 0] - ref) <= 1e-9 * ETA * T
    # a tone that misses the k = 1 loop period leaves it open
    off = build_constraints(prob, mus=[NU0 - 0.7 * d0])
    ref_off = 0.5 * ETA * _quad_closure(NU0 + DNU, NU0 - 0.7 * d0, T)
    assert abs(off.closure[1, 0]) > 1e-3 * ETA * T
    assert abs(off.closure[1, 0] - ref_off) <= 1e-9 * abs(ref_off)


def test_zero_amplitudes_give_zero_residuals():
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0, 0), duration=300e-6)
    cs = build_constraints(prob)
    omega = np.zeros(cs.mus.size)
    assert np.all(cs.closure @ omega == 0)
    assert np.all(np.einsum("i,kij,j->k", omega, cs.phase, omega) == 0)


def test_constraints_agree_with_quadrature_on_random_problems():
    rng = np.random.default_rng(20240601)
    worst_alpha = worst_phi = 0.0
    for _ in range(100):
        k = rng.integers(1, 4)
        m = rng.integers(1, 5)
        modes = NU0 + DNU * np.sort(rng.uniform(0, 3, k))
        mus = NU0 + DNU * rng.uniform(-2, 5, m)
        T = rng.uniform(100e-6, 800e-6)
        omega = TWO_PI * rng.uniform(-50e3, 50e3, m)
        prob = SynthProblem(tuple(modes), ETA, (0.0,) * k, duration=T,
                            tone_detunings=tuple(mus))
        cs = build_constraints(prob)
        alpha = cs.closure @ omega
        phis = np.einsum("i,kij,j->k", omega, cs.phase, omega)
        for j in range(k):
            ref = 0.5 * ETA * sum(o * _quad_closure(modes[j], mu, T)
                                  for o, mu in zip(omega, mus))
            scale = ETA * np.max(np.abs(omega)) * T
            worst_alpha = max(worst_alpha, abs(alpha[j] - ref) / scale)
            ref_phi = _ode_phase(modes[j], ETA, mus, omega, T)
            worst_phi = max(worst_phi, abs(phis[j] - ref_phi) / max(1.0, abs(ref_phi)))
    assert worst_alpha <= 1e-9
    assert worst_phi <= 1e-9


def test_amplitude_scaling():
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0, 1), duration=333e-6,
                        tone_detunings=(NU0 - 3e4, NU0 + 1e4, NU0 + 5e4))
    cs = build_constraints(prob)
    omega = np.array([1.3e5, -0.7e5, 2.1e5])
    s = 2.7
    a1, a2 = cs.closure @ omega, cs.closure @ (s * omega)
    p1 = np.einsum("i,kij,j->k", omega, cs.phase, omega)
    p2 = np.einsum("i,kij,j->k", s * omega, cs.phase, s * omega)
    np.testing.assert_allclose(a2, s * a1, rtol=1e-12)
    np.testing.assert_allclose(p2, s**2 * p1, rtol=1e-12)


def test_lattice_and_duration_grid():
    T = 500e-6
    mus = tone_lattice([NU0, NU0 + DNU, NU0 + 2 * DNU], T)
    step = TWO_PI / T
    np.testing.assert_allclose((mus - NU0) / step, np.round((mus - NU0) / step), atol=1e-9)
    assert np.min(np.abs(mus[:, None] - (NU0 + DNU * np.arange(3)))) > 0.1 * step
    d = duration_candidates(DNU)
    assert len(d) == 16
    assert d[0] == pytest.approx(TWO_PI / DNU) and d[-1] == pytest.approx(4 * TWO_PI / DNU)


# ---------------------------------------------------------------- solver

def test_two_configuration_two_tone_solution():
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0.0, math.pi / 2), duration=500e-6)
    sol = solve_amplitudes(prob)
    assert len(sol.tones) == 2
    rep = verify_solution(sol, prob)
    assert rep.closure_ok and rep.phase_ok
    assert np.max(np.abs(rep.alpha_T)) <= 1e-6 * sol.closure_scale
    assert np.max(np.abs(rep.phi_T - [0, math.pi / 2])) <= 1e-4


def test_all_zero_targets_give_zero_solution():
    prob = SynthProblem((NU0, NU0 + DNU, NU0 + 2 * DNU), ETA, (0, 0, 0), duration=500e-6)
    sol = solve_amplitudes(prob)
    assert sol.tones == () and sol.total_rabi == 0.0
    rep = verify_solution(sol, prob)
    assert np.all(rep.trajectories == 0) and np.all(rep.phi_T == 0)


def test_general_solver_at_incommensurate_duration():
    modes = tuple(NU0 + DNU * np.arange(4))
    prob = SynthProblem(modes, ETA, (0, 0, 0, math.pi / 2), duration=612e-6)
    sol = solve_amplitudes(prob, seed=3)
    assert sol.method == "sqp"
    rep = verify_solution(sol, prob)
    assert rep.closure_ok and rep.phase_ok


def test_solver_is_deterministic():
    modes = tuple(NU0 + DNU * np.arange(3))
    prob = SynthProblem(modes, ETA, (0, 0, math.pi / 2), duration=612e-6)
    a, b = solve_amplitudes(prob, seed=11), solve_amplitudes(prob, seed=11)
    assert a.tones == b.tones


def test_multistart_does_not_worsen_power():
    modes = tuple(NU0 + DNU * np.arange(3))
    prob = SynthProblem(modes, ETA, (0, 0, math.pi / 2), duration=612e-6)
    one = solve_amplitudes(prob, starts=1, seed=5)
    many = solve_amplitudes(prob, starts=8, seed=5)
    assert many.rms_rabi <= one.rms_rabi * (1 + 1e-9)


def test_rabi_budget_is_binding_constraint():
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0.0, math.pi / 2), duration=500e-6,
                        max_total_rabi=TWO_PI * 1e3)
    with pytest.raises(InfeasibleError) as info:
        solve_amplitudes(prob)
    assert info.value.constraint == "rabi_budget"


def test_too_few_tones_names_closure():
    prob = SynthProblem((NU0, NU0 + DNU, NU0 + 2 * DNU), ETA, (0, 0, 1.0),
                        duration=612e-6, tone_detunings=(NU0 - DNU,))
    with pytest.raises(InfeasibleError) as info:
        solve_amplitudes(prob)
    assert info.value.constraint == "closure"


def test_budget_respected_when_feasible():
    prob = SynthProblem(tuple(NU0 + DNU * np.arange(3)), ETA, (0, 0, math.pi / 2),
                        max_total_rabi=TWO_PI * 200e3)
    sol = solve_amplitudes(prob)
    assert sol.total_rabi <= TWO_PI * 200e3
    assert sol.scanned and sol.achieved_duration == sol.scanned[-1][0]


def test_min_rabi_selection_picks_cheapest_scanned_duration():
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0.0, math.pi / 2))
    sol = solve_amplitudes(prob, selection="min_rabi")
    feasible = [r for _, r in sol.scanned if not math.isnan(r)]
    assert sol.total_rabi == pytest.approx(min(feasible))


# ---------------------------------------------------------------- n-controlled MS

def test_n1_reduces_to_three_ion_cms():
    sol, circuit, prob = n_controlled_ms(1, chain=paper_chain(), gate_mode=2)
    assert len(prob.effective_modes) == 2
    assert prob.target_phases == (0.0, math.pi / 2)
    assert "CNOT" in circuit.equivalent_to
    rep = verify_solution(sol, prob)
    assert rep.closure_ok and rep.phase_ok


def test_n2_verified_by_integration():
    sol, circuit, prob = n_controlled_ms(2, TWO_PI * 211e3, DNU)
    assert "1-controlled Toffoli" in circuit.equivalent_to
    rep = verify_solution(sol, prob)
    assert sol.residual_phase <= 1e-4
    assert rep.closure_ok and rep.phase_ok


def test_exact_eta_flag_uses_per_configuration_values():
    chain = ChainConfig(4, TWO_PI * 211e3, tweezer_flags=(0, 1, 1, 0),
                        light_shift=TWO_PI * 20e6)
    _, _, prob = n_controlled_ms(2, chain=chain, exact_eta=True, duration=500e-6)
    assert prob.etas.size == 3 and np.ptp(prob.etas) > 0
    assert np.ptp(prob.etas) / prob.etas[0] < 0.05


def test_gate_time_bounded_across_n():
    durations = []
    for n in range(2, 11):
        sol, _, _ = n_controlled_ms(n, TWO_PI * 211e3, DNU)
        durations.append(sol.achieved_duration)
    assert max(durations) / min(durations) < 2.0


def test_power_scales_like_sqrt_chain_size():
    # root of the minimised power sum(Omega^2) at fixed gate time; eta from each chain
    T = 1000e-6
    rms = {}
    for n in (2, 4, 6, 8, 10):
        sol, _, _ = n_controlled_ms(n, TWO_PI * 211e3, DNU, duration=T)
        rms[n + 2] = sol.rms_rabi
    for N, value in rms.items():
        ratio = (value / rms[4]) / math.sqrt(N / 4)
        assert 0.5 <= ratio <= 2.0


# ---------------------------------------------------------------- verifier

def test_single_tone_trajectories_are_circles():
    d0 = DNU
    T = 4 * math.pi / d0
    omega = TWO_PI * 30e3
    prob = SynthProblem((NU0, NU0 + d0), ETA, (0, 0), duration=T)
    sol = SynthSolution(tones=((NU0 - d0, omega, 1),), residual_closure=0.0,
                        residual_phase=0.0, total_rabi=omega, achieved_duration=T,
                        closure_scale=ETA * omega * T)
    rep = verify_solution(sol, prob, samples=2001)
    for k, loops in ((0, 2), (1, 4)):
        delta = d0 * (k + 1)
        centre = 0.5j * ETA * omega / delta
        radius = 0.5 * ETA * omega / delta
        a = rep.trajectories[k]
        np.testing.assert_allclose(np.abs(a - centre), radius, rtol=1e-7)
        winding = np.sum(np.diff(np.unwrap(np.angle(a - centre)))) / TWO_PI
        assert abs(winding) == pytest.approx(loops, abs=1e-6)


def test_verifier_flags_inconsistent_closed_forms(monkeypatch):
    prob = SynthProblem((NU0, NU0 + DNU), ETA, (0.0, math.pi / 2), duration=500e-6)
    sol = solve_amplitudes(prob)
    real = synth_mod.build_constraints

    def skewed(*args, **kwargs):
        cs = real(*args, **kwargs)
        return type(cs)(cs.closure, cs.phase * 1.001, cs.duration, cs.mus)

    monkeypatch.setattr(synth_mod, "build_constraints", skewed)
    with pytest.raises(ConsistencyError):
        verify_solution(sol, prob)


def test_problem_validation():
    from tweezergate import DomainError
    with pytest.raises(DomainError):
        SynthProblem((NU0, NU0 + DNU), ETA, (0.0,))
    with pytest.raises(DomainError):
        SynthProblem((NU0,), ETA, (0.0,), duration=-1.0)
    with pytest.raises(DomainError):
        SynthProblem((NU0, NU0 + DNU), (ETA, ETA, ETA), (0.0, 1.0))


def test_chain_eta_matches_com_participation():
    _, _, prob = n_controlled_ms(3, TWO_PI * 211e3, DNU, duration=500e-6)
    spec = mode_spectrum(ChainConfig(5, TWO_PI * 211e3))
    assert prob.etas[0] == pytest.approx(abs(spec.lamb_dicke[0, 0]), rel=1e-12)
