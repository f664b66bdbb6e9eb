"""Acceptance suite: one test per criterion, each reporting a single line."""
import math
import os
import time

import numpy as np
import pytest

from tweezergate import (GateContext, GateParams, NoiseModel, SynthProblem,
                         control_coherence, dd_schedule, entanglement_phase,
                         equilibrium_positions, fit_detuning, fock_oracle,
                         gate_fidelity_mc, mode_spectrum, ms_populations,
                         n_controlled_ms, paper_chain, phase_from_state, secular_matrix,
                         single_tone, solve_amplitudes, state_fidelity, verify_solution)
from tweezergate.cli import main
from tweezergate.constants import TWO_PI

KHZ = TWO_PI * 1e3
UNTWEEZED = paper_chain(tweezer_flags=(False, False, False))
BASE = mode_spectrum(UNTWEEZED)
NU3 = BASE.frequencies[2]
ETA = abs(BASE.lamb_dicke[2, 0])
D0 = 4 * KHZ
T = 500e-6
RABI = D0 / (2 * ETA)
GRID = np.linspace(0.0, T, 101)


def _maxdiff(a, b):
    return max(float(np.max(np.abs(getattr(a, f) - getattr(b, f))))
               for f in ("p_SS", "p_mixed", "p_DD"))


def _timed(budget):
    start = time.perf_counter()
    return lambda: (time.perf_counter() - start, budget)


def test_criterion_01_mode_frequencies(report):
    lam = np.linalg.eigvalsh(secular_matrix(equilibrium_positions(3)))
    eig_err = float(np.max(np.abs(lam - [1.0, 3.0, 29.0 / 5.0])))
    f2, f3 = BASE.frequencies[1] / KHZ, BASE.frequencies[2] / KHZ
    ok = eig_err <= 1e-8 and abs(f2 - 624) <= 1 and abs(f3 - 866) <= 1
    report("criterion 1", ok,
           f"eigenvalue error {eig_err:.1e} (<=1e-8); nu2 = {f2:.2f} kHz, "
           f"nu3 = {f3:.2f} kHz (within 1 kHz of 624/866)")
    assert ok


def test_criterion_02_tweezer_shift(report):
    shifted = mode_spectrum(paper_chain())
    shift = (shifted.frequencies - BASE.frequencies) / KHZ
    ok = abs(shift[2] / 4.0 - 1) <= 0.05 and abs(shift[1]) * 1e3 <= 1e-6
    report("criterion 2", ok,
           f"third-mode shift {shift[2]:.4f} kHz (4.0 within 5%); "
           f"second-mode shift {shift[1] * 1e3:.1e} Hz (0)")
    assert ok


def test_criterion_03_lamb_dicke_and_rabi(report):
    rabi_khz = RABI / KHZ
    ok = abs(rabi_khz / 47.4 - 1) <= 0.02 and abs(ETA / 0.0422 - 1) <= 0.02
    report("criterion 3", ok,
           f"eta = {ETA:.5f} (~0.0422); delta0/(2 eta) = {rabi_khz:.2f} kHz "
           f"(47.4 within 2%)")
    assert ok


def test_criterion_04_conditional_phases(report):
    clock = _timed(30)
    ctx = GateContext(NU3, ETA)
    details, ok = [], True
    for delta, target in ((D0, math.pi), (2 * D0, math.pi / 2)):
        drive = single_tone(NU3, delta, RABI, T)
        closed = entanglement_phase(drive, NU3, ETA)
        res = fock_oracle(ctx, drive, cutoff=30, t_grid=[0.0, T], counter_rotating=False)
        oracle = phase_from_state(res.trace.state_at(-1))
        e_closed, e_oracle = abs(closed - target), abs(oracle - target)
        ok &= e_closed <= 1e-9 and e_oracle <= 1e-3
        details.append(f"Phi({delta / D0:.0f} delta0) closed-form err {e_closed:.1e}, "
                       f"oracle err {e_oracle:.1e}")
    elapsed, budget = clock()
    ok &= elapsed < budget
    report("criterion 4", ok, "; ".join(details) + f" [{elapsed:.1f} s]")
    assert ok


def test_criterion_05_oracle_equivalence(report, note):
    clock = _timed(120)
    ctx = GateContext(NU3, ETA)
    worst, rwa_gap = 0.0, 0.0
    for delta in (4.05 * KHZ, 8.20 * KHZ):
        drive = single_tone(NU3, delta, RABI, T)
        full = fock_oracle(ctx, drive, cutoff=30, t_grid=GRID).trace
        rwa = fock_oracle(ctx, drive, cutoff=30, t_grid=GRID, counter_rotating=False).trace
        worst = max(worst,
                    _maxdiff(full, ms_populations(ctx, drive, GRID, counter_rotating=True)),
                    _maxdiff(rwa, ms_populations(ctx, drive, GRID)))
        rwa_gap = max(rwa_gap, _maxdiff(full, ms_populations(ctx, drive, GRID)))
    elapsed, budget = clock()
    ok = worst <= 1e-3 and elapsed < budget
    report("criterion 5", ok, f"max |oracle - closed form| = {worst:.1e} (<=1e-3) "
           f"over the 4.05 and 8.20 kHz traces [{elapsed:.1f} s]")
    note("criterion 5", f"rotating-wave closed form vs full oracle differs by "
         f"{rwa_gap:.1e} (counter-rotating terms)")
    assert ok


def test_criterion_06_fidelity_identity(report):
    f = state_fidelity(0.99, 0.0, 0.71, "S")
    ok = f == pytest.approx(0.850, abs=1e-12)
    report("criterion 6", ok, f"F_S = {f:.12f} (0.850)")
    assert ok


def test_criterion_07_detuning_fit(report):
    clock = _timed(10)
    ctx = GateContext(NU3, ETA)
    errs = []
    for true, guess in ((4.05 * KHZ, 4.0 * KHZ), (8.20 * KHZ, 8.0 * KHZ)):
        trace = ms_populations(ctx, single_tone(NU3, true, RABI, T), GRID)
        fit = fit_detuning(trace, ctx, single_tone(NU3, guess, RABI, T), guess)
        errs.append(abs(fit.delta / true - 1))
    elapsed, budget = clock()
    ok = max(errs) <= 1e-3 and elapsed < budget
    report("criterion 7", ok, f"relative fit errors {errs[0]:.1e}, {errs[1]:.1e} "
           f"(<=1e-3) [{elapsed:.1f} s]")
    assert ok


def test_criterion_08_small_synthesis(report):
    clock = _timed(10)
    nu0 = TWO_PI * 360e3
    prob = SynthProblem((nu0, nu0 + D0), 0.04, (0.0, math.pi / 2), duration=T)
    sol = solve_amplitudes(prob)
    rep = verify_solution(sol, prob)
    closure = float(np.max(np.abs(rep.alpha_T)) / sol.closure_scale)
    phase = float(np.max(np.abs(rep.phi_T - [0.0, math.pi / 2])))
    elapsed, budget = clock()
    ok = len(sol.tones) == 2 and closure <= 1e-6 and phase <= 1e-4 and elapsed < budget
    report("criterion 8", ok, f"{len(sol.tones)} tones; |alpha(T)|/scale = {closure:.1e} "
           f"(<=1e-6), phase residual {phase:.1e} rad (<=1e-4) [{elapsed:.1f} s]")
    assert ok


def test_criterion_09_ten_controls(report):
    clock = _timed(300)
    sol, circuit, prob = n_controlled_ms(10, TWO_PI * 211e3, D0)
    rep = verify_solution(sol, prob)
    t_us = sol.achieved_duration * 1e6
    total = sol.total_rabi / KHZ
    elapsed, budget = clock()
    ok = (len(prob.effective_modes) == 11 and 0.3 * 644 <= t_us <= 2 * 644
          and 60 <= total <= 240 and rep.closure_ok and rep.phase_ok and elapsed < budget)
    report("criterion 9", ok,
           f"{len(prob.effective_modes)} configurations, T = {t_us:.0f} us "
           f"(193-1288), total Rabi {total:.1f} kHz (60-240), {len(sol.tones)} tones, "
           f"verified={rep.closure_ok and rep.phase_ok} [{elapsed:.1f} s]")
    assert ok


def _qs(target, amp):
    return NoiseModel("quasi_static_gaussian", target, amp)


def test_criterion_10_noise_monte_carlo(report):
    clock = _timed(120)
    params = GateParams.paper()
    ideal = gate_fidelity_mc(params, [], trials=100, seed=0).mean
    dist = gate_fidelity_mc(params, [_qs("drive_intensity", 0.03),
                                     _qs("trap_freq", TWO_PI * 100)], trials=10_000, seed=0)
    sweeps = {
        "drive": ("drive_intensity", (0.01, 0.03, 0.06), "D"),
        "trap": ("trap_freq", (TWO_PI * 30, TWO_PI * 100, TWO_PI * 300), "D"),
        "tweezer": ("tweezer_intensity", (0.01, 0.05, 0.1), "S"),
    }
    monotone = {}
    for name, (target, amps, case) in sweeps.items():
        m = [gate_fidelity_mc(params, [_qs(target, a)], trials=2000, seed=1, case=case).mean
             for a in amps]
        monotone[name] = m[0] >= m[1] >= m[2]
    elapsed, budget = clock()
    ok = (abs(ideal - 1) <= 1e-9 and 0.90 <= dist.mean <= 0.97 and all(monotone.values())
          and elapsed < budget)
    report("criterion 10", ok,
           f"zero-noise |F-1| = {abs(ideal - 1):.1e}; F_D = {dist.mean:.4f} "
           f"+- {dist.stderr:.4f} ([0.90, 0.97]); monotone sweeps "
           f"{'/'.join(k for k, v in monotone.items() if v)} [{elapsed:.1f} s]")
    assert ok


def test_criterion_11_dd_cancellation(report):
    clock = _timed(60)
    ls = TWO_PI * 10.4e6
    static = [control_coherence(_qs("tweezer_intensity", 0.05), dd_schedule(T, n), ls,
                                trials=1000, seed=n) for n in (1, 2, 4, 8)]
    static_ok = all(abs(r.coherence - 1) <= max(3 * r.stderr, 1e-12) for r in static)
    ou = NoiseModel("ornstein_uhlenbeck", "tweezer_intensity", 3e-4,
                    correlation_time=100 * T)
    w = [control_coherence(ou, dd_schedule(T, n), ls, trials=2000, seed=7).coherence
         for n in (1, 2, 4, 8)]
    elapsed, budget = clock()
    ok = static_ok and bool(np.all(np.diff(w) > 0)) and elapsed < budget
    report("criterion 11", ok,
           f"static offset max |W-1| = {max(abs(r.coherence - 1) for r in static):.1e}; "
           f"OU W(N=1,2,4,8) = {', '.join(f'{x:.3f}' for x in w)} [{elapsed:.1f} s]")
    assert ok


def test_criterion_12_determinism(report, tmp_path, capsys):
    clock = _timed(10)
    identical = {}
    for exp in ("modes", "gate", "synth", "noise", "scan"):
        a, b = tmp_path / exp / "a", tmp_path / exp / "b"
        codes = [main([exp, "--out", str(d), "--seed", "123"]) for d in (a, b)]
        names = sorted(os.listdir(a))
        identical[exp] = (codes == [0, 0] and names == sorted(os.listdir(b)) and
                          all((a / n).read_bytes() == (b / n).read_bytes() for n in names))
    capsys.readouterr()
    elapsed, budget = clock()
    ok = all(identical.values()) and elapsed < budget
    report("criterion 12", ok, "byte-identical reruns: " +
           ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in identical.items()) +
           f" [{elapsed:.1f} s]")
    assert ok
