"""
Command-line front end.

``tweezergate <experiment> [--config FILE] [--set key=value ...]`` runs one
of the experiments ``modes``, ``gate``, ``synth``, ``noise`` or ``scan`` and
writes plot-ready tables to the output directory. Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 infeasible synthesis,
5 output I/O failure. Failures print a one-line JSON record on stderr.
"""
import argparse
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .chain import conditional_spectrum, mode_spectrum
from .config import ConfigError, bundled_config_path, chain_from_config, load_config
from .constants import TWO_PI
from .dynamics import (DriveSpec, GateContext, Tone, displacement_trajectory,
                       entanglement_phase, ms_populations, parity_scan, single_tone,
                       state_fidelity)
from .errors import DomainError, InfeasibleError, NumericError, TweezerGateError
from .io import Table, emit
from .noise import (GateParams, NoiseModel, control_coherence, dd_schedule,
                    gate_fidelity_mc)
from .synth import n_controlled_ms, verify_solution

log = logging.getLogger("tweezergate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4, 5


def _hz(omega):
    return float(omega) / TWO_PI


def _targets(chain):
    return [i for i, f in enumerate(chain.tweezer_flags) if not f]


# --------------------------------------------------------------------------
# experiments; each returns a list of Tables
# --------------------------------------------------------------------------

def run_modes(cfg):
    chain = chain_from_config(cfg["chain"])
    spec = mode_spectrum(chain)
    base = mode_spectrum(chain.with_tweezed(()))
    table = Table("modes", ("mode", "freq_hz", "base_freq_hz", "shift_hz", "vector",
                            "lamb_dicke"))
    for m in range(chain.n_ions):
        table.add(mode=m, freq_hz=_hz(spec.frequencies[m]),
                  base_freq_hz=_hz(base.frequencies[m]),
                  shift_hz=_hz(spec.frequencies[m] - base.frequencies[m]),
                  vector=[float(v) for v in spec.mode_matrix[m]],
                  lamb_dicke=[float(v) for v in spec.lamb_dicke[m]])
    cond = Table("modes_conditional", ("mode", "k", "freq_hz", "shift_hz"))
    for m in range(chain.n_ions):
        cs = conditional_spectrum(chain, m, max_subsets=0)
        f0 = cs.conditional_freqs[0][1]
        for k, f in cs.conditional_freqs:
            cond.add(mode=m, k=k, freq_hz=_hz(f), shift_hz=_hz(f - f0))
    return [table, cond]


def _gate_setup(cfg):
    chain = chain_from_config(cfg["chain"])
    g = cfg["gate"]
    mode = g["mode"]
    if not 0 <= mode < chain.n_ions:
        raise ConfigError("gate.mode out of range")
    targets = _targets(chain)
    if len(targets) != 2:
        raise ConfigError("the gate needs exactly two untweezed ions")
    base = mode_spectrum(chain.with_tweezed(()))
    etas = tuple(float(v) for v in base.lamb_dicke[mode, targets])
    eta = float(np.mean(np.abs(etas)))
    cs = conditional_spectrum(chain, mode, max_subsets=0)
    nu_d, nu_s = cs.conditional_freqs[0][1], cs.conditional_freqs[-1][1]
    delta0 = TWO_PI * g["delta0_hz"]
    rabi = delta0 / (2.0 * eta) if g["rabi_hz"] is None else TWO_PI * g["rabi_hz"]
    d = cfg["drive"]
    if d["tones"]:
        duration = d["duration_s"] if d["duration_s"] is not None else g["duration_s"]
        drive = DriveSpec(tuple(Tone(TWO_PI * float(t["mu_hz"]),
                                     TWO_PI * float(t.get("rabi_hz", _hz(rabi))),
                                     float(t.get("phase", 0.0))) for t in d["tones"]),
                          duration)
    else:
        drive = single_tone(nu_d, delta0, rabi, g["duration_s"])
    return chain, etas, eta, {"D": nu_d, "S": nu_s}, drive


def run_gate(cfg):
    g = cfg["gate"]
    _, etas, eta, nu, drive = _gate_setup(cfg)
    t = np.linspace(0.0, drive.duration, g["samples"])
    traces = Table("gate_traces", ("t_s", "case", "p_SS", "p_mixed", "p_DD",
                                   "re_coherence", "im_coherence"))
    traj = Table("gate_trajectories", ("t_s", "re_alpha", "im_alpha", "phi_rad",
                                       "config_k"))
    summary = Table("gate_summary", ("case", "mode_freq_hz", "delta_hz", "rabi_hz", "eta",
                                     "phi_rad", "p_SS", "p_mixed", "p_DD",
                                     "parity_amplitude", "fidelity", "oracle_max_diff"))
    for k, case in enumerate(g["cases"]):
        ctx = GateContext(nu[case], etas, g["nbar"], case)
        tr = ms_populations(ctx, drive, t, counter_rotating=g["counter_rotating"])
        for i in range(t.size):
            traces.add(t_s=float(t[i]), case=case, p_SS=float(tr.p_SS[i]),
                       p_mixed=float(tr.p_mixed[i]), p_DD=float(tr.p_DD[i]),
                       re_coherence=float(tr.coherence[i].real),
                       im_coherence=float(tr.coherence[i].imag))
        cfg_k = 0 if case == "D" else 1
        tj = displacement_trajectory(drive, nu[case], eta, t, g["counter_rotating"])
        for i in range(t.size):
            traj.add(t_s=float(t[i]), re_alpha=float(tj.alpha[i].real),
                     im_alpha=float(tj.alpha[i].imag), phi_rad=float(tj.phi[i]),
                     config_k=cfg_k)
        st = tr.state_at(-1)
        # a vanishing coherence has no fringe to fit
        amp = parity_scan(st).amplitude if abs(st.coherence) > 1e-12 else 0.0
        p_ss = min(max(st.p_SS, 0.0), 1.0)
        p_dd = min(max(st.p_DD, 0.0), 1.0)
        oracle = None
        if g["oracle"]:
            from .fock import fock_oracle
            res = fock_oracle(ctx, drive, cutoff=g["oracle_cutoff"], t_grid=t,
                              counter_rotating=g["counter_rotating"])
            oracle = float(max(np.max(np.abs(res.trace.p_SS - tr.p_SS)),
                               np.max(np.abs(res.trace.p_mixed - tr.p_mixed)),
                               np.max(np.abs(res.trace.p_DD - tr.p_DD))))
        summary.add(case=case, mode_freq_hz=_hz(nu[case]),
                    delta_hz=_hz(nu[case] - drive.tones[0].mu) if len(drive.tones) == 1
                    else None,
                    rabi_hz=_hz(drive.tones[0].rabi), eta=eta,
                    phi_rad=entanglement_phase(drive, nu[case], eta,
                                               counter_rotating=g["counter_rotating"]),
                    p_SS=float(st.p_SS), p_mixed=float(st.p_mixed), p_DD=float(st.p_DD),
                    parity_amplitude=amp,
                    fidelity=state_fidelity(p_ss, p_dd, amp, case),
                    oracle_max_diff=oracle)
    return [summary, traces, traj]


def run_synth(cfg):
    s = cfg["synth"]
    solver = dict(closure_tol=s["closure_tol"], phase_tol=s["phase_tol"],
                  starts=s["starts"], seed=cfg["seed"], selection=s["selection"])
    budget = None if s["max_total_rabi_hz"] is None else TWO_PI * s["max_total_rabi_hz"]
    duration = s["duration_s"]
    if s["nu_com_hz"] is not None and s["delta_nu_hz"] is not None:
        n = s["n"] if s["n"] is not None else len(cfg["chain"]["tweezed"])
        nu0 = TWO_PI * s["nu_com_hz"]
        kwargs = dict(nu_com=nu0, delta_nu=TWO_PI * s["delta_nu_hz"], eta=s["eta"])
    else:
        chain = chain_from_config(cfg["chain"])
        n = len(chain.tweezed)
        if s["n"] is not None and s["n"] != n:
            raise ConfigError("synth.n must equal the number of tweezed ions")
        mode = s["mode"] if s["mode"] is not None else cfg["gate"]["mode"]
        nu0 = conditional_spectrum(chain, mode, max_subsets=0).conditional_freqs[0][1]
        kwargs = dict(chain=chain, gate_mode=mode, eta=s["eta"], exact_eta=s["exact_eta"])
    tones = None
    if s["tone_offsets_hz"] is not None:
        tones = tuple(nu0 + TWO_PI * float(v) for v in s["tone_offsets_hz"])
    sol, circuit, problem = n_controlled_ms(
        n, target_angle=s["target_angle"], duration=duration, max_total_rabi=budget,
        tone_detunings=tones, **kwargs, **solver)
    report = verify_solution(sol, problem, samples=s["samples"],
                             closure_tol=s["closure_tol"], phase_tol=s["phase_tol"])
    if not (report.closure_ok and report.phase_ok):
        raise NumericError("verification of the synthesized drive failed",
                           residual=float(np.max(np.abs(report.alpha_T))))
    summary = Table("synth_summary", (
        "n_controls", "duration_s", "total_rabi_hz", "rms_rabi_hz", "peak_rabi_hz",
        "n_tones", "residual_closure", "residual_closure_rel", "residual_phase",
        "method", "verified", "equivalent_to"))
    summary.add(n_controls=n, duration_s=sol.achieved_duration,
                total_rabi_hz=_hz(sol.total_rabi), rms_rabi_hz=_hz(sol.rms_rabi),
                peak_rabi_hz=_hz(sol.peak_rabi), n_tones=len(sol.tones),
                residual_closure=sol.residual_closure,
                residual_closure_rel=sol.residual_closure / max(sol.closure_scale, 1e-300),
                residual_phase=sol.residual_phase, method=sol.method,
                verified=True, equivalent_to=circuit.equivalent_to)
    tones_t = Table("synth_tones", ("mu_hz", "offset_hz", "rabi_hz", "sign"))
    for mu, rabi, sign in sol.tones:
        tones_t.add(mu_hz=_hz(mu), offset_hz=_hz(mu - problem.effective_modes[0]),
                    rabi_hz=_hz(rabi), sign=sign)
    configs = Table("synth_configs", ("config_k", "mode_freq_hz", "eta", "target_rad",
                                      "phi_rad", "abs_alpha_T"))
    for k in range(len(problem.effective_modes)):
        configs.add(config_k=k, mode_freq_hz=_hz(problem.effective_modes[k]),
                    eta=float(problem.etas[k]), target_rad=problem.target_phases[k],
                    phi_rad=float(report.phi_T[k]), abs_alpha_T=float(abs(report.alpha_T[k])))
    traj = Table("synth_trajectories", ("t_s", "re_alpha", "im_alpha", "phi_rad",
                                        "config_k"))
    for k in range(len(problem.effective_modes)):
        for i, t in enumerate(report.times):
            a = report.trajectories[k, i]
            traj.add(t_s=float(t), re_alpha=float(a.real), im_alpha=float(a.imag),
                     phi_rad=float(report.phases_t[k, i]), config_k=k)
    scan = Table("synth_scan", ("duration_s", "total_rabi_hz", "feasible"))
    for T, total in sol.scanned:
        ok = not math.isnan(total)
        scan.add(duration_s=T, total_rabi_hz=_hz(total) if ok else None, feasible=ok)
    return [summary, tones_t, configs, traj, scan]


def _noise_models(cfg):
    out = []
    for ch in cfg["noise"]["channels"]:
        amp = float(ch.get("amplitude", 0.0))
        if ch.get("target") == "trap_freq":
            amp *= TWO_PI
        try:
            out.append(NoiseModel(ch.get("kind"), ch.get("target"), amp,
                                  ch.get("correlation_time_s"), ch.get("seed")))
        except DomainError as exc:
            raise ConfigError(f"noise channel {ch}: {exc}") from exc
    return out


def run_noise(cfg):
    chain, _, eta, nu, drive = _gate_setup(cfg)
    if len(drive.tones) != 1:
        raise ConfigError("the noise experiment needs a single-tone drive")
    g, nz = cfg["gate"], cfg["noise"]
    params = GateParams(mode_freq=nu["D"], axial_freq=chain.axial_freq, eta=eta,
                        delta0=nu["D"] - drive.tones[0].mu, delta_nu=nu["S"] - nu["D"],
                        duration=drive.duration, rabi=drive.tones[0].rabi, nbar=g["nbar"])
    models = _noise_models(cfg)
    summary = Table("noise_fidelity", ("case", "mean", "std", "stderr", "p5", "p25",
                                       "p50", "p75", "p95", "trials"))
    for case in nz["cases"]:
        dist = gate_fidelity_mc(params, models, nz["trials"], seed=cfg["seed"], case=case)
        pc = dist.percentiles
        summary.add(case=case, mean=dist.mean, std=dist.std, stderr=dist.stderr,
                    p5=pc[5], p25=pc[25], p50=pc[50], p75=pc[75], p95=pc[95],
                    trials=dist.trials)
    coh = Table("noise_coherence", ("n_stages", "coherence", "stderr", "trials"))
    tweezer = [m for m in models if m.target == "tweezer_intensity"]
    if tweezer:
        for n_st in nz["dd_stages"]:
            sched = None if int(n_st) == 0 else dd_schedule(drive.duration, int(n_st))
            total = 2.0 * drive.duration
            # no-DD runs last as long as a decoupled sequence for a fair comparison
            res = control_coherence(tweezer[0], sched, chain.light_shift,
                                    nz["dd_trials"], seed=cfg["seed"],
                                    duration=total if sched is None else None)
            coh.add(n_stages=int(n_st), coherence=res.coherence, stderr=res.stderr,
                    trials=res.trials)
    return [summary, coh]


def run_scan(cfg):
    from dataclasses import replace
    chain = chain_from_config(cfg["chain"])
    sc = cfg["scan"]
    start, stop, count = sc["light_shift_hz"]
    shifts = np.linspace(float(start), float(stop), int(count))
    base = mode_spectrum(chain.with_tweezed(()))
    table = Table("scan", ("light_shift_hz", "beam_waist_um", "mode", "freq_hz",
                           "shift_hz"))
    for w in sc["beam_waists_um"]:
        for ls in shifts:
            spec = mode_spectrum(replace(chain, light_shift=TWO_PI * ls,
                                         beam_waist=float(w) * 1e-6))
            for m in sc["modes"]:
                if not 0 <= int(m) < chain.n_ions:
                    raise ConfigError("scan.modes index out of range")
                f = spec.frequencies[int(m)]
                table.add(light_shift_hz=float(ls), beam_waist_um=float(w), mode=int(m),
                          freq_hz=_hz(f), shift_hz=_hz(f - base.frequencies[int(m)]))
    return [table]


EXPERIMENT_RUNNERS = {"modes": run_modes, "gate": run_gate, "synth": run_synth,
                      "noise": run_noise, "scan": run_scan}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # report usage errors through the JSON error record instead of exiting
    def error(self, message):
        raise _ArgumentError(message)


def build_parser():
    parser = _Parser(
        prog="tweezergate",
        description="Tweezer-controlled trapped-ion gate simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENT_RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="YAML or JSON config (default: bundled paper.yaml)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry, e.g. gate.nbar=0.5")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--seed", type=int)
        p.add_argument("--verbose", action="store_true")
    return parser


def _fail(code, exc):
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("residual", "constraint"):
        val = getattr(exc, attr, None)
        if val is not None:
            record[attr] = val
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv=None):
    """Run the CLI and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        return _fail(EXIT_CONFIG, exc)
    except SystemExit as exc:        # --help / --version
        return EXIT_OK if not exc.code else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = [f"experiment={args.experiment}"] + list(args.overrides)
    if args.out is not None:
        overrides.append(f"output.dir={json.dumps(args.out)}")
    if args.format is not None:
        overrides.append(f"output.format={args.format}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    try:
        cfg = load_config(args.config or bundled_config_path(), overrides)
        log.info("running %s", args.experiment)
        tables = EXPERIMENT_RUNNERS[args.experiment](cfg)
    except (ConfigError, DomainError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, exc)
    except (NumericError, TweezerGateError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    metadata = {"tool": "tweezergate", "version": __version__,
                "experiment": args.experiment, "seed": cfg["seed"], "config": cfg}
    try:
        paths = emit(tables, cfg["output"]["dir"], cfg["output"]["format"], metadata)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    rows = sum(len(t.rows) for t in tables)
    print(f"{args.experiment}: wrote {len(paths)} files ({rows} rows) to "
          f"{cfg['output']['dir']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
