"""
Noise, gate fidelity and dynamical decoupling of the control qubit
==================================================================

Shot-to-shot drive-intensity and trap-frequency fluctuations limit the gate
fidelity. Separately, the tweezer light shift dephases the control qubit;
flipping it between gate and idle halves refocuses slow fluctuations.
"""

import numpy as np

from tweezergate import (GateParams, NoiseModel, control_coherence, dd_schedule,
                         gate_fidelity_mc)
from tweezergate.constants import TWO_PI

params = GateParams.paper()
channels = [NoiseModel("quasi_static_gaussian", "drive_intensity", 0.03),
            NoiseModel("quasi_static_gaussian", "trap_freq", TWO_PI * 100)]

# %%
# Monte-Carlo fidelity for both control states.
for case in ("D", "S"):
    dist = gate_fidelity_mc(params, channels, trials=10_000, seed=0, case=case)
    print(f"F_{case} = {dist.mean:.4f} +- {dist.stderr:.4f} "
          f"(5th-95th percentile {dist.percentiles[5]:.3f}-{dist.percentiles[95]:.3f})")

# %%
# Control-qubit coherence under slow Ornstein-Uhlenbeck tweezer-intensity
# noise. More drive/idle stages sample the fluctuation more finely.
light_shift = TWO_PI * 10.4e6
ou = NoiseModel("ornstein_uhlenbeck", "tweezer_intensity", 3e-4,
                correlation_time=100 * params.duration)
bare = control_coherence(ou, None, light_shift, trials=2000, seed=1,
                         duration=2 * params.duration)
print(f"no DD: W = {bare.coherence:.3f}")
for n in (1, 2, 4, 8, 16):
    res = control_coherence(ou, dd_schedule(params.duration, n), light_shift,
                            trials=2000, seed=1)
    print(f"N = {n:2d}: W = {res.coherence:.3f} +- {res.stderr:.3f}")
