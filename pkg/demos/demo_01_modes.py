"""
Normal modes of a tweezed three-ion chain
=========================================

A tightly focused tweezer on the centre ion adds local confinement when that
ion is in ``|S>``. The axial modes it couples to shift, and the shift is what
later makes the entangling gate conditional.
"""

import numpy as np

from tweezergate import conditional_spectrum, mode_spectrum, paper_chain
from tweezergate.constants import TWO_PI

# %%
# Without the tweezer the secular eigenvalues are the textbook (1, 3, 29/5).
bare = mode_spectrum(paper_chain(tweezer_flags=(False, False, False)))
print("eigenvalues:", np.round(bare.eigenvalues, 12))
print("frequencies [kHz]:", np.round(bare.frequencies / TWO_PI / 1e3, 2))

# %%
# Switching on 10.4 MHz of light shift with a 1 um waist moves the modes in
# which the centre ion participates. The antisymmetric mode, where the
# centre ion sits still, is untouched.
chain = paper_chain()
tweezed = mode_spectrum(chain)
shift = (tweezed.frequencies - bare.frequencies) / TWO_PI
for m, s in enumerate(shift):
    print(f"mode {m}: shift {s:9.2f} Hz")

# %%
# The gate mode is the third one. Its frequency conditioned on the control
# qubit state is the ladder the pulse designer has to target.
cond = conditional_spectrum(chain, gate_mode=2)
for k, f in cond.conditional_freqs:
    print(f"k={k}: {f / TWO_PI / 1e3:.3f} kHz")

# %%
# Lamb-Dicke parameters of the outer ions on the gate mode, for a 729 nm drive.
print("eta (outer ions, mode 3):", np.round(bare.lamb_dicke[2, [0, 2]], 5))
