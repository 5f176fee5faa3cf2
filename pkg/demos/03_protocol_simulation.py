"""
Simulating the protocol at desk scale
=====================================

Runs the protocol with honest i.i.d. devices, looks at the abort statistic and
the raw-key error, and pushes one run through reconciliation and hashing.
"""

import numpy as np

from pardiqkd import postproc as pp
from pardiqkd import protocol as pc
from pardiqkd.params import ProtocolParams

# %%
# One run with the default threshold at the window midpoint.
params = ProtocolParams(n=10_000, delta=0.1, alpha=0.05, nu=0.05, gamma=0.5, rng_seed=0)
tr = pc.run(params, postprocess=False)
print(f"t={tr.t}  |S|={tr.s.size}  wins on S={tr.win_count_on_s}  "
      f"threshold={tr.threshold:.1f}  aborted={tr.aborted}")

# %%
# The threshold is gamma * w_th * t, but |S| itself fluctuates around gamma * t.
# Near the midpoint that fluctuation dominates, so honest runs abort often.
trs = pc.run_trials(params, 100, postprocess=False)
print("abort rate:", np.mean([t.aborted for t in trs]))
print("win fraction on S:", round(pc.win_fraction_on_s(trs), 5))

# %%
# Raw-key disagreement for noisy devices.
noisy = ProtocolParams(n=10_000, delta=0.1, alpha=0.01, nu=0.01, gamma=0.5, q_noise=0.03)
errs = [pc.relative_error_on_j(t) for t in pc.run_trials(noisy, 20, postprocess=False)
        if not t.aborted]
print("mean raw-key error:", round(float(np.mean(errs)), 4))

# %%
# Post-processing on a short key: one flipped bit, syndrome reconciliation,
# tag validation, then Toeplitz hashing on both sides.
rng = np.random.default_rng(3)
a = tr.raw_key_a[:16]
b = a.copy()
b[7] ^= 1
ir = pp.ir_reconcile(a, b, 16, rng)
print("validated:", ir.validated, "flips:", ir.flips, "leak:", ir.leak_bits)
pa = pp.privacy_amplify(a, 140.0 - ir.leak_bits, 1e-6, rng)
print("Alice:", pp.bits_to_hex(pa.key), " Bob:", pp.bits_to_hex(pp.toeplitz_apply(pa.hash, ir.b_corrected)))
