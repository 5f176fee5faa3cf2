"""
Single-round entropy of anchored 3CHSH
======================================

Walks from the CHSH score to the per-round entropy bound that feeds the
key-rate calculation, then checks the bound against exact quantum strategies.
"""

import numpy as np

from pardiqkd import entropy as en
from pardiqkd import games as g
from pardiqkd import quantum as qm

# %%
# The anchored game. Each question is replaced by the anchor symbol with
# probability alpha; rounds holding an anchor are won automatically.
alpha, nu = 0.05, 0.05
game = g.chsh3_anchored(nu, alpha)
print("questions:", game.questions_a, game.questions_b)
print("classical value:", g.classical_value(game))

# %%
# Honest devices share a Bell pair. Their score sits at the top of the
# admissible window, and depolarising noise pushes it down.
lo, hi = en.omega_window(alpha, nu)
print(f"window: [{lo:.6f}, {hi:.6f}]")
for q in (0.0, 0.01, 0.02):
    w = qm.winning_probability(game, qm.honest_strategy(nu, alpha, q))
    print(f"Q={q:.2f}  win={w:.6f}  g={en.g_alpha_nu(w, alpha, nu):.4f}")

# %%
# Map the score through g and F to get a bound on H(A|XE).
for w in np.linspace(lo, hi, 6):
    print(f"w={w:.6f}  bound={en.single_round_bound(w, alpha, nu):.4f}")

# %%
# Compare with the exact entropy of a few rotated honest strategies.
rng = np.random.default_rng(1)
for _ in range(5):
    s = qm.rotated_strategy(qm.honest_strategy(nu, alpha, 0.01),
                            {0: rng.normal(0, 0.05)}, {1: rng.normal(0, 0.05)})
    w = qm.winning_probability(game, s)
    if lo <= w <= hi:
        h = qm.conditional_entropy_answer_given_eve(game, s)
        print(f"w={w:.6f}  H(A|XE)={h:.4f}  >=  {en.single_round_bound(w, alpha, nu):.4f}")

# %%
# The tangent at gamma * w_th is the affine min-tradeoff function.
gamma = 0.5
tan = en.affine_min_tradeoff(alpha, nu, gamma, (lo + hi) / 2)
print(f"tangent slope {tan.slope:.2f}, intercept {tan.intercept:.2f}")
