"""
Checking the parallel-repetition identities
===========================================

For two rounds played in parallel, the conditioned states built from the
square-root measurement construction are compared with brute-force enumeration.
"""

import numpy as np

from pardiqkd import games as g
from pardiqkd import parrep as pr

# %%
# A random two-round strategy for anchored 3CHSH: a pure state on E_A E_B E and
# one POVM for every pair of questions.
game = g.chsh3_anchored(0.1, 0.1)
s = pr.random_parallel_strategy(game, 2, np.random.default_rng(0))
print("dims:", s.dims, " POVM deviation:", f"{s.povm_deviation():.1e}")

# %%
# Fix C = {round 1}, i = round 0, questions and answers on C. The Phi-state norm
# equals the conditional probability of the answers on C.
r = pr.DependencyBreaker(2, (1,), 0, (), (0,), (2,), (1,), (1,))
phi, norm = pr.phi_state(s, r, 0, 2)
print("||Phi||^2 =", round(norm**2, 12), " deviation:", f"{pr.norm_identity_deviation(s, r, 0, 2):.1e}")
print("conditioned-state distance:", f"{pr.verify_conditioned_state_identity(s, r, 0, 2):.1e}")

# %%
# Every case at once, then the Markov chain and the theta-rho distance.
rep = pr.verify_identities(s)
print(rep)
print("Markov CMI:", f"{pr.markov_cmi(s):.1e}")
print("theta-rho distance, generic:", round(pr.theta_rho_distance(s, (0,)), 4))
prod = pr.random_parallel_strategy(game, 2, np.random.default_rng(0), "product")
print("theta-rho distance, product:", f"{pr.theta_rho_distance(prod, (0,)):.1e}")
