"""
Finite-size key length and its scaling
======================================

Assembles the key length term by term. Shows why a positive key needs an
astronomically small delta, and how the security level couples to the rate.
"""

from pardiqkd import entropy as en
from pardiqkd import keyrate as kr
from pardiqkd.entropy import BoundConstants
from pardiqkd.params import ProtocolParams

# %%
# The regime quoted for the protocol: alpha = gamma = nu = delta1 = 1e-3 and a
# threshold with g = 0.84. The per-raw-bit prefactor leaves about 0.65.
a = nu = gamma = d1 = 1e-3
print("F(0.84) =", round(en.capital_f(0.84), 4))
print("prefactor =", round(kr.prefactor(a, nu, gamma, d1, 0.84), 4))
print("combined loss =", round(kr.combined_loss(a, nu, gamma, d1, 0.84), 4))

# %%
# With all hidden constants switched off, the key length is the prefactor
# times t, minus the privacy-amplification penalty.
w_th = en.omega_from_g(0.84, a, nu)
p = ProtocolParams(n=10**6, delta=0.1, alpha=a, nu=nu, gamma=gamma, omega_th=w_th, delta1=d1)
r = kr.finite_size_key_length(p, BoundConstants(0, 0, 0))
print(f"t={r.t} key={r.key_length} rate={r.rate:.5f}")

# %%
# With unit constants the approximation error eps = delta^(1/16) / alpha^3 is
# huge unless delta is tiny. Sweep delta to see mu' and the rate move together.
for k in (100, 200, 300):
    delta = 10.0 ** -k
    p = ProtocolParams(n=10 ** (k + 6), delta=delta, alpha=a, nu=nu, gamma=gamma,
                       omega_th=w_th, delta1=d1)
    try:
        r = kr.finite_size_key_length(p)
        print(f"delta=1e-{k}: eps={r.eps:.2e} mu'={r.mu_prime:.3f} "
              f"security={r.security_eps:.3f} rate={r.rate:.3e}")
    except kr.InfeasibleError as e:
        print(f"delta=1e-{k}: infeasible ({e})")

# %%
# The security level scales like delta^(1/192); the fitted slope shows it.
slope = kr.scaling_exponent_fit()
print(f"d log mu' / d log delta = {slope:.5f}  (1/192 = {1 / 192:.5f})")
print(f"d log mu / d log eps = {kr.mu_eps_slope():.4f}  (1/6 = {1 / 6:.4f})")
