"""Scalar entropy functions and finite-size bound terms used by the security analysis.

All logarithms are base 2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

CHSH_CLASSICAL = 0.75
CHSH_QUANTUM = (2 + math.sqrt(2)) / 4
DOMAIN_TOL = 1e-12


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundConstants:
    """Stand-ins for the unspecified constants hidden in O(.) terms.

    c_eps scales the approximation parameter eps = c_eps * delta**(1/16) / alpha**3,
    c_mu_term multiplies the sqrt(mu)/(nu*gamma) loss, and c_additive is the single
    additive O(1) charge in bits.
    """

    c_eps: float = 1.0
    c_mu_term: float = 1.0
    c_additive: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (v >= 0 and math.isfinite(v)):
                raise BoundError(f"{k} must be a finite nonnegative number, got {v}")


# --------------------------------------------------------------------------- binary entropy & F


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise BoundError(f"binary entropy needs p in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _check_f_domain(x: float) -> float:
    if x < CHSH_CLASSICAL - DOMAIN_TOL or x > CHSH_QUANTUM + DOMAIN_TOL:
        raise BoundError(f"F is defined on [3/4, (2+sqrt2)/4], got {x}")
    return min(max(x, CHSH_CLASSICAL), CHSH_QUANTUM)


def _f_inner(x: float) -> float:
    return max(3.0 - 16.0 * x * (1.0 - x), 0.0)


def capital_f(x: float) -> float:
    """1 - h(1/2 + sqrt(3 - 16 x (1 - x)) / 2) for a CHSH winning probability x."""
    x = _check_f_domain(x)
    return 1.0 - binary_entropy(min(0.5 + 0.5 * math.sqrt(_f_inner(x)), 1.0))


def capital_f_prime(x: float) -> float:
    """dF/dx; finite at 3/4, diverges at the Tsirelson endpoint."""
    x = _check_f_domain(x)
    s = _f_inner(x)
    if s == 0.0:
        return 2.0 * (8 * x - 4) / math.log(2)
    u = 0.5 + 0.5 * math.sqrt(s)
    if u >= 1.0:
        return math.inf
    return math.log2(u / (1 - u)) * (8 * x - 4) / math.sqrt(s)


# --------------------------------------------------------------------------- anchored 3CHSH map


def g_alpha_nu(omega: float, alpha: float, nu: float) -> float:
    """Effective CHSH winning probability 1 - (1 - omega) / (nu (1 - alpha)^2)."""
    denom = nu * (1 - alpha) ** 2
    if denom <= 0:
        raise BoundError("nu (1 - alpha)^2 must be positive")
    return 1.0 - (1.0 - omega) / denom


def omega_from_g(g: float, alpha: float, nu: float) -> float:
    return 1.0 - (1.0 - g) * nu * (1 - alpha) ** 2


def omega_window(alpha: float, nu: float) -> tuple[float, float]:
    """Admissible winning probabilities (omega_min, omega_max) of the anchored 3CHSH game."""
    k = (1 - alpha) ** 2 * nu
    return 1 - k / 4, 1 - (2 - math.sqrt(2)) / 4 * k


def single_round_bound(omega: float, alpha: float, nu: float) -> float:
    lo, hi = omega_window(alpha, nu)
    if omega < lo - DOMAIN_TOL or omega > hi + DOMAIN_TOL:
        raise BoundError(f"omega={omega} outside admissible window [{lo}, {hi}]")
    return (1 - alpha) * capital_f(g_alpha_nu(omega, alpha, nu))


def tradeoff_f(x: float, alpha: float, nu: float, gamma: float) -> float:
    """Piecewise min-tradeoff F_{alpha,nu}(x): the single-round bound at x/gamma, 0 off-window."""
    if not 0 < gamma < 1:
        raise BoundError("gamma must lie in (0, 1)")
    lo, hi = omega_window(alpha, nu)
    w = x / gamma
    if lo - DOMAIN_TOL <= w <= hi + DOMAIN_TOL:
        return (1 - alpha) * capital_f(g_alpha_nu(min(max(w, lo), hi), alpha, nu))
    return 0.0


def tradeoff_f_prime(x: float, alpha: float, nu: float, gamma: float) -> float:
    lo, hi = omega_window(alpha, nu)
    w = x / gamma
    if not lo < w < hi:
        raise BoundError("derivative only taken in the window interior")
    return capital_f_prime(g_alpha_nu(w, alpha, nu)) / (nu * gamma * (1 - alpha))


@dataclass(frozen=True)
class AffineTradeoff:
    intercept: float
    slope: float
    grad_bound: float
    point: float

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def affine_min_tradeoff(alpha: float, nu: float, gamma: float, omega_th: float) -> AffineTradeoff:
    """Tangent line of F_{alpha,nu} at gamma * omega_th."""
    lo, hi = omega_window(alpha, nu)
    if not lo < omega_th < hi:
        raise BoundError(f"omega_th={omega_th} must lie strictly inside ({lo}, {hi})")
    x0 = gamma * omega_th
    f0 = tradeoff_f(x0, alpha, nu, gamma)
    slope = tradeoff_f_prime(x0, alpha, nu, gamma)
    return AffineTradeoff(f0 - slope * x0, slope, abs(slope), x0)


# --------------------------------------------------------------------------- approximate EAT


def g1(x: float, y: float) -> float:
    return -math.log2(1 - math.sqrt(1 - x * x)) - math.log2(1 - y * y)


def g2(x: float) -> float:
    if x == 0:
        return 0.0
    return x * math.log2(1 / x) + (1 + x) * math.log2(1 + x)


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise BoundError(f"eps must lie in (0, 1), got {eps}")


def mu_of_eps(eps: float, dim_a: int, dim_b: int) -> float:
    """mu as stated in the approximate-EAT theorem."""
    _check_eps(eps)
    if dim_a < 2 or dim_b < 2:
        raise BoundError("register dimensions must be at least 2")
    ab = dim_a * dim_b
    return ((8 * math.sqrt(eps) + 2 * eps) / (1 - eps**2 / ab**2) * math.log2(ab / eps)) ** (1 / 3)


def mu_of_eps_application(eps: float, alphabet_product: int) -> float:
    """mu as used for the protocol, with |A||B||X||Y||T| collected in ``alphabet_product``."""
    _check_eps(eps)
    if alphabet_product < 2:
        raise BoundError("alphabet product must be at least 2")
    return (4 * (4 * math.sqrt(eps) + eps) * math.log2(alphabet_product / eps)) ** (1 / 3)


def mu_prime(mu: float, p_omega: float) -> float:
    if not 0 < p_omega <= 1:
        raise BoundError("P(Omega) must lie in (0, 1]")
    return 2 * math.sqrt(mu / p_omega)


def v_constant(dim_a: int, grad_bound: float) -> float:
    return math.log2(1 + 2 * dim_a) + 2 * math.ceil(grad_bound)


@dataclass(frozen=True)
class EatParams:
    n_rounds: int
    dim_a: int
    dim_b: int
    eps: float
    eps_prime: float
    p_omega: float
    tradeoff_h: float
    grad_bound: float

    def __post_init__(self):
        _check_eps(self.eps)
        if self.n_rounds < 1:
            raise BoundError("n_rounds must be positive")
        if not 0 < self.eps_prime < 1:
            raise BoundError("eps_prime must lie in (0, 1)")
        if not 0 < self.p_omega <= 1:
            raise BoundError("P(Omega) must lie in (0, 1]")
        if self.grad_bound < 0:
            raise BoundError("grad_bound must be nonnegative")

    @property
    def mu(self) -> float:
        return mu_of_eps(self.eps, self.dim_a, self.dim_b)

    @property
    def mu_prime(self) -> float:
        return mu_prime(self.mu, self.p_omega)


def eat_lower_bound(p: EatParams) -> float:
    """Right-hand side of the unstructured approximate EAT with testing, term by term."""
    mu = p.mu
    mup = p.mu_prime
    if p.p_omega <= mu:
        raise BoundError(f"P(Omega)={p.p_omega} must exceed mu={mu}")
    if mup + p.eps_prime >= 1:
        raise BoundError(f"mu' + eps' = {mup + p.eps_prime} must be < 1")
    V = v_constant(p.dim_a, p.grad_bound)
    linear = p.n_rounds * (p.tradeoff_h - V * (3 * math.sqrt(mu) + 4 * p.eps) - g2(2 * p.eps))
    overhead = (V / math.sqrt(mu)) * (2 * math.log2(1 / (p.p_omega - mu)) + 2 / mu**2
                                      + 2 * math.log2(1 / (1 - mu**2)) + g1(p.eps_prime, mup))
    return linear - overhead


# --------------------------------------------------------------------------- leakage and PA


def _check_rates(*vals) -> None:
    for v in vals:
        if not 0 <= v <= 1:
            raise BoundError(f"parameter {v} outside [0, 1]")


def hmax_b_given_a(t: int, nu: float, alpha: float, delta1: float) -> float:
    """Upper bound t h(2(nu + alpha + delta1)) on H_max of Bob's raw key given Alice's."""
    _check_rates(nu, alpha, delta1)
    e = 2 * (nu + alpha + delta1)
    if e > 1:
        raise BoundError("2(nu + alpha + delta1) exceeds 1")
    return t * binary_entropy(e)


def leak_ir(t: int, nu: float, alpha: float, delta1: float, c_additive: float = 0.0) -> float:
    return hmax_b_given_a(t, nu, alpha, delta1) + c_additive


def test_leak(t: int, gamma: float, dim_a: int = 2) -> float:
    _check_rates(gamma)
    return 2 * gamma * t * math.log2(dim_a)


def pa_output_length(hmin_bound: float, eps_pa: float) -> int:
    if not 0 < eps_pa < 1:
        raise BoundError("eps_pa must lie in (0, 1)")
    return max(0, math.floor(hmin_bound - 2 * math.log2(1 / eps_pa)))
