import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pardiqkd import entropy as en

TSIRELSON = (2 + math.sqrt(2)) / 4


def h_ref(p):
    p = mp.mpf(p)
    if p in (0, 1):
        return mp.mpf(0)
    return -p * mp.log(p, 2) - (1 - p) * mp.log(1 - p, 2)


def f_ref(x):
    x = mp.mpf(x)
    return 1 - h_ref(mp.mpf(1) / 2 + mp.sqrt(max(3 - 16 * x * (1 - x), 0)) / 2)


@pytest.mark.parametrize("p", [0.0, 0.006, 0.2, 0.3, 0.5, 0.77, 1.0])
def test_binary_entropy_matches_mpmath(p):
    assert en.binary_entropy(p) == pytest.approx(float(h_ref(p)), abs=1e-14)


def test_binary_entropy_frozen():
    assert en.binary_entropy(0.006) == pytest.approx(0.05291508, abs=1e-8)
    assert 10_000 * en.binary_entropy(0.006) == pytest.approx(529.15, abs=0.01)
    assert en.binary_entropy(0.3) == pytest.approx(0.8812909, abs=1e-7)
    assert en.binary_entropy(0.2) == pytest.approx(0.7219281, abs=1e-7)
    with pytest.raises(en.BoundError):
        en.binary_entropy(1.5)


def test_capital_f_endpoints():
    assert en.capital_f(0.75) == pytest.approx(0.0, abs=1e-9)
    assert en.capital_f(TSIRELSON) == pytest.approx(1.0, abs=1e-9)
    assert en.capital_f(0.85) == pytest.approx(0.91853, abs=1e-5)
    with pytest.raises(en.BoundError):
        en.capital_f(0.7)
    with pytest.raises(en.BoundError):
        en.capital_f(0.9)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0.75, TSIRELSON))
def test_capital_f_matches_mpmath(x):
    assert en.capital_f(x) == pytest.approx(float(f_ref(x)), abs=1e-12)


def test_capital_f_derivative_matches_central_difference():
    for x in np.linspace(0.751, TSIRELSON - 1e-3, 40):
        hstep = 1e-6
        num = (en.capital_f(x + hstep) - en.capital_f(x - hstep)) / (2 * hstep)
        assert en.capital_f_prime(x) == pytest.approx(num, rel=1e-5, abs=1e-6)
    # log divergence at the Tsirelson point; floats land one ulp short of it
    assert en.capital_f_prime(TSIRELSON - 1e-9) > en.capital_f_prime(TSIRELSON - 1e-6) > 10


def test_g_map_and_window():
    alpha, nu = 0.05, 0.05
    lo, hi = en.omega_window(alpha, nu)
    assert en.g_alpha_nu(lo, alpha, nu) == pytest.approx(0.75, abs=1e-12)
    assert en.g_alpha_nu(hi, alpha, nu) == pytest.approx(TSIRELSON, abs=1e-12)
    w = en.omega_from_g(0.84, 1e-3, 1e-3)
    assert w == pytest.approx(0.99984032, abs=1e-8)
    assert en.g_alpha_nu(w, 1e-3, 1e-3) == pytest.approx(0.84, abs=1e-12)


def test_single_round_bound():
    alpha, nu = 0.05, 0.05
    w = en.omega_from_g(0.84, alpha, nu)
    assert en.single_round_bound(w, alpha, nu) == pytest.approx(0.95 * float(f_ref(0.84)), abs=1e-12)
    with pytest.raises(en.BoundError):
        en.single_round_bound(0.99941942, alpha, nu)  # outside the window at these parameters


def test_tradeoff_piecewise():
    alpha, nu, gamma = 0.05, 0.05, 0.5
    lo, hi = en.omega_window(alpha, nu)
    assert en.tradeoff_f(gamma * (lo - 1e-3), alpha, nu, gamma) == 0.0
    assert en.tradeoff_f(gamma * hi, alpha, nu, gamma) == pytest.approx(1 - alpha, abs=1e-9)
    with pytest.raises(en.BoundError):
        en.tradeoff_f(0.5, alpha, nu, 1.0)


def test_affine_tradeoff_is_tangent_and_below():
    alpha, nu, gamma = 0.05, 0.05, 0.5
    lo, hi = en.omega_window(alpha, nu)
    th = (lo + hi) / 2
    aff = en.affine_min_tradeoff(alpha, nu, gamma, th)
    assert aff(gamma * th) == pytest.approx(en.tradeoff_f(gamma * th, alpha, nu, gamma), abs=1e-12)
    for w in np.linspace(lo, hi, 50):
        x = gamma * w
        assert float(aff(x)) <= en.tradeoff_f(x, alpha, nu, gamma) + 1e-12
    with pytest.raises(en.BoundError):
        en.affine_min_tradeoff(alpha, nu, gamma, hi)


def test_mu_formulas():
    # theorem form evaluated by hand at eps = 1e-8, |A||B| = 4
    e = 1e-8
    ref = ((8 * math.sqrt(e) + 2 * e) / (1 - e**2 / 16) * math.log2(4 / e)) ** (1 / 3)
    assert en.mu_of_eps(e, 2, 2) == pytest.approx(ref, rel=1e-14)
    assert en.mu_of_eps(e, 2, 2) == pytest.approx(0.283812, abs=1e-6)
    app = (4 * (4 * math.sqrt(e) + e) * math.log2(96 / e)) ** (1 / 3)
    assert en.mu_of_eps_application(e, 96) == pytest.approx(app, rel=1e-14)
    assert en.mu_prime(0.01, 1.0) == pytest.approx(0.2)
    with pytest.raises(en.BoundError):
        en.mu_of_eps(0.0, 2, 2)
    with pytest.raises(en.BoundError):
        en.mu_prime(0.1, 0.0)


def test_g1_g2():
    assert en.g2(0.0) == 0.0
    assert en.g2(0.5) == pytest.approx(0.5 + 1.5 * math.log2(1.5), abs=1e-14)
    assert en.g1(0.6, 0.5) == pytest.approx(-math.log2(0.2) - math.log2(0.75), abs=1e-14)


def test_eat_bound_termwise():
    p = en.EatParams(10**9, 2, 2, 1e-12, 0.1, 1.0, 0.5, 3.0)
    mu, mup = p.mu, p.mu_prime
    V = math.log2(5) + 6
    lin = p.n_rounds * (0.5 - V * (3 * math.sqrt(mu) + 4e-12) - en.g2(2e-12))
    over = V / math.sqrt(mu) * (2 * math.log2(1 / (1 - mu)) + 2 / mu**2 + 2 * math.log2(1 / (1 - mu**2))
                                + en.g1(0.1, mup))
    assert en.eat_lower_bound(p) == pytest.approx(lin - over, rel=1e-12)


def test_eat_infeasible():
    with pytest.raises(en.BoundError):
        en.eat_lower_bound(en.EatParams(100, 2, 2, 1e-3, 0.5, 1.0, 0.5, 1.0))


def test_leakage_terms():
    t, nu, alpha, d1 = 1000, 0.001, 0.001, 0.001
    assert en.hmax_b_given_a(t, nu, alpha, d1) == pytest.approx(t * float(h_ref(0.006)), rel=1e-13)
    assert en.leak_ir(t, nu, alpha, d1, 1.0) == pytest.approx(en.hmax_b_given_a(t, nu, alpha, d1) + 1)
    assert en.test_leak(1000, 0.25) == 500.0
    with pytest.raises(en.BoundError):
        en.hmax_b_given_a(t, 0.3, 0.2, 0.1)


def test_pa_output_length():
    assert en.pa_output_length(529.3, 1e-6) == 489
    assert en.pa_output_length(10.0, 1e-6) == 0
    with pytest.raises(en.BoundError):
        en.pa_output_length(100, 1.0)


def test_bound_constants_validation():
    with pytest.raises(en.BoundError):
        en.BoundConstants(c_eps=-1)
    with pytest.raises(en.BoundError):
        en.BoundConstants(c_mu_term=math.inf)
