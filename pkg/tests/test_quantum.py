import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_strategy
from pardiqkd import entropy as en
from pardiqkd import games as g
from pardiqkd import quantum as qm


def test_bell_state_and_depolarize():
    rho = qm.bell_state()
    assert qm.is_density_matrix(rho)
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-14)
    # purity of (1-p) |phi+><phi+| + p 1/4 is (1-p)^2 + (2(1-p)p + p^2)/4 by hand
    for p, expect in ((0.1, 0.8575), (0.05, 0.926875)):
        mixed = qm.depolarize(rho, p)
        assert np.trace(mixed @ mixed).real == pytest.approx(expect, abs=1e-12)
    with pytest.raises(qm.QuantumError):
        qm.depolarize(rho, 1.2)


def test_optimal_chsh_value():
    game = g.chsh2_spec()
    assert qm.winning_probability(game, qm.optimal_chsh_strategy()) == pytest.approx(
        (2 + math.sqrt(2)) / 4, abs=1e-12)


def test_optimal_chsh_noisy_value():
    # depolarising with weight 2Q shrinks the CHSH bias by (1 - 2Q)
    q = 0.05
    w = qm.winning_probability(g.chsh2_spec(), qm.optimal_chsh_strategy(q))
    assert w == pytest.approx(0.5 + (1 - 2 * q) * math.sqrt(2) / 4, abs=1e-12)


def test_behaviour_is_normalised(rng):
    game = g.chsh3_anchored(0.1, 0.1)
    p = qm.behaviour(game, random_strategy(game, rng))
    assert np.allclose(p.sum(axis=(2, 3)), 1, atol=1e-12)
    assert p.min() > -1e-12


def test_behaviour_is_no_signalling(rng):
    game = g.chsh2_spec()
    p = qm.behaviour(game, random_strategy(game, rng))
    pa = p.sum(axis=3)
    assert np.allclose(pa[:, 0], pa[:, 1], atol=1e-12)


def test_strategy_dimension_checks():
    with pytest.raises(qm.QuantumError):
        qm.Strategy(np.eye(3) / 3, {}, {})
    game = g.chsh2_spec()
    s = qm.optimal_chsh_strategy()
    bad = qm.Strategy(s.state, {0: s.povms_a[0]}, s.povms_b)
    with pytest.raises(qm.QuantumError):
        qm.behaviour(game, bad)


def test_check_povm_rejects():
    with pytest.raises(qm.QuantumError):
        qm.check_povm(np.stack([np.eye(2), np.eye(2)]))
    assert qm.povm_deviation(qm.projective_povm(qm.SX)) < 1e-15


def test_deterministic_strategy_matches_classical_value():
    game = g.chsh2_spec()
    val, (fa, fb) = g.classical_value(game, return_strategy=True)
    assert qm.winning_probability(game, qm.deterministic_strategy(game, fa, fb)) == pytest.approx(val)


def test_von_neumann_matches_mpmath(rng):
    rho = random_density(4, rng)
    w = mp.eig(mp.matrix(rho.tolist()))[0]
    ref = -sum(float(mp.re(x)) * math.log2(float(mp.re(x))) for x in w)
    assert qm.von_neumann(rho) == pytest.approx(ref, abs=1e-10)


def test_partial_trace_of_product(rng):
    r1, r2 = random_density(2, rng), random_density(3, rng)
    prod = np.kron(r1, r2)
    assert np.allclose(qm.partial_trace(prod, (2, 3), [0]), r1)
    assert np.allclose(qm.partial_trace(prod, (2, 3), [1]), r2)


def test_purify_reproduces_state(rng):
    rho = random_density(4, rng, rank=2)
    psi = qm.purify(rho)
    assert np.allclose(psi @ psi.conj().T, rho, atol=1e-12)


def test_psd_inv_sqrt_on_support():
    op = np.diag([4.0, 1e-14, 0.25])
    inv, supp = qm.psd_inv_sqrt(op)
    assert np.allclose(inv, np.diag([0.5, 0.0, 2.0]))
    assert np.allclose(supp, np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(qm.QuantumError):
        qm.psd_sqrt(np.diag([1.0, -1.0]))


def test_entropy_pure_bell_is_maximal_given_eve():
    # a pure Bell pair leaves Eve uncorrelated: H(A|E X) = 1 per question
    game = g.chsh2_spec()
    assert qm.conditional_entropy_answer_given_eve(game, qm.optimal_chsh_strategy()) == pytest.approx(1.0, abs=1e-9)


def test_entropy_classical_is_zero():
    game = g.chsh2_spec()
    _, (fa, fb) = g.classical_value(game, return_strategy=True)
    assert qm.conditional_entropy_answer_given_eve(game, qm.deterministic_strategy(game, fa, fb)) == pytest.approx(0.0, abs=1e-12)


def test_honest_noise_model():
    nu, alpha, q = 0.05, 0.05, 0.03
    game = g.chsh3_anchored(nu, alpha)
    s = qm.honest_strategy(nu, alpha, q)
    assert qm.prob_disagree(game, s, 0, 2) == pytest.approx(q, abs=1e-12)
    # anchored win rate = 1 - (1-alpha)^2 nu (1 - w_chsh) with w_chsh from the depolarised value
    w_chsh = 0.5 + (1 - 2 * q) * math.sqrt(2) / 4
    w_3 = (1 - nu) * (1 - q) + nu * w_chsh
    assert qm.winning_probability(game, s) == pytest.approx(1 - (1 - alpha) ** 2 * (1 - w_3), abs=1e-12)


def test_honest_anchored_value_frozen():
    game = g.chsh3_anchored(0.1, 0.1)
    expect = 1 - 0.81 * 0.1 * (1 - math.cos(math.pi / 8) ** 2)
    assert expect == pytest.approx(0.98813782, abs=1e-8)
    assert qm.winning_probability(game, qm.honest_strategy(0.1, 0.1)) == pytest.approx(expect, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.01, 0.1), nu=st.floats(0.01, 0.1), q=st.floats(0.0, 0.1))
def test_answer_entropy_below_binary_bound(alpha, nu, q):
    game = g.chsh3_anchored(nu, alpha)
    s = qm.honest_strategy(nu, alpha, q)
    assert qm.conditional_entropy_a_given_b(game, s) <= en.binary_entropy(2 * alpha + nu + q) + 1e-12


def test_rotated_strategy_preserves_povm():
    s = qm.rotated_strategy(qm.optimal_chsh_strategy(), {0: 0.3}, {1: -0.2})
    s.validate()
    assert not np.allclose(s.povms_a[0], qm.optimal_chsh_strategy().povms_a[0])
