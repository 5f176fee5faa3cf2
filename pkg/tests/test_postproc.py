import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pardiqkd import entropy as en
from pardiqkd import postproc as pp


def test_hex_roundtrip():
    bits = np.array([1, 0, 1, 1, 0, 0, 0, 1, 1], dtype=np.uint8)
    assert pp.bits_to_hex(bits) == "b180"
    assert np.array_equal(pp.hex_to_bits("b180", 9), bits)
    assert pp.bits_to_hex([]) == ""
    with pytest.raises(pp.PostprocError):
        pp.as_bits([0, 2])


def test_toeplitz_structure():
    seed = np.array([1, 0, 0, 1, 1, 0], dtype=np.uint8)  # rows + cols - 1 = 6
    h = pp.ToeplitzHash(3, 4, seed)
    m = h.matrix()
    # constant along diagonals, first row read from the seed by hand
    assert m[0].tolist() == [seed[3], seed[2], seed[1], seed[0]]
    for i, j in itertools.product(range(1, 3), range(1, 4)):
        assert m[i, j] == m[i - 1, j - 1]
    with pytest.raises(pp.PostprocError):
        pp.ToeplitzHash(3, 4, seed[:5])


def test_toeplitz_apply_matches_matrix_product(rng):
    h = pp.ToeplitzHash.random(5, 9, rng)
    x = rng.integers(0, 2, 9, dtype=np.uint8)
    ref = [sum(int(h.matrix()[i, j]) * int(x[j]) for j in range(9)) % 2 for i in range(5)]
    assert pp.toeplitz_apply(h, x).tolist() == ref
    with pytest.raises(pp.PostprocError):
        pp.toeplitz_apply(h, x[:8])


def test_toeplitz_two_universal_exhaustive():
    p = pp.collision_probabilities(4, 8)
    off = p[~np.eye(p.shape[0], dtype=bool)]
    assert off.max() <= 2.0**-4 + 1e-15
    # Toeplitz over GF(2) is exactly universal: every distinct pair collides w.p. 2^-rows
    assert np.allclose(off, 2.0**-4)


def test_ir_message_bytes_roundtrip(rng):
    msg = pp.IrMessage(rng.integers(0, 2, 13, dtype=np.uint8), rng.integers(0, 2, 64, dtype=np.uint8),
                       rng.integers(0, 2, 100, dtype=np.uint8))
    back = pp.IrMessage.from_bytes(msg.to_bytes())
    for f in ("syndrome", "tag", "code_seed"):
        assert np.array_equal(getattr(back, f), getattr(msg, f))
    assert msg.to_bytes()[:4] == (13).to_bytes(4, "big")
    with pytest.raises(pp.PostprocError):
        pp.IrMessage.from_bytes(msg.to_bytes()[:-1])
    with pytest.raises(pp.PostprocError):
        pp.IrMessage.from_bytes(msg.to_bytes() + b"\0")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), flips=st.integers(0, 2))
def test_ir_corrects_few_flips_with_generous_budget(seed, flips):
    rng = np.random.default_rng(seed)
    t = 16
    a = rng.integers(0, 2, t, dtype=np.uint8)
    b = a.copy()
    b[rng.choice(t, flips, replace=False)] ^= 1
    res = pp.ir_reconcile(a, b, 16, rng)
    # a validated result is always correct
    if res.validated:
        assert np.array_equal(res.b_corrected, a)
    # distinct nonzero columns make every single flip uniquely decodable
    h = res.message.code_seed[: 16 * t].reshape(16, t)
    cols = {tuple(h[:, j]) for j in range(t)}
    if flips <= 1 and len(cols) == t and (0,) * 16 not in cols:
        assert res.validated and res.flips == flips
    assert res.leak_bits == 16 + pp.TAG_BITS


def test_ir_single_flip_every_position(rng):
    t = 12
    a = rng.integers(0, 2, t, dtype=np.uint8)
    for pos in range(t):
        b = a.copy()
        b[pos] ^= 1
        for k in range(5):
            res = pp.ir_reconcile(a, b, t, np.random.default_rng([pos, k]))
            h = res.message.code_seed[: t * t].reshape(t, t)
            if len({tuple(h[:, j]) for j in range(t)}) == t and h.any(axis=0).all():
                assert res.validated and np.array_equal(res.b_corrected, a)


def test_ir_budget_zero_fails_validation_on_mismatch(rng):
    a = np.zeros(16, dtype=np.uint8)
    b = a.copy()
    b[3] = 1
    res = pp.ir_reconcile(a, b, 0, rng)
    assert not res.validated
    assert res.leak_bits == pp.TAG_BITS


def test_ir_equal_keys_budget_zero_validates(rng):
    a = rng.integers(0, 2, 16, dtype=np.uint8)
    res = pp.ir_reconcile(a, a.copy(), 0, rng)
    assert res.validated and res.flips == 0


def test_ir_bounded_decoder(rng):
    t = 40
    a = rng.integers(0, 2, t, dtype=np.uint8)
    b = a.copy()
    b[[5, 31]] ^= 1
    res = pp.ir_reconcile(a, b, 30, rng, radius=3)
    assert res.validated and res.flips == 2
    assert np.array_equal(res.b_corrected, a)
    with pytest.raises(pp.PostprocError):
        pp.ir_reconcile(a, b, 30, rng)


def test_ir_input_checks(rng):
    with pytest.raises(pp.PostprocError):
        pp.ir_reconcile(np.zeros(4, np.uint8), np.zeros(5, np.uint8), 1, rng)
    with pytest.raises(pp.PostprocError):
        pp.ir_reconcile(np.zeros(4, np.uint8), np.zeros(4, np.uint8), -1, rng)


def test_bounded_radius():
    assert pp.bounded_radius(333, 0.01, 0.02, 0.03) == 40 + 2  # 2 * 0.06 * 333 = 39.96


def test_privacy_amplify_length(rng):
    raw = rng.integers(0, 2, 600, dtype=np.uint8)
    res = pp.privacy_amplify(raw, 529.3, 1e-6, rng)
    assert res.key.size == en.pa_output_length(529.3, 1e-6) == 489
    assert res.hash.rows == 489 and res.hash.cols == 600
    empty = pp.privacy_amplify(raw, 10.0, 1e-6, rng)
    assert empty.key.size == 0 and empty.hash is None


def test_min_entropy_classical():
    p = np.array([[0.5, 0.0], [0.25, 0.25]])
    assert pp.min_entropy_classical(p) == pytest.approx(-math.log2(0.75))


def _lhl_oracle(p_ae, ell):
    """Independent evaluation of the hashed-key distance by looping over seeds and inputs."""
    n_a, n_e = p_ae.shape
    m = int(math.log2(n_a))
    total = 0.0
    seeds = list(itertools.product((0, 1), repeat=m + ell - 1))
    for s in seeds:
        h = pp.ToeplitzHash(ell, m, np.array(s, dtype=np.uint8))
        pz = np.zeros((2**ell, n_e))
        for a in range(n_a):
            bits = [(a >> (m - 1 - k)) & 1 for k in range(m)]
            z = int("".join(map(str, pp.toeplitz_apply(h, bits))), 2)
            pz[z] += p_ae[a]
        total += 0.5 * np.abs(pz - p_ae.sum(axis=0) / 2**ell).sum()
    return total / len(seeds)


def test_leftover_hash_matches_loop_oracle(rng):
    p = rng.random((16, 3))
    p /= p.sum()
    res = pp.leftover_hash_exact_test(p, 2)
    assert res.distance == pytest.approx(_lhl_oracle(p, 2), abs=1e-14)
    assert res.holds


def test_leftover_hash_uniform_source_within_bound():
    p = np.full((16, 1), 1 / 16)
    res = pp.leftover_hash_exact_test(p, 4)
    # singular Toeplitz matrices leave some distance, but the seed average meets the bound of 1
    assert res.hmin == pytest.approx(4.0)
    assert res.holds


def test_leftover_hash_input_checks():
    with pytest.raises(pp.PostprocError):
        pp.leftover_hash_exact_test(np.full((3, 1), 1 / 3), 1)
    with pytest.raises(pp.PostprocError):
        pp.leftover_hash_exact_test(np.full((4, 1), 0.3), 1)
    with pytest.raises(pp.PostprocError):
        pp.leftover_hash_exact_test(np.full((4, 1), 0.25), 3)
