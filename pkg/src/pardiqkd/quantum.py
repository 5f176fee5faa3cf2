"""Exact finite-dimensional quantum engine for single-round strategies.

Everything is dense numpy linear algebra. Density matrices on E_A (x) E_B use the
row-major Kronecker convention, so ``rho.reshape(dA, dB, dA, dB)`` exposes the factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import BOT, GameSpec

TOL = 1e-9
EIG_CUTOFF = 1e-12
MAX_ENTROPY_DIM = 64

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


class QuantumError(ValueError):
    pass


# --------------------------------------------------------------------------- basic checks


def is_density_matrix(rho: np.ndarray, tol: float = TOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if np.abs(rho - rho.conj().T).max() > tol or abs(np.trace(rho) - 1) > tol:
        return False
    return np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -tol


def povm_deviation(elements) -> float:
    """Max of completeness error and most negative eigenvalue (0 for a valid POVM)."""
    elements = np.asarray(elements)
    d = elements.shape[-1]
    dev = np.abs(elements.sum(axis=0) - np.eye(d)).max()
    for e in elements:
        dev = max(dev, np.abs(e - e.conj().T).max(), -np.linalg.eigvalsh((e + e.conj().T) / 2).min())
    return float(dev)


def check_povm(elements, tol: float = TOL) -> np.ndarray:
    elements = np.asarray(elements, dtype=complex)
    if povm_deviation(elements) > tol:
        raise QuantumError("operators do not form a POVM")
    return elements


def projective_povm(observable: np.ndarray) -> np.ndarray:
    """Eigenprojectors of a +/-1 observable; outcome 0 <-> eigenvalue +1."""
    d = observable.shape[0]
    return np.stack([(np.eye(d) + observable) / 2, (np.eye(d) - observable) / 2])


def psd_sqrt(op: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((op + op.conj().T) / 2)
    if w.min() < -TOL:
        raise QuantumError("operator is not positive semidefinite")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def psd_inv_sqrt(op: np.ndarray, cutoff: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Moore-Penrose inverse square root on the numerical support, plus the support projector."""
    w, v = np.linalg.eigh((op + op.conj().T) / 2)
    keep = w > cutoff
    inv = np.zeros_like(w)
    inv[keep] = 1 / np.sqrt(w[keep])
    vk = v[:, keep]
    return (v * inv) @ v.conj().T, vk @ vk.conj().T


# --------------------------------------------------------------------------- entropies


def entropy_from_eigs(w) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > EIG_CUTOFF]
    return float(-(w * np.log2(w)).sum())


def von_neumann(rho: np.ndarray) -> float:
    return entropy_from_eigs(np.linalg.eigvalsh((rho + rho.conj().T) / 2))


def shannon(p) -> float:
    return entropy_from_eigs(np.ravel(p))


def cq_entropy(blocks) -> float:
    """Entropy of a classical-quantum state given its unnormalised conditional blocks."""
    return sum(von_neumann(b) for b in blocks)


def partial_trace(rho: np.ndarray, dims, keep) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    t = rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    res = np.einsum("".join(row + col) + "->" + "".join(out), t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(dk, dk)


def purify(rho: np.ndarray) -> np.ndarray:
    """Square-root purification |psi> = sum_k sqrt(l_k) |v_k>|k>, returned as a (d, d) tensor."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, 0, None)
    return v * np.sqrt(w)[None, :]


# --------------------------------------------------------------------------- states


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.ravel(psi)
    return np.outer(psi, psi.conj())


def bell_state() -> np.ndarray:
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    return ket_to_dm(phi)


def depolarize(state: np.ndarray, two_q: float) -> np.ndarray:
    """(1 - 2Q) rho + 2Q tau with tau maximally mixed; ``two_q`` is the mixing weight 2Q."""
    if not 0.0 <= two_q <= 1.0:
        raise QuantumError(f"mixing weight 2Q must lie in [0, 1], got {two_q}")
    d = state.shape[0]
    return (1 - two_q) * state + two_q * np.eye(d) / d


# --------------------------------------------------------------------------- strategies


@dataclass(frozen=True, eq=False)
class Strategy:
    """Shared state on E_A (x) E_B plus one POVM (stacked outcome operators) per question."""

    state: np.ndarray
    povms_a: dict
    povms_b: dict
    dims: tuple = (2, 2)

    def __post_init__(self):
        da, db = self.dims
        if self.state.shape != (da * db, da * db):
            raise QuantumError("state dimension does not match dims")
        for pov, d in ((self.povms_a, da), (self.povms_b, db)):
            for q, elems in pov.items():
                if np.asarray(elems).shape[1:] != (d, d):
                    raise QuantumError(f"POVM for question {q!r} has wrong dimension")

    def validate(self, tol: float = TOL) -> None:
        if not is_density_matrix(self.state, tol):
            raise QuantumError("shared state is not a density matrix")
        for elems in list(self.povms_a.values()) + list(self.povms_b.values()):
            check_povm(elems, tol)

    def covers(self, game: GameSpec) -> bool:
        return set(game.questions_a) <= set(self.povms_a) and set(game.questions_b) <= set(self.povms_b)


def _stack(pov: dict, questions) -> np.ndarray:
    return np.stack([np.asarray(pov[q], dtype=complex) for q in questions])


def behaviour(game: GameSpec, s: Strategy) -> np.ndarray:
    """Born-rule table P[x, y, a, b] = tr[(A_x(a) (x) B_y(b)) rho]."""
    if not s.covers(game):
        raise QuantumError("strategy does not cover the game's question alphabets")
    da, db = s.dims
    A = _stack(s.povms_a, game.questions_a)
    B = _stack(s.povms_b, game.questions_b)
    if A.shape[1] != len(game.answers_a) or B.shape[1] != len(game.answers_b):
        raise QuantumError("POVM outcome count does not match the answer alphabet")
    r4 = s.state.reshape(da, db, da, db)
    p = np.einsum("xaij,ybkl,jlik->xyab", A, B, r4)
    return p.real


def winning_probability(game: GameSpec, s: Strategy) -> float:
    return game.win_rate(behaviour(game, s))


def _chsh_observables():
    return SZ, SX, (SZ + SX) / np.sqrt(2), (SZ - SX) / np.sqrt(2)


def optimal_chsh_strategy(q_noise: float = 0.0) -> Strategy:
    a0, a1, b0, b1 = _chsh_observables()
    state = depolarize(bell_state(), 2 * q_noise)
    return Strategy(state, {0: projective_povm(a0), 1: projective_povm(a1)},
                    {0: projective_povm(b0), 1: projective_povm(b1)})


def honest_strategy(nu: float, alpha: float, q_noise: float = 0.0) -> Strategy:
    """Honest devices for anchored 3CHSH on a depolarised Bell pair.

    Bob's extra question 2 is sigma_z; on BOT Alice measures A_0 and Bob B_2.
    """
    if not (0 < nu < 1 and 0 < alpha < 1):
        raise QuantumError("nu and alpha must lie in (0, 1)")
    if not 0 <= q_noise <= 0.5:
        raise QuantumError("Q must lie in [0, 1/2]")
    a0, a1, b0, b1 = _chsh_observables()
    pa = {0: projective_povm(a0), 1: projective_povm(a1)}
    pa[BOT] = pa[0]
    pb = {0: projective_povm(b0), 1: projective_povm(b1), 2: projective_povm(SZ)}
    pb[BOT] = pb[2]
    return Strategy(depolarize(bell_state(), 2 * q_noise), pa, pb)


def rotated_strategy(base: Strategy, angles_a: dict, angles_b: dict) -> Strategy:
    """Conjugate each question's POVM by exp(-i theta sigma_y / 2) (a rotation in the x-z plane)."""

    def rot(theta):
        return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * SY

    def apply(pov, angles):
        out = {}
        for q, el in pov.items():
            u = rot(angles.get(q, 0.0))
            out[q] = np.einsum("ij,ajk,lk->ail", u, el, u.conj())
        return out

    return Strategy(base.state, apply(base.povms_a, angles_a), apply(base.povms_b, angles_b), base.dims)


def deterministic_strategy(game: GameSpec, f_a: dict, f_b: dict) -> Strategy:
    """Classical deterministic answers embedded as commuting (trivial) projectors on qubits."""
    na, nb = len(game.answers_a), len(game.answers_b)

    def pov(f, n):
        out = {}
        for q, ans in f.items():
            el = np.zeros((n, 2, 2), dtype=complex)
            el[ans] = np.eye(2)
            out[q] = el
        return out

    return Strategy(ket_to_dm(np.kron([1, 0], [1, 0]).astype(complex)), pov(f_a, na), pov(f_b, nb))


# --------------------------------------------------------------------------- conditional entropies


def eve_states_alice(s: Strategy, question) -> np.ndarray:
    """Unnormalised Eve states tr_{E_A E_B}[(A_x(a) (x) 1) psi] for each answer a.

    Eve holds the square-root purification of the shared state.
    """
    da, db = s.dims
    d = da * db
    if d > MAX_ENTROPY_DIM:
        raise QuantumError(f"dim(E_A E_B) = {d} exceeds {MAX_ENTROPY_DIM}")
    psi = purify(s.state).reshape(da, db, d)
    A = np.asarray(s.povms_a[question])
    return np.einsum("aji,ike,jkf->aef", A, psi, psi.conj())


def conditional_entropy_answer_given_eve(game: GameSpec, s: Strategy) -> float:
    """H(A | E X) = sum_x P(x) [H(A E)_x - H(E)_x]."""
    total = 0.0
    for ix, x in enumerate(game.questions_a):
        px = game.p_x[ix]
        if px == 0:
            continue
        blocks = eve_states_alice(s, x)
        total += px * (cq_entropy(blocks) - von_neumann(blocks.sum(axis=0)))
    return float(total)


def answer_distribution(game: GameSpec, s: Strategy) -> np.ndarray:
    """Joint P(a, b) averaged over the question distribution."""
    return np.einsum("xy,xyab->ab", game.question_dist, behaviour(game, s))


def conditional_entropy_a_given_b(game: GameSpec, s: Strategy) -> float:
    p_ab = answer_distribution(game, s)
    return shannon(p_ab) - shannon(p_ab.sum(axis=0))


def prob_answers_equal(game: GameSpec, s: Strategy) -> float:
    p_ab = answer_distribution(game, s)
    return float(sum(p_ab[i, j] for i, a in enumerate(game.answers_a)
                     for j, b in enumerate(game.answers_b) if a == b))


def prob_disagree(game: GameSpec, s: Strategy, x, y) -> float:
    p = behaviour(game, s)[game.questions_a.index(x), game.questions_b.index(y)]
    return float(sum(p[i, j] for i, a in enumerate(game.answers_a)
                     for j, b in enumerate(game.answers_b) if a != b))
