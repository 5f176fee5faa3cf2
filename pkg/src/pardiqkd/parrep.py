"""Exact checks of the parallel-repetition machinery at n <= 3 rounds.

Everything is indexed by alphabet position. A question or answer tuple for n rounds is a
flat mixed-radix index with round 1 most significant; the per-round view reshapes that
axis into n axes. Eve holds the purifying register E of the shared pure state
``psi[i, j, e]`` on E_A (x) E_B (x) E.

Two independent routes are compared:

* the algebraic route: Omega-averaged measurements, coarse-grained answers on C, the
  Phi-state and the hatted single-round measurements;
* the enumeration oracle: the full joint distribution of (Omega_1^n, X, Y, A, B) with Eve's
  unnormalised conditional states, marginalised directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .games import GameSpec, SeedExtension, holenstein_seed_extension
from .quantum import cq_entropy, psd_inv_sqrt, psd_sqrt, shannon

MAX_ROUNDS = 3
MAX_TOTAL_DIM = 256
INV_CUTOFF = 1e-10


class ParrepError(ValueError):
    pass


# --------------------------------------------------------------------------- strategies


@dataclass(frozen=True, eq=False)
class ParallelStrategy:
    game: GameSpec = field(repr=False)
    n: int
    psi: np.ndarray  # (dA, dB, dE)
    povms_a: np.ndarray  # (|X|^n, |A|^n, dA, dA)
    povms_b: np.ndarray  # (|Y|^n, |B|^n, dB, dB)
    seed_ext: SeedExtension | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 1 <= self.n <= MAX_ROUNDS:
            raise ParrepError(f"n must lie in [1, {MAX_ROUNDS}]")
        nx, ny = self.game.question_dist.shape
        na, nb = len(self.game.answers_a), len(self.game.answers_b)
        da, db, de = self.psi.shape
        if da * db * de > MAX_TOTAL_DIM:
            raise ParrepError(f"total dimension {da * db * de} exceeds {MAX_TOTAL_DIM}")
        if self.povms_a.shape != (nx**self.n, na**self.n, da, da):
            raise ParrepError(f"Alice POVM shape {self.povms_a.shape} inconsistent")
        if self.povms_b.shape != (ny**self.n, nb**self.n, db, db):
            raise ParrepError(f"Bob POVM shape {self.povms_b.shape} inconsistent")
        if abs(np.linalg.norm(self.psi) - 1) > 1e-9:
            raise ParrepError("psi must be normalised")
        if self.seed_ext is None:
            object.__setattr__(self, "seed_ext", holenstein_seed_extension(self.game))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.psi.shape

    @property
    def alphabet_sizes(self) -> tuple[int, int, int, int]:
        nx, ny = self.game.question_dist.shape
        return nx, ny, len(self.game.answers_a), len(self.game.answers_b)

    def per_round(self, side: str) -> np.ndarray:
        """POVMs with per-round axes: (q_1..q_n, ans_1..ans_n, d, d)."""
        nx, ny, na, nb = self.alphabet_sizes
        if side == "a":
            d = self.dims[0]
            return self.povms_a.reshape((nx,) * self.n + (na,) * self.n + (d, d))
        d = self.dims[1]
        return self.povms_b.reshape((ny,) * self.n + (nb,) * self.n + (d, d))

    def povm_deviation(self) -> float:
        dev = 0.0
        for pov in (self.povms_a, self.povms_b):
            eye = np.eye(pov.shape[-1])
            dev = max(dev, float(np.abs(pov.sum(axis=1) - eye).max()))
            herm = np.abs(pov - np.conj(np.swapaxes(pov, -1, -2))).max()
            low = np.linalg.eigvalsh(0.5 * (pov + np.conj(np.swapaxes(pov, -1, -2)))).min()
            dev = max(dev, float(herm), float(max(-low, 0.0)))
        return dev


def _random_povm(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(k, d, d)) + 1j * rng.normal(size=(k, d, d))
    g = g @ np.conj(np.swapaxes(g, -1, -2))
    s_inv, _ = psd_inv_sqrt(g.sum(axis=0))
    return s_inv @ g @ s_inv


def _random_mixed(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def _purify_ab(rho: np.ndarray, da: int, db: int) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    psi = v * np.sqrt(np.clip(w, 0, None))[None, :]
    return psi.reshape(da, db, da * db)


def _kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def random_parallel_strategy(game: GameSpec, n: int, rng: np.random.Generator,
                             kind: str = "generic", dim: int | None = None) -> ParallelStrategy:
    """Random n-round strategy.

    kind = "generic": Haar-like pure state on E_A E_B E and independent random POVMs for every
    question tuple; "product": n independent copies of one random qubit strategy (tensor
    POVMs); "classical": diagonal shared randomness with diagonal POVMs.
    """
    nx, ny = game.question_dist.shape
    na, nb = len(game.answers_a), len(game.answers_b)
    if kind == "product":
        rho1 = _random_mixed(4, rng).reshape(2, 2, 2, 2)
        pa1 = [_random_povm(na, 2, rng) for _ in range(nx)]
        pb1 = [_random_povm(nb, 2, rng) for _ in range(ny)]
        # rho^{(x) n} reordered to (A_1..A_n, B_1..B_n)
        rho = np.ones(())
        for _ in range(n):
            rho = np.multiply.outer(rho, rho1)
        perm_ket = [4 * k for k in range(n)] + [4 * k + 1 for k in range(n)]
        perm_bra = [4 * k + 2 for k in range(n)] + [4 * k + 3 for k in range(n)]
        d = 2**n
        rho = rho.transpose(perm_ket + perm_bra).reshape(d * d, d * d)
        pa = np.array([[_kron_all(pa1[xs[k]][as_[k]] for k in range(n))
                        for as_ in itertools.product(range(na), repeat=n)]
                       for xs in itertools.product(range(nx), repeat=n)])
        pb = np.array([[_kron_all(pb1[ys[k]][bs[k]] for k in range(n))
                        for bs in itertools.product(range(nb), repeat=n)]
                       for ys in itertools.product(range(ny), repeat=n)])
        return ParallelStrategy(game, n, _purify_ab(rho, d, d), pa, pb)

    d = dim if dim is not None else (4 if n <= 2 else 2)
    if kind == "generic":
        psi = rng.normal(size=(d, d, d * d)) + 1j * rng.normal(size=(d, d, d * d))
        psi /= np.linalg.norm(psi)
        pa = np.array([_random_povm(na**n, d, rng) for _ in range(nx**n)])
        pb = np.array([_random_povm(nb**n, d, rng) for _ in range(ny**n)])
        return ParallelStrategy(game, n, psi, pa, pb)
    if kind == "classical":
        lam = rng.dirichlet(np.ones(d * d))
        rho = np.diag(lam).astype(complex)
        pa = np.zeros((nx**n, na**n, d, d), dtype=complex)
        pb = np.zeros((ny**n, nb**n, d, d), dtype=complex)
        idx = np.arange(d)
        for q in range(nx**n):
            pa[q][:, idx, idx] = rng.dirichlet(np.ones(na**n), size=d).T
        for q in range(ny**n):
            pb[q][:, idx, idx] = rng.dirichlet(np.ones(nb**n), size=d).T
        return ParallelStrategy(game, n, _purify_ab(rho, d, d), pa, pb)
    raise ParrepError(f"unknown strategy kind '{kind}'")


def perturb_povm(s: ParallelStrategy, amount: float) -> ParallelStrategy:
    """Copy of ``s`` with Alice's first POVM element scaled by 1 + amount (breaks completeness)."""
    pa = s.povms_a.copy()
    pa[0, 0] *= 1 + amount
    return ParallelStrategy(s.game, s.n, s.psi, pa, s.povms_b, s.seed_ext)


# --------------------------------------------------------------------------- dependency breaker


@dataclass(frozen=True)
class DependencyBreaker:
    """r_{-i}: seeds on rounds outside C and i, plus questions and answers on C (0-based rounds)."""

    n: int
    subset_c: tuple
    i: int
    omega: tuple  # Omega index for each round in free_rounds, in increasing order
    x_c: tuple
    y_c: tuple
    a_c: tuple = ()
    b_c: tuple = ()

    def __post_init__(self):
        c = tuple(self.subset_c)
        if len(set(c)) != len(c) or any(not 0 <= j < self.n for j in c):
            raise ParrepError("C must be a set of round indices in [0, n)")
        if not 0 <= self.i < self.n or self.i in c:
            raise ParrepError("i must be a round outside C")
        if len(self.omega) != len(self.free_rounds):
            raise ParrepError("one seed value per round outside C and i is required")
        if not (len(self.x_c) == len(self.y_c) == len(c)):
            raise ParrepError("questions on C must match |C|")
        if self.a_c and len(self.a_c) != len(c) or self.b_c and len(self.b_c) != len(c):
            raise ParrepError("answers on C must match |C|")
        object.__setattr__(self, "subset_c", tuple(sorted(c)))

    @property
    def free_rounds(self) -> tuple:
        return tuple(j for j in range(self.n) if j != self.i and j not in self.subset_c)

    def with_answers(self, a_c, b_c) -> "DependencyBreaker":
        return DependencyBreaker(self.n, self.subset_c, self.i, self.omega, self.x_c, self.y_c,
                                 tuple(a_c), tuple(b_c))


def _onehot(k: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[k] = 1.0
    return v


def _question_weights(s: ParallelStrategy, r: DependencyBreaker, q: int, side: str) -> list:
    """P(q_k | omega_{-i}, Q_i = q) per round for one side, as a list of vectors."""
    ext = s.seed_ext
    cond = ext.p_x_given_omega if side == "a" else ext.p_y_given_omega
    size = cond.shape[1]
    fixed_c = dict(zip(r.subset_c, r.x_c if side == "a" else r.y_c))
    free = dict(zip(r.free_rounds, r.omega))
    out = []
    for k in range(s.n):
        if k == r.i:
            out.append(_onehot(q, size))
        elif k in fixed_c:
            out.append(_onehot(fixed_c[k], size))
        else:
            out.append(cond[free[k]])
    return out


# --------------------------------------------------------------------------- algebraic route


def coarse_povm(s: ParallelStrategy, x1n, subset_c, side: str = "a") -> np.ndarray:
    """A(a_C) = sum over a_1^n consistent with a_C of A_{x_1^n}(a_1^n); axes (a_C..., d, d)."""
    pov = s.per_round(side)
    if len(x1n) != s.n:
        raise ParrepError("question tuple must have n entries")
    c = tuple(sorted(subset_c))
    if any(not 0 <= j < s.n for j in c):
        raise ParrepError("C must be a subset of the rounds")
    ops = pov[tuple(x1n)]  # (ans_1..ans_n, d, d)
    drop = tuple(k for k in range(s.n) if k not in c)
    return ops.sum(axis=drop) if drop else ops


def omega_averaged_povm(s: ParallelStrategy, r: DependencyBreaker, q: int,
                        side: str = "a") -> np.ndarray:
    """E_{Q_1^n | omega_{-i}, Q_i = q} of the n-round POVM; axes (ans_1..ans_n, d, d)."""
    pov = s.per_round(side)
    w = _question_weights(s, r, q, side)
    n = s.n
    args = [pov, list(range(2 * n + 2))]
    for k in range(n):
        args += [w[k], [k]]
    return np.einsum(*args, list(range(n, 2 * n + 2)), optimize=True)


def _coarse_of_averaged(avg: np.ndarray, n: int, r: DependencyBreaker, keep_i: bool) -> np.ndarray:
    keep = set(r.subset_c) | ({r.i} if keep_i else set())
    drop = tuple(k for k in range(n) if k not in keep)
    out = avg.sum(axis=drop) if drop else avg
    # remaining answer axes are in round order; move round i's axis to the front
    kept = sorted(keep)
    if keep_i:
        out = np.moveaxis(out, kept.index(r.i), 0)
    return out


def _select_c(op: np.ndarray, answers: tuple) -> np.ndarray:
    return op[tuple(answers)] if answers else op


def phi_state(s: ParallelStrategy, r: DependencyBreaker, x: int, y: int) -> tuple[np.ndarray, float]:
    """(sqrt(A_{w,x}(a_C)) (x) sqrt(B_{w,y}(b_C))) |psi>, unnormalised, and its norm."""
    a_c = _select_c(_coarse_of_averaged(omega_averaged_povm(s, r, x, "a"), s.n, r, False), r.a_c)
    b_c = _select_c(_coarse_of_averaged(omega_averaged_povm(s, r, y, "b"), s.n, r, False), r.b_c)
    phi = np.einsum("ki,lj,ije->kle", psd_sqrt(a_c), psd_sqrt(b_c), s.psi, optimize=True)
    return phi, float(np.linalg.norm(phi))


def hat_povm(s: ParallelStrategy, r: DependencyBreaker, q: int, side: str = "a") -> np.ndarray:
    """A(a_C)^{-1/2} [sum over a_1^n consistent with (a_i, a_C)] A(a_C)^{-1/2}, axes (a_i, d, d).

    The inverse is taken on the numerical support; the complement projector goes to answer 0.
    """
    avg = omega_averaged_povm(s, r, q, side)
    ans_c = r.a_c if side == "a" else r.b_c
    coarse = _select_c(_coarse_of_averaged(avg, s.n, r, False), ans_c)
    fine = _coarse_of_averaged(avg, s.n, r, True)  # (a_i, a_C..., d, d)
    fine = np.stack([_select_c(f, ans_c) for f in fine])
    inv, supp = psd_inv_sqrt(coarse, INV_CUTOFF)
    hat = inv @ fine @ inv
    hat[0] += np.eye(supp.shape[0]) - supp
    return hat


def _trace_out_ab(op_a, op_b, vec) -> np.ndarray:
    return np.einsum("ki,lj,ije,klf->ef", op_a, op_b, vec, vec.conj(), optimize=True)


def conditioned_states_algebraic(s: ParallelStrategy, r: DependencyBreaker, x: int, y: int
                                 ) -> np.ndarray | None:
    """tr_{E_A E_B}(hat A(a) (x) hat B(b) Phi~) for every (a, b); None for a null Phi."""
    phi, norm = phi_state(s, r, x, y)
    if norm**2 < INV_CUTOFF:
        return None
    phi = phi / norm
    ha, hb = hat_povm(s, r, x, "a"), hat_povm(s, r, y, "b")
    return np.einsum("aki,blj,ije,klf->abef", ha, hb, phi, phi.conj(), optimize=True)


# --------------------------------------------------------------------------- enumeration oracle


def eve_tensor(s: ParallelStrategy) -> np.ndarray:
    """tr_{E_A E_B}(A_{x}(a) (x) B_{y}(b) psi) with per-round axes x.., y.., a.., b.., e, f."""
    t = np.einsum("xaki,yblj,ije,klf->xyabef", s.povms_a, s.povms_b, s.psi, s.psi.conj(),
                  optimize=True)
    nx, ny, na, nb = s.alphabet_sizes
    de = s.dims[2]
    return t.reshape((nx,) * s.n + (ny,) * s.n + (na,) * s.n + (nb,) * s.n + (de, de))


def _oracle_joint_all(s: ParallelStrategy, eve: np.ndarray, r: DependencyBreaker) -> np.ndarray:
    """Unnormalised sum over all hidden variables with round-i questions kept.

    Axes (x_i, y_i, a_C.., b_C.., a_i, b_i, e, f). Rounds in C and i carry P_XY(x_k, y_k), free
    rounds carry P(w_k) P(x_k|w_k) P(y_k|w_k) with their seed value fixed.
    """
    n, ext = s.n, s.seed_ext
    pxy = s.game.question_dist
    X = lambda k: k  # noqa: E731
    Y = lambda k: n + k  # noqa: E731
    A = lambda k: 2 * n + k  # noqa: E731
    B = lambda k: 3 * n + k  # noqa: E731
    e, f = 4 * n, 4 * n + 1
    args = [eve, list(range(4 * n + 2))]
    fixed = dict(zip(r.subset_c, zip(r.x_c, r.y_c)))
    free = dict(zip(r.free_rounds, r.omega))
    for k in range(n):
        if k == r.i:
            w = pxy
        elif k in fixed:
            qx, qy = fixed[k]
            w = np.zeros_like(pxy)
            w[qx, qy] = pxy[qx, qy]
        else:
            wk = free[k]
            w = ext.p_omega[wk] * np.outer(ext.p_x_given_omega[wk], ext.p_y_given_omega[wk])
        args += [w, [X(k), Y(k)]]
    out = [X(r.i), Y(r.i)] + [A(k) for k in r.subset_c] + [B(k) for k in r.subset_c] \
        + [A(r.i), B(r.i), e, f]
    return np.einsum(*args, out, optimize=True)


def _oracle_joint(s: ParallelStrategy, eve: np.ndarray, r: DependencyBreaker, x: int, y: int
                  ) -> np.ndarray:
    """Axes (a_C.., b_C.., a_i, b_i, e, f) for fixed round-i questions."""
    return _oracle_joint_all(s, eve, r)[x, y]


def _tr(m: np.ndarray) -> np.ndarray:
    return np.trace(m, axis1=-2, axis2=-1).real


def trace_norm(h: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(0.5 * (h + h.conj().T))).sum())


def norm_identity_deviation(s: ParallelStrategy, r: DependencyBreaker, x: int, y: int,
                            eve: np.ndarray | None = None) -> float:
    """| ||Phi||^2 - P(a_C, b_C | omega_{-i}, x, y) | with the probability from enumeration."""
    eve = eve_tensor(s) if eve is None else eve
    joint = _tr(_oracle_joint(s, eve, r, x, y)).sum(axis=(-2, -1))
    total = joint.sum()
    if total <= 0:
        raise ParrepError("conditioning event has zero probability")
    p = joint[tuple(r.a_c) + tuple(r.b_c)] / total
    _, norm = phi_state(s, r, x, y)
    return abs(norm**2 - p)


def conditioned_states_oracle(s: ParallelStrategy, r: DependencyBreaker, x: int, y: int,
                              eve: np.ndarray | None = None) -> np.ndarray | None:
    """P(a, b | r, x, y) rho_E^{(r, x, y, a, b)} by direct marginalisation; None if P(r, x, y)=0."""
    eve = eve_tensor(s) if eve is None else eve
    joint = _oracle_joint(s, eve, r, x, y)[tuple(r.a_c) + tuple(r.b_c)]
    total = _tr(joint).sum()
    if total < INV_CUTOFF * max(_tr(_oracle_joint(s, eve, r, x, y)).sum(), 1e-300):
        return None
    return joint / total


def verify_conditioned_state_identity(s: ParallelStrategy, r: DependencyBreaker, x: int, y: int,
                                      eve: np.ndarray | None = None) -> float | None:
    """max over (a, b) of the trace distance between the two routes; None marks a skipped null case."""
    lhs = conditioned_states_algebraic(s, r, x, y)
    rhs = conditioned_states_oracle(s, r, x, y, eve)
    if lhs is None or rhs is None:
        return None
    return max(trace_norm(lhs[a, b] - rhs[a, b])
               for a in range(lhs.shape[0]) for b in range(lhs.shape[1]))


def iter_breakers(s: ParallelStrategy):
    """Every (C, i, omega_{-i}, x_C, y_C) for C a proper subset of the rounds and i outside C."""
    nx, ny, _, _ = s.alphabet_sizes
    n_omega = len(s.seed_ext.omega_alphabet)
    for size in range(s.n):
        for c in itertools.combinations(range(s.n), size):
            for i in (k for k in range(s.n) if k not in c):
                n_free = s.n - size - 1
                for om in itertools.product(range(n_omega), repeat=n_free):
                    for xc in itertools.product(range(nx), repeat=size):
                        for yc in itertools.product(range(ny), repeat=size):
                            yield DependencyBreaker(s.n, c, i, om, xc, yc)


@dataclass
class IdentityReport:
    norm_identity: float = 0.0
    conditioned_state: float = 0.0
    hat_completeness: float = 0.0
    cases: int = 0
    skipped: int = 0

    def merge(self, other: "IdentityReport") -> None:
        self.norm_identity = max(self.norm_identity, other.norm_identity)
        self.conditioned_state = max(self.conditioned_state, other.conditioned_state)
        self.hat_completeness = max(self.hat_completeness, other.hat_completeness)
        self.cases += other.cases
        self.skipped += other.skipped


def _batch_sqrt(ops: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(ops)
    return (v * np.sqrt(np.clip(w, 0, None))[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _batch_inv_sqrt(ops: np.ndarray, cutoff: float = INV_CUTOFF):
    w, v = np.linalg.eigh(ops)
    keep = w > cutoff
    inv = np.where(keep, 1 / np.sqrt(np.where(keep, w, 1.0)), 0.0)
    vh = np.conj(np.swapaxes(v, -1, -2))
    return (v * inv[..., None, :]) @ vh, (v * keep[..., None, :]) @ vh


def _side_tables(s: ParallelStrategy, r0: DependencyBreaker, side: str):
    """sqrt of coarse POVMs (Q, P, d, d) and hatted POVMs (Q, P, a_i, d, d); P = answers on C."""
    nx, ny, na, nb = s.alphabet_sizes
    nq, nans = (nx, na) if side == "a" else (ny, nb)
    fine = []
    for q in range(nq):
        f = _coarse_of_averaged(omega_averaged_povm(s, r0, q, side), s.n, r0, True)
        d = f.shape[-1]
        fine.append(np.swapaxes(f.reshape(nans, -1, d, d), 0, 1))
    fine = np.stack(fine)  # (Q, P, a_i, d, d)
    coarse = fine.sum(axis=2)
    inv, supp = _batch_inv_sqrt(coarse)
    hat = inv[:, :, None] @ fine @ inv[:, :, None]
    hat[:, :, 0] += np.eye(coarse.shape[-1]) - supp
    return _batch_sqrt(coarse), hat


def verify_identities(s: ParallelStrategy) -> IdentityReport:
    """Norm identity, conditioned-state identity and hat completeness over all nonzero cases.

    Vectorised over (x, y, a_C, b_C) for each value of (C, i, omega_{-i}, x_C, y_C).
    """
    eve = eve_tensor(s)
    nx, ny, na, nb = s.alphabet_sizes
    rep = IdentityReport()
    for r0 in iter_breakers(s):
        sa, ha = _side_tables(s, r0, "a")
        sb, hb = _side_tables(s, r0, "b")
        eye_a, eye_b = np.eye(sa.shape[-1]), np.eye(sb.shape[-1])
        rep.hat_completeness = max(rep.hat_completeness,
                                   float(np.abs(ha.sum(axis=2) - eye_a).max()),
                                   float(np.abs(hb.sum(axis=2) - eye_b).max()))
        npa, npb = sa.shape[1], sb.shape[1]
        joint = _oracle_joint_all(s, eve, r0)
        de = joint.shape[-1]
        joint = joint.reshape(nx, ny, npa, npb, na, nb, de, de)
        probs = _tr(joint)  # (X, Y, P, Q, a, b)
        total = probs.sum(axis=(2, 3, 4, 5))
        valid_xy = total > 0
        rep.skipped += int((~valid_xy).sum()) * npa * npb
        safe_total = np.where(valid_xy, total, 1.0)
        p_c = probs.sum(axis=(4, 5)) / safe_total[:, :, None, None]

        phi = np.einsum("XPki,YQlj,ije->XYPQkle", sa, sb, s.psi, optimize=True)
        norm2 = (np.abs(phi) ** 2).sum(axis=(-3, -2, -1))
        dev = np.where(valid_xy[:, :, None, None], np.abs(norm2 - p_c), 0.0)
        rep.norm_identity = max(rep.norm_identity, float(dev.max()))

        ok = valid_xy[:, :, None, None] & (p_c >= INV_CUTOFF)
        rep.skipped += int((valid_xy[:, :, None, None] & ~ok).sum())
        if not ok.any():
            continue
        phin = phi / np.sqrt(np.where(ok, norm2, 1.0))[..., None, None, None]
        lhs = np.einsum("XPaki,YQblj,XYPQije,XYPQklf->XYPQabef", ha, hb, phin, phin.conj(),
                        optimize=True)
        denom = (p_c * safe_total[:, :, None, None])[..., None, None, None, None]
        rhs = joint / np.where(ok[..., None, None, None, None], denom, 1.0)
        diff = (lhs - rhs)[ok]
        diff = 0.5 * (diff + np.conj(np.swapaxes(diff, -1, -2)))
        tn = np.abs(np.linalg.eigvalsh(diff)).sum(axis=-1)
        rep.conditioned_state = max(rep.conditioned_state, float(tn.max()))
        rep.cases += int(ok.sum())
    return rep


# --------------------------------------------------------------------------- Markov chain and distances


def markov_cmi(s: ParallelStrategy) -> float:
    """I(Omega_1 : Omega_2..n A_1^n E | X_1) of the state after Alice measures, Bob untouched."""
    if s.n < 2:
        raise ParrepError("the Markov-chain check needs n >= 2")
    n, ext = s.n, s.seed_ext
    nx, _, na, _ = s.alphabet_sizes
    n_om = len(ext.omega_alphabet)
    pov = s.povms_a
    eve_a = np.einsum("xaki,ije,kjf->xaef", pov, s.psi, s.psi.conj(), optimize=True)
    de = s.dims[2]
    eve_a = eve_a.reshape((nx,) * n + (na,) * n + (de, de))
    # weights P(w_1) P(x_1|w_1) and P(w_k) P(x_k|w_k) for k >= 2 (x_k summed out)
    w1 = ext.p_omega[:, None] * ext.p_x_given_omega  # (W, X)
    rest = [ext.p_omega[:, None] * ext.p_x_given_omega for _ in range(n - 1)]
    # blocks[w1, x1, w2.., a.., e, f]
    args = [w1, [0, 1], eve_a, [1] + list(range(2, n + 1)) + list(range(n + 1, 2 * n + 1))
            + [3 * n + 1, 3 * n + 2]]
    for k, w in enumerate(rest):
        args += [w, [2 * n + 1 + k, 2 + k]]
    out = [0, 1] + [2 * n + 1 + k for k in range(n - 1)] + list(range(n + 1, 2 * n + 1)) \
        + [3 * n + 1, 3 * n + 2]
    blocks = np.einsum(*args, out, optimize=True)
    blocks = blocks.reshape(n_om, nx, -1, de, de)
    h_all = cq_entropy(blocks.reshape(-1, de, de))
    h_no_w1 = cq_entropy(blocks.sum(axis=0).reshape(-1, de, de))
    p_w1x1 = _tr(blocks).sum(axis=2)
    h_w1x1 = shannon(p_w1x1.ravel())
    h_x1 = shannon(p_w1x1.sum(axis=0))
    return float(h_w1x1 + h_no_w1 - h_all - h_x1)


def behaviour_tensor(s: ParallelStrategy, eve: np.ndarray | None = None) -> np.ndarray:
    eve = eve_tensor(s) if eve is None else eve
    return _tr(eve)


def theta_rho_distance(s: ParallelStrategy, subset_c) -> float:
    """E_I ||P_{R_{-i}} P_{XY} - P_{R_{-i} X_i Y_i}||_1 with I uniform on rounds outside C.

    The two states share the conditional states of (A_i, B_i, E) given (r_{-i}, x, y), so
    the trace distance of the cq states reduces to this classical l1 distance.
    """
    n, ext = s.n, s.seed_ext
    c = tuple(sorted(subset_c))
    others = [k for k in range(n) if k not in c]
    if not others:
        raise ParrepError("C must leave at least one round")
    beh = behaviour_tensor(s)
    pxy = s.game.question_dist
    w_free = np.einsum("w,wx,wy->wxy", ext.p_omega, ext.p_x_given_omega, ext.p_y_given_omega)
    total = 0.0
    for i in others:
        X = lambda k: k  # noqa: E731
        Y = lambda k: n + k  # noqa: E731
        A = lambda k: 2 * n + k  # noqa: E731
        B = lambda k: 3 * n + k  # noqa: E731
        W = lambda k: 4 * n + k  # noqa: E731
        args = [beh, list(range(4 * n))]
        out_free, out_c = [], []
        for k in range(n):
            if k in c or k == i:
                args += [pxy, [X(k), Y(k)]]
            else:
                args += [w_free, [W(k), X(k), Y(k)]]
                out_free.append(W(k))
        for k in c:
            out_c += [X(k), Y(k), A(k), B(k)]
        q = np.einsum(*args, out_free + out_c + [X(i), Y(i)], optimize=True)
        p_r = q.sum(axis=(-2, -1))
        total += float(np.abs(np.multiply.outer(p_r, pxy) - q).sum())
    return total / len(others)


def theta_sigma_rho_distances(s: ParallelStrategy, subset_c) -> dict:
    return {"theta_rho": theta_rho_distance(s, subset_c)}


# --------------------------------------------------------------------------- suites


def verify_suite(game: GameSpec, n: int, count: int, seed: int,
                 kinds=("generic", "product", "classical"), perturb: float = 0.0) -> dict:
    """Run every identity over ``count`` random strategies cycling through ``kinds``."""
    if not 1 <= n <= MAX_ROUNDS:
        raise ParrepError(f"n must lie in [1, {MAX_ROUNDS}]")
    total = IdentityReport()
    povm_dev, cmi, dist = 0.0, 0.0, 0.0
    for k in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        kind = kinds[k % len(kinds)]
        if kind == "product" and n == 3:
            kind = "generic"
        s = random_parallel_strategy(game, n, rng, kind)
        if perturb:
            s = perturb_povm(s, perturb)
        povm_dev = max(povm_dev, s.povm_deviation())
        total.merge(verify_identities(s))
        if n >= 2:
            cmi = max(cmi, abs(markov_cmi(s)))
            dist = max(dist, theta_rho_distance(s, (0,)))
    return {"n": n, "strategies": count, "cases": total.cases, "skipped": total.skipped,
            "povm_completeness": povm_dev, "norm_identity": total.norm_identity,
            "conditioned_state": total.conditioned_state,
            "hat_completeness": total.hat_completeness, "markov_cmi": cmi,
            "theta_rho_max": dist}
