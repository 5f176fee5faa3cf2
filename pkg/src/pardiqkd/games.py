"""Two-player non-local games: CHSH variants, anchoring, classical values, seed randomness.

A game is stored as dense tables indexed by alphabet position: ``question_dist[ix, iy]``
and a boolean truth table ``predicate[ix, iy, ia, ib]``. Symbols themselves (ints, or the
anchor symbol ``BOT``) only matter for display and serialization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

BOT = "⊥"
PROB_TOL = 1e-12
CLASSICAL_ENUM_LIMIT = 10**6


class GameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GameSpec:
    questions_a: tuple
    questions_b: tuple
    answers_a: tuple
    answers_b: tuple
    question_dist: np.ndarray
    predicate: np.ndarray
    name: str = "game"

    def __post_init__(self):
        dist = np.asarray(self.question_dist, dtype=float)
        pred = np.asarray(self.predicate, dtype=bool)
        shape = (len(self.questions_a), len(self.questions_b))
        if dist.shape != shape:
            raise GameError(f"question_dist shape {dist.shape} != {shape}")
        if pred.shape != shape + (len(self.answers_a), len(self.answers_b)):
            raise GameError("predicate table must cover every (x, y, a, b)")
        if np.any(dist < -PROB_TOL) or abs(dist.sum() - 1.0) > PROB_TOL:
            raise GameError("question_dist must be a probability table")
        dist.setflags(write=False)
        pred.setflags(write=False)
        object.__setattr__(self, "question_dist", dist)
        object.__setattr__(self, "predicate", pred)

    def p(self, x, y) -> float:
        return float(self.question_dist[self.questions_a.index(x), self.questions_b.index(y)])

    def wins(self, x, y, a, b) -> bool:
        return bool(self.predicate[self.questions_a.index(x), self.questions_b.index(y),
                                   self.answers_a.index(a), self.answers_b.index(b)])

    @property
    def p_x(self) -> np.ndarray:
        return self.question_dist.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.question_dist.sum(axis=0)

    def win_rate(self, p_ab_given_xy: np.ndarray) -> float:
        """Expected win probability for a behaviour table P[x, y, a, b]."""
        return float(np.einsum("xy,xyab,xyab->", self.question_dist, p_ab_given_xy, self.predicate))


def _chsh_pred(x, y, a, b) -> bool:
    return (a ^ b) == (x & y)


def chsh2_spec() -> GameSpec:
    q = (0, 1)
    pred = np.zeros((2, 2, 2, 2), dtype=bool)
    for x, y, a, b in itertools.product(q, q, q, q):
        pred[x, y, a, b] = _chsh_pred(x, y, a, b)
    return GameSpec(q, q, q, q, np.full((2, 2), 0.25), pred, name="2CHSH")


def chsh3_spec(nu: float) -> GameSpec:
    """CHSH with an extra Bob question 2; the pair (0, 2) is asked w.p. 1-nu and demands a == b."""
    if not 0.0 < nu < 1.0:
        raise GameError(f"nu must lie in (0, 1), got {nu}")
    qa, qb, ans = (0, 1), (0, 1, 2), (0, 1)
    dist = np.zeros((2, 3))
    dist[:2, :2] = nu / 4
    dist[0, 2] = 1.0 - nu
    pred = np.zeros((2, 3, 2, 2), dtype=bool)
    for x, y, a, b in itertools.product(qa, qb, ans, ans):
        pred[x, y, a, b] = (a == b) if y == 2 else _chsh_pred(x, y, a, b)
    return GameSpec(qa, qb, ans, ans, dist, pred, name="3CHSH")


def anchor(game: GameSpec, alpha: float) -> GameSpec:
    """Each question is independently replaced by BOT w.p. alpha; any BOT round is won."""
    if not 0.0 < alpha <= 1.0:
        raise GameError(f"alpha must lie in (0, 1], got {alpha}")
    nx, ny = game.question_dist.shape
    px, py = game.p_x, game.p_y
    dist = np.zeros((nx + 1, ny + 1))
    dist[:nx, :ny] = (1 - alpha) ** 2 * game.question_dist
    dist[nx, :ny] = alpha * (1 - alpha) * py
    dist[:nx, ny] = alpha * (1 - alpha) * px
    dist[nx, ny] = alpha**2
    na, nb = len(game.answers_a), len(game.answers_b)
    pred = np.ones((nx + 1, ny + 1, na, nb), dtype=bool)
    pred[:nx, :ny] = game.predicate
    return GameSpec(game.questions_a + (BOT,), game.questions_b + (BOT,),
                    game.answers_a, game.answers_b, dist, pred, name=f"{game.name}_⊥")


def chsh3_anchored(nu: float, alpha: float) -> GameSpec:
    return anchor(chsh3_spec(nu), alpha)


def classical_value(game: GameSpec, return_strategy: bool = False):
    """Exact classical value by enumerating every deterministic pair of answer functions.

    Alice functions are enumerated lexicographically (outer), Bob functions inner; the
    first maximiser found is kept.
    """
    nx, ny = game.question_dist.shape
    na, nb = len(game.answers_a), len(game.answers_b)
    n_alice, n_bob = na**nx, nb**ny
    if n_alice * n_bob > CLASSICAL_ENUM_LIMIT:
        raise GameError(f"{n_alice * n_bob} deterministic strategies exceeds enumeration limit")
    f_a = np.array(list(itertools.product(range(na), repeat=nx)))  # (n_alice, nx)
    f_b = np.array(list(itertools.product(range(nb), repeat=ny)))  # (n_bob, ny)
    ix, iy = np.arange(nx)[:, None], np.arange(ny)[None, :]
    best, arg = -1.0, (0, 0)
    for i, fa in enumerate(f_a):
        # (n_bob, nx, ny) win indicators for this Alice function against every Bob function
        w = game.predicate[ix, iy, fa[:, None], f_b[:, None, :]]
        vals = np.einsum("xy,kxy->k", game.question_dist, w)
        j = int(np.argmax(vals))
        if vals[j] > best + 1e-15:
            best, arg = float(vals[j]), (i, j)
    if return_strategy:
        fa, fb = f_a[arg[0]], f_b[arg[1]]
        return best, ({game.questions_a[x]: game.answers_a[fa[x]] for x in range(nx)},
                      {game.questions_b[y]: game.answers_b[fb[y]] for y in range(ny)})
    return best


# --------------------------------------------------------------------------- seed randomness


@dataclass(frozen=True, eq=False)
class SeedExtension:
    """Distribution of Omega with P(x|omega), P(y|omega) such that the (x, y) marginal is the game's."""

    omega_alphabet: tuple
    p_omega: np.ndarray
    p_x_given_omega: np.ndarray  # (|Omega|, |X|)
    p_y_given_omega: np.ndarray  # (|Omega|, |Y|)
    game: GameSpec = field(repr=False)

    def joint(self) -> np.ndarray:
        """P(omega, x, y) = P(omega) P(x|omega) P(y|omega)."""
        return np.einsum("w,wx,wy->wxy", self.p_omega, self.p_x_given_omega, self.p_y_given_omega)

    def factorization_residual(self) -> float:
        return float(np.abs(self.joint().sum(axis=0) - self.game.question_dist).max())

    def p_omega_x(self) -> np.ndarray:
        return self.p_omega[:, None] * self.p_x_given_omega

    def p_omega_y(self) -> np.ndarray:
        return self.p_omega[:, None] * self.p_y_given_omega


def holenstein_seed_extension(game: GameSpec) -> SeedExtension:
    """Omega = (side, that side's question): a fair coin picks a side, whose question is revealed.

    Given Omega = ("A", x), Alice's question is x and Bob's is drawn from P(y|x); symmetrically
    for ("B", y). Both parties can then sample locally and the marginal is exactly P_XY.
    """
    dist = game.question_dist
    px, py = game.p_x, game.p_y
    nx, ny = dist.shape
    omegas = tuple(("A", x) for x in game.questions_a) + tuple(("B", y) for y in game.questions_b)
    p_omega = np.concatenate([0.5 * px, 0.5 * py])
    pxw = np.zeros((nx + ny, nx))
    pyw = np.zeros((nx + ny, ny))
    for ix in range(nx):
        pxw[ix, ix] = 1.0
        pyw[ix] = dist[ix] / px[ix] if px[ix] > 0 else py
    for iy in range(ny):
        pyw[nx + iy, iy] = 1.0
        pxw[nx + iy] = dist[:, iy] / py[iy] if py[iy] > 0 else px
    ext = SeedExtension(omegas, p_omega, pxw, pyw, game)
    if ext.factorization_residual() > PROB_TOL:
        raise GameError("seed extension does not reproduce the question distribution")
    return ext


# --------------------------------------------------------------------------- text records


def _sym(s) -> str:
    return str(s)


def game_to_text(game: GameSpec) -> str:
    """Line-oriented record: alphabets, then ``x y p`` rows, then truth-table rows ``x y a b v``."""
    lines = [f"name {game.name}",
             "questions_a " + " ".join(map(_sym, game.questions_a)),
             "questions_b " + " ".join(map(_sym, game.questions_b)),
             "answers_a " + " ".join(map(_sym, game.answers_a)),
             "answers_b " + " ".join(map(_sym, game.answers_b)),
             "dist"]
    for (ix, x), (iy, y) in itertools.product(enumerate(game.questions_a), enumerate(game.questions_b)):
        lines.append(f"{_sym(x)} {_sym(y)} {float(game.question_dist[ix, iy])!r}")
    lines.append("predicate")
    for idx in itertools.product(*(range(k) for k in game.predicate.shape)):
        ix, iy, ia, ib = idx
        lines.append(f"{_sym(game.questions_a[ix])} {_sym(game.questions_b[iy])} "
                     f"{_sym(game.answers_a[ia])} {_sym(game.answers_b[ib])} {int(game.predicate[idx])}")
    return "\n".join(lines) + "\n"


def _parse_sym(tok: str):
    return int(tok) if tok.lstrip("-").isdigit() else tok


def game_from_text(text: str) -> GameSpec:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    head = {}
    i = 0
    while lines[i] not in ("dist",):
        key, *vals = lines[i].split()
        head[key] = vals
        i += 1
    qa = tuple(map(_parse_sym, head["questions_a"]))
    qb = tuple(map(_parse_sym, head["questions_b"]))
    aa = tuple(map(_parse_sym, head["answers_a"]))
    ab = tuple(map(_parse_sym, head["answers_b"]))
    dist = np.zeros((len(qa), len(qb)))
    pred = np.zeros((len(qa), len(qb), len(aa), len(ab)), dtype=bool)
    i += 1
    while lines[i] != "predicate":
        x, y, p = lines[i].split()
        dist[qa.index(_parse_sym(x)), qb.index(_parse_sym(y))] = float(p)
        i += 1
    for ln in lines[i + 1:]:
        x, y, a, b, v = ln.split()
        pred[qa.index(_parse_sym(x)), qb.index(_parse_sym(y)),
             aa.index(_parse_sym(a)), ab.index(_parse_sym(b))] = bool(int(v))
    name = head.get("name", ["game"])[0]
    return GameSpec(qa, qb, aa, ab, dist, pred, name=name)
