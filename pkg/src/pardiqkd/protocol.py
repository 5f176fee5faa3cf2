"""Monte Carlo execution of the parallel DIQKD protocol on i.i.d. device models."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import postproc as pp
from .entropy import BoundConstants, BoundError, hmax_b_given_a
from .games import GameSpec, chsh3_anchored, holenstein_seed_extension
from .keyrate import finite_size_key_length
from .params import ProtocolParams, t_of
from .quantum import Strategy, behaviour, honest_strategy

DEFAULT_EPS_PA = 1e-10


class DeviceModel(Protocol):
    def answer(self, xs: np.ndarray, ys: np.ndarray, rng: np.random.Generator
               ) -> tuple[np.ndarray, np.ndarray]:
        """Answer index arrays for question index arrays of one full run."""


def _sample_rows(cdf: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of a (k, m) cumulative table."""
    u = rng.random(cdf.shape[0])
    return np.minimum((u[:, None] >= cdf).sum(axis=1), cdf.shape[1] - 1)


@dataclass(eq=False)
class IidDevice:
    """Samples every round independently from a single-round strategy's Born distribution."""

    game: GameSpec
    strategy: Strategy

    def __post_init__(self):
        p = behaviour(self.game, self.strategy)
        self._nb = p.shape[3]
        flat = p.reshape(p.shape[0], p.shape[1], -1)
        self._cdf = np.cumsum(flat / flat.sum(axis=2, keepdims=True), axis=2)

    def answer(self, xs, ys, rng):
        k = _sample_rows(self._cdf[xs, ys], rng)
        return k // self._nb, k % self._nb


def honest_device(params: ProtocolParams) -> IidDevice:
    game = chsh3_anchored(params.nu, params.alpha)
    return IidDevice(game, honest_strategy(params.nu, params.alpha, params.q_noise))


@dataclass(eq=False)
class AlwaysWinDevice:
    """Sees both questions and returns the first winning answer pair (a signalling box)."""

    game: GameSpec

    def answer(self, xs, ys, rng):
        nb = self.game.predicate.shape[3]
        flat = self.game.predicate.reshape(*self.game.predicate.shape[:2], -1)
        k = np.argmax(flat, axis=2)[xs, ys]
        return k // nb, k % nb


@dataclass(eq=False)
class Transcript:
    game: GameSpec = field(repr=False)
    omega: np.ndarray
    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    j: np.ndarray
    t_flags: np.ndarray
    s: np.ndarray
    aborted: bool
    win_count_on_s: int
    threshold: float
    raw_key_a: np.ndarray
    raw_key_b: np.ndarray
    final_key: np.ndarray
    ir_validated: bool | None = None
    ir_leak_bits: int = 0
    pa_seed: np.ndarray | None = None
    final_key_b: np.ndarray | None = None

    @property
    def t(self) -> int:
        return int(self.j.size)

    def to_json(self) -> str:
        ext_syms = [f"{d}{v}" for d, v in holenstein_seed_extension(self.game).omega_alphabet]
        qa, qb = self.game.questions_a, self.game.questions_b
        rec = {
            "omega": [ext_syms[w] for w in self.omega],
            "x": [qa[i] for i in self.x],
            "y": [qb[i] for i in self.y],
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "j": self.j.tolist(),
            "t_flags": self.t_flags.tolist(),
            "s": self.s.tolist(),
            "aborted": bool(self.aborted),
            "raw_key_a": self.raw_key_a.tolist(),
            "raw_key_b": self.raw_key_b.tolist(),
            "final_key_hex": pp.bits_to_hex(self.final_key),
        }
        return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent stream per trial from a (seed, trial) spawn key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _default_hmin(params: ProtocolParams, constants: BoundConstants) -> float:
    # entropy available to PA before IR leakage: eat bound minus H_max removal and test leakage
    try:
        r = finite_size_key_length(params, constants)
    except BoundError:
        return 0.0
    return max(r.eat_bound - r.hmax_removed - r.test_leak, 0.0)


def run(params: ProtocolParams, device: DeviceModel | None = None,
        rng: np.random.Generator | None = None, *, postprocess: bool = True,
        hmin_bound: float | None = None, ir_budget: float | None = None,
        eps_pa: float = DEFAULT_EPS_PA, constants: BoundConstants = BoundConstants()) -> Transcript:
    """Execute one run of the protocol.

    Seeds Omega_i, then local questions, one device call for all n rounds, a uniform t-subset
    J, Bernoulli(gamma) test flags, the abort check on S and, if not aborted, reconciliation
    and privacy amplification. ``hmin_bound`` is the min-entropy granted to PA before the IR
    leakage is subtracted (default: the finite-size bound for ``params``).
    """
    p = params
    rng = trial_rng(p.rng_seed) if rng is None else rng
    game = chsh3_anchored(p.nu, p.alpha)
    ext = holenstein_seed_extension(game)
    device = IidDevice(game, honest_strategy(p.nu, p.alpha, p.q_noise)) if device is None else device

    n, t = p.n, t_of(p.n, p.delta)
    omega = _sample_rows(np.tile(np.cumsum(ext.p_omega), (n, 1)), rng)
    xs = _sample_rows(np.cumsum(ext.p_x_given_omega, axis=1)[omega], rng)
    ys = _sample_rows(np.cumsum(ext.p_y_given_omega, axis=1)[omega], rng)
    a, b = device.answer(xs, ys, rng)
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)

    j = rng.choice(n, size=t, replace=False)
    t_flags = (rng.random(t) < p.gamma).astype(np.uint8)
    s = j[t_flags == 1]
    wins = int(game.predicate[xs[s], ys[s], a[s], b[s]].sum())
    threshold = p.gamma * p.omega_th * t
    aborted = wins < threshold
    key_a = np.asarray(game.answers_a, dtype=np.uint8)[a[j]]
    key_b = np.asarray(game.answers_b, dtype=np.uint8)[b[j]]

    tr = Transcript(game, omega, xs, ys, a, b, j, t_flags, s, bool(aborted), wins, threshold,
                    key_a, key_b, np.zeros(0, dtype=np.uint8))
    if aborted or not postprocess:
        return tr
    budget = pp_budget(p) if ir_budget is None else ir_budget
    ir = pp.ir_reconcile(key_a, key_b, budget, rng,
                         radius=pp.bounded_radius(t, p.nu, p.alpha, p.delta1))
    tr.ir_validated, tr.ir_leak_bits = ir.validated, ir.leak_bits
    if not ir.validated:
        return tr
    hmin = _default_hmin(p, constants) if hmin_bound is None else hmin_bound
    pa = pp.privacy_amplify(key_a, max(hmin - ir.leak_bits, 0.0), eps_pa, rng)
    tr.final_key = pa.key
    tr.pa_seed = None if pa.hash is None else pa.hash.seed_bits
    # Bob hashes his corrected key with the same public seed
    tr.final_key_b = (pp.toeplitz_apply(pa.hash, ir.b_corrected) if pa.hash is not None
                      else np.zeros(0, dtype=np.uint8))
    return tr


def pp_budget(params: ProtocolParams) -> float:
    return math.ceil(hmax_b_given_a(params.t, params.nu, params.alpha, params.delta1))


def run_trials(params: ProtocolParams, trials: int, device_factory=None, **kw) -> list[Transcript]:
    """``trials`` independent runs with per-trial streams derived from params.rng_seed."""
    out = []
    dev = None if device_factory is None else device_factory()
    for k in range(trials):
        out.append(run(params, dev, trial_rng(params.rng_seed, k), **kw))
    return out


# --------------------------------------------------------------------------- statistics


@dataclass(frozen=True)
class EventTails:
    trials: int
    freq_not_e1: float
    freq_not_e2: float
    freq_not_e3: float
    freq_not_e3_and_accept: float
    abort_rate: float
    ref_e1_e2: float  # exp(-2 delta1^2 t)
    ref_e3: float  # exp(-2 delta1^2 gamma t)


def _events(tr: Transcript, params: ProtocolParams) -> tuple[bool, bool, bool]:
    game, t, d1 = tr.game, tr.t, params.delta1
    e1 = tr.s.size / t >= params.gamma - d1
    qa, qb = game.questions_a, game.questions_b
    jbar = np.sum((tr.x[tr.j] == qa.index(0)) & (tr.y[tr.j] == qb.index(2)))
    e2 = jbar / t >= (1 - params.alpha) ** 2 * (1 - params.nu) - d1
    w = game.predicate[tr.x[tr.j], tr.y[tr.j], tr.a[tr.j], tr.b[tr.j]].sum()
    e3 = w / t >= params.omega_th - d1
    return bool(e1), bool(e2), bool(e3)


def event_tails(transcripts, params: ProtocolParams) -> EventTails:
    if len(transcripts) < 100:
        raise ValueError("event tails need at least 100 transcripts")
    ev = np.array([_events(tr, params) for tr in transcripts])
    acc = np.array([not tr.aborted for tr in transcripts])
    t = transcripts[0].t
    return EventTails(len(transcripts), float(1 - ev[:, 0].mean()), float(1 - ev[:, 1].mean()),
                      float(1 - ev[:, 2].mean()), float(np.mean(~ev[:, 2] & acc)),
                      float(1 - acc.mean()), math.exp(-2 * params.delta1**2 * t),
                      math.exp(-2 * params.delta1**2 * params.gamma * t))


def relative_error_on_j(tr: Transcript) -> float:
    if tr.aborted:
        raise ValueError("relative error is only defined for accepted runs")
    return float(np.mean(tr.raw_key_a != tr.raw_key_b))


def abort_hoeffding_bound(win_prob: float, params: ProtocolParams) -> float:
    """Hoeffding bound exp(-2 gamma^2 (w - omega_th)^2 t) on the abort probability.

    The test statistic is a sum of t i.i.d. terms T_j V_j with mean gamma w, compared with
    gamma omega_th t.
    """
    gap = params.gamma * (win_prob - params.omega_th)
    return 1.0 if gap <= 0 else math.exp(-2 * gap**2 * params.t)


def question_marginals(transcripts) -> np.ndarray:
    """Empirical (x, y) frequencies pooled over all rounds of all transcripts."""
    game = transcripts[0].game
    counts = np.zeros(game.question_dist.shape)
    for tr in transcripts:
        np.add.at(counts, (tr.x, tr.y), 1)
    return counts / counts.sum()


def win_fraction_on_s(transcripts) -> float:
    wins = sum(tr.win_count_on_s for tr in transcripts)
    size = sum(tr.s.size for tr in transcripts)
    return wins / size if size else float("nan")

