"""Finite-size key length, von Neumann proxy rate, parameter search and scaling fits."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import entropy as en
from .entropy import BoundConstants, BoundError
from .params import ALPHABET_PRODUCT, DIM_A, ParamError, ProtocolParams

DEFAULT_EPS_PA = 1e-10
STATUS_OK = "ok"
STATUS_TRIVIAL = "trivially_secure_at_2mu"


class InfeasibleError(BoundError):
    """Parameters for which the finite-size bound is undefined (eps >= 1, mu' + eps' >= 1, ...)."""


def approx_eps(delta: float, alpha: float, constants: BoundConstants) -> float:
    """eps = c_eps * delta^(1/16) / alpha^3."""
    return constants.c_eps * delta ** (1 / 16) / alpha**3


def _mu_app(eps: float) -> float:
    # eps = 0 is the c_eps = 0 limit, where mu -> 0
    return 0.0 if eps == 0 else en.mu_of_eps_application(eps, ALPHABET_PRODUCT)


def default_eps_prime(mu_p: float) -> float:
    return min(0.1, (1 - mu_p) / 2)


@dataclass(frozen=True)
class KeyRateReport:
    params: ProtocolParams
    constants: BoundConstants
    t: int
    eps: float
    mu: float
    mu_prime: float
    eps_prime: float
    eps_pa: float
    p_not_f: float
    h_tradeoff: float
    mu_loss: float
    eat_bound: float
    hmax_removed: float
    test_leak: float
    leak_ir: float
    key_length: int
    rate: float
    security_eps: float
    vn_proxy_rate: float
    prefactor: float
    combined_loss: float
    status: str = STATUS_OK

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["constants"] = asdict(self.constants)
        return d


def finite_size_key_length(params: ProtocolParams, constants: BoundConstants = BoundConstants(), *,
                           p_not_f: float = 1.0, eps_prime: float | None = None,
                           eps_pa: float = DEFAULT_EPS_PA) -> KeyRateReport:
    """Assemble the finite-size key length term by term.

    key = PA-length( t[(1-a)F(g(w_th)) - c_mu sqrt(mu)/(nu gamma)] - t h(2(nu+a+d1))
                     - 2 gamma t log|A| - [t h(2(nu+a+d1)) + c_additive] ).

    Raises InfeasibleError when eps >= 1 or mu' + eps' >= 1. If P(not F) < 2 mu the protocol
    is secure at level 2 mu trivially and the report carries that status with zero key.
    """
    if not 0 < p_not_f <= 1:
        raise ParamError("P(not F) must lie in (0, 1]")
    p = params
    t = p.t
    eps = approx_eps(p.delta, p.alpha, constants)
    if eps >= 1:
        raise InfeasibleError(f"eps = {eps:.4g} >= 1; delta too large for alpha = {p.alpha}")
    mu = _mu_app(eps)
    status = STATUS_TRIVIAL if p_not_f < 2 * mu else STATUS_OK
    mu_p = en.mu_prime(mu, p_not_f) if status == STATUS_OK else 2 * mu
    eps_p = default_eps_prime(mu_p) if eps_prime is None else eps_prime
    if status == STATUS_OK and (mu_p + eps_p >= 1 or eps_p <= 0):
        raise InfeasibleError(f"mu' + eps' = {mu_p + eps_p:.4g} must be < 1")

    h = en.single_round_bound(p.omega_th, p.alpha, p.nu)
    mu_loss = constants.c_mu_term * math.sqrt(mu) / (p.nu * p.gamma)
    eat = t * (h - mu_loss)
    hmax = en.hmax_b_given_a(t, p.nu, p.alpha, p.delta1)
    tl = en.test_leak(t, p.gamma, DIM_A)
    leak = en.leak_ir(t, p.nu, p.alpha, p.delta1, constants.c_additive)
    if status == STATUS_OK:
        key = en.pa_output_length(max(eat - hmax - tl - leak, 0.0), eps_pa)
        sec = mu_p + 8 * eps_p + eps_pa
    else:
        key, sec = 0, 2 * mu
    h2 = en.binary_entropy(2 * (p.nu + p.alpha + p.delta1))
    return KeyRateReport(
        params=p, constants=constants, t=t, eps=eps, mu=mu, mu_prime=mu_p, eps_prime=eps_p,
        eps_pa=eps_pa, p_not_f=p_not_f, h_tradeoff=h, mu_loss=mu_loss, eat_bound=eat,
        hmax_removed=hmax, test_leak=tl, leak_ir=leak, key_length=key, rate=key / p.n,
        security_eps=sec, vn_proxy_rate=vn_proxy_rate(p, p.q_noise, constants),
        prefactor=h - mu_loss - 2 * h2 - 2 * p.gamma * math.log2(DIM_A),
        combined_loss=combined_loss(p.alpha, p.nu, p.gamma, p.delta1,
                                    en.g_alpha_nu(p.omega_th, p.alpha, p.nu)),
        status=status)


def prefactor(alpha: float, nu: float, gamma: float, delta1: float, g: float,
              mu_loss: float = 0.0) -> float:
    """Per-raw-key-bit rate (1-a)F(g) - mu_loss - 2h(2(nu+a+d1)) - 2 gamma log|A|."""
    return ((1 - alpha) * en.capital_f(g) - mu_loss
            - 2 * en.binary_entropy(2 * (nu + alpha + delta1)) - 2 * gamma * math.log2(DIM_A))


def combined_loss(alpha: float, nu: float, gamma: float, delta1: float, g: float) -> float:
    """a F(g) + 2h(2(nu+a+d1)) + 2 gamma log|A|, the gap between F(g) and the prefactor."""
    return (alpha * en.capital_f(g) + 2 * en.binary_entropy(2 * (nu + alpha + delta1))
            + 2 * gamma * math.log2(DIM_A))


def g_for_f(target: float) -> float:
    """Solve F(g) = target on [3/4, (2+sqrt2)/4] by bisection (F is increasing)."""
    if not 0 <= target <= 1:
        raise BoundError("F takes values in [0, 1]")
    lo, hi = en.CHSH_CLASSICAL, en.CHSH_QUANTUM
    for _ in range(200):
        mid = (lo + hi) / 2
        if en.capital_f(mid) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def vn_proxy_rate(params: ProtocolParams, q_noise: float | None = None,
                  constants: BoundConstants = BoundConstants()) -> float:
    """(t/n)(F(g(w_th)) - c_mu (eps/nu + delta^(1/16) log(1/delta) / (a^3 nu)) - h(2a + nu + Q))."""
    p = params
    q = p.q_noise if q_noise is None else q_noise
    if not 0 <= q <= 0.1:
        raise ParamError("Q must lie in [0, 0.1]")
    eps = approx_eps(p.delta, p.alpha, constants)
    loss = constants.c_mu_term * (eps / p.nu
                                  + p.delta ** (1 / 16) / (p.alpha**3 * p.nu) * math.log2(1 / p.delta))
    f = en.capital_f(en.g_alpha_nu(p.omega_th, p.alpha, p.nu))
    return p.t / p.n * (f - loss - en.binary_entropy(2 * p.alpha + p.nu + q))


# --------------------------------------------------------------------------- search


@dataclass(frozen=True)
class SearchSpace:
    deltas: tuple = tuple(10.0 ** -k for k in (300, 250, 200, 150, 100, 60, 30, 12))
    alphas: tuple = (0.001, 0.005, 0.01, 0.05)
    nus: tuple = (0.001, 0.005, 0.01, 0.05)
    gammas: tuple = (0.001, 0.01, 0.1, 0.5)
    omega_fracs: tuple = (0.5, 0.8, 0.9, 0.95, 0.99)  # position of w_th inside the window
    delta1s: tuple = (0.001, 0.005, 0.01)
    sweeps: int = 3

    def __post_init__(self):
        for k in ("deltas", "alphas", "nus", "gammas", "omega_fracs", "delta1s"):
            if len(getattr(self, k)) == 0:
                raise ParamError(f"search grid '{k}' is empty")


@dataclass(frozen=True)
class OptimizeResult:
    feasible: bool
    best: KeyRateReport | None
    evaluated: int
    reports: list = field(default_factory=list, repr=False)


def _omega_at(alpha, nu, frac):
    lo, hi = en.omega_window(alpha, nu)
    return lo + frac * (hi - lo)


def _try_report(n, delta, alpha, nu, gamma, frac, d1, constants, kw):
    try:
        prm = ProtocolParams(n=n, delta=delta, alpha=alpha, nu=nu, gamma=gamma,
                             omega_th=_omega_at(alpha, nu, frac), delta1=d1)
        return finite_size_key_length(prm, constants, **kw)
    except (BoundError, ParamError):
        return None


def optimize(target_security: float, n: int, space: SearchSpace = SearchSpace(),
             constants: BoundConstants = BoundConstants(), *, keep_all: bool = False,
             **kw) -> OptimizeResult:
    """Maximise the rate subject to security_eps <= target.

    (delta, alpha) is enumerated exhaustively since it alone fixes eps and mu; for each pair a
    deterministic coordinate descent runs over (nu, gamma, w_th position, delta1). Ties keep
    the first-found point.
    """
    best, evaluated, reports = None, 0, []

    def better(r):
        return r is not None and r.security_eps <= target_security and (
            best is None or r.rate > best.rate)

    for delta, alpha in itertools.product(space.deltas, space.alphas):
        axes = [space.nus, space.gammas, space.omega_fracs, space.delta1s]
        idx = [0, 0, 0, 0]
        local = None
        for _ in range(space.sweeps):
            changed = False
            for ax in range(4):
                for k in range(len(axes[ax])):
                    trial = list(idx)
                    trial[ax] = k
                    r = _try_report(n, delta, alpha, *(axes[a][trial[a]] for a in range(4)),
                                    constants, kw)
                    evaluated += 1
                    if keep_all and r is not None:
                        reports.append(r)
                    ok = r is not None and r.security_eps <= target_security
                    if ok and (local is None or r.rate > local.rate):
                        local, idx, changed = r, trial, changed or trial != idx
            if not changed:
                break
        if better(local):
            best = local
    return OptimizeResult(best is not None, best, evaluated, reports)


# --------------------------------------------------------------------------- scaling fits


def _loglog_slope(xs, ys) -> float:
    lx, ly = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    if lx.size < 3 or np.ptp(lx) == 0:
        raise BoundError("degenerate sweep")
    return float(np.polyfit(lx, ly, 1)[0])


def scaling_exponent_fit(constants: BoundConstants = BoundConstants(), *, alpha: float = 1.0,
                         deltas=None, p_not_f: float = 1.0) -> float:
    """Least-squares slope of log mu' against log delta (eps from delta via c_eps, alpha)."""
    if deltas is None:
        deltas = np.logspace(-60, -12, 49)
    deltas = np.asarray(deltas, dtype=float)
    if np.log10(deltas.max() / deltas.min()) < 6:
        raise BoundError("the delta sweep must span at least six decades")
    xs, ys = [], []
    for d in deltas:
        eps = approx_eps(d, alpha, constants)
        if 0 < eps < 1:
            xs.append(d)
            ys.append(en.mu_prime(_mu_app(eps), p_not_f))
    return _loglog_slope(xs, ys)


def mu_eps_slope(eps_values=None) -> float:
    """Slope of log mu against log eps for the application variant of mu."""
    if eps_values is None:
        eps_values = np.logspace(-60, -12, 49)
    xs = [e for e in np.asarray(eps_values, dtype=float) if 0 < e < 1]
    return _loglog_slope(xs, [_mu_app(e) for e in xs])


# --------------------------------------------------------------------------- emitters

CSV_FIELDS = ("n", "delta", "alpha", "nu", "gamma", "omega_th", "delta1", "t", "eps", "mu",
              "mu_prime", "eps_prime", "h_tradeoff", "eat_bound", "hmax_removed", "test_leak",
              "leak_ir", "key_length", "rate", "security_eps", "vn_proxy_rate", "status")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        d = r.to_dict()
        row = {**d["params"], **d}
        w.writerow({k: row[k] for k in CSV_FIELDS})
    return buf.getvalue()

