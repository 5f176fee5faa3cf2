"""Protocol parameters shared by the simulator and the key-rate engine."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .entropy import omega_window

# anchored 3CHSH: |A| = |B| = 2, |X| = 3, |Y| = 4, test flag T binary
DIM_A = 2
DIM_B = 2
ALPHABET_PRODUCT = DIM_A * DIM_B * 3 * 4 * 2


class ParamError(ValueError):
    pass


def t_of(n: int, delta: float, dim_a: int = DIM_A, dim_b: int = DIM_B) -> int:
    """Raw-key size floor(delta n / (log|A||B| + delta)), required to be at least 1."""
    if n < 1:
        raise ParamError("n must be positive")
    log_ab = math.log2(dim_a * dim_b)
    # guard against 0.1*21/2.1 = 0.99999... style floor errors
    t = math.floor(delta * n / (log_ab + delta) + 1e-9)
    if t < 1:
        raise ParamError(f"t = {t} < 1 for n={n}, delta={delta}")
    # every proper subset C of J satisfies |C| log|A||B| / (n - |C|) <= delta
    c = t - 1
    assert c * log_ab <= delta * (n - c) + 1e-9
    return t


@dataclass(frozen=True)
class ProtocolParams:
    n: int = 10_000
    delta: float = 0.1
    alpha: float = 0.05
    nu: float = 0.05
    gamma: float = 0.5
    omega_th: float | None = None  # None -> window midpoint
    delta1: float = 0.01
    q_noise: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.omega_th is None:
            lo, hi = omega_window(self.alpha, self.nu)
            object.__setattr__(self, "omega_th", (lo + hi) / 2)
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ParamError("n must be a positive integer")
        if not 0 < self.delta < 0.5:
            raise ParamError("delta must lie in (0, 1/2)")
        if not (0 < self.alpha < 0.1 and 0 < self.nu < 0.1):
            raise ParamError("alpha and nu must lie in (0, 0.1)")
        if not 0 < self.gamma <= 1:
            raise ParamError("gamma must lie in (0, 1]")
        if not 0 < self.delta1 < 1:
            raise ParamError("delta1 must lie in (0, 1)")
        if not 0 <= self.q_noise <= 0.1:
            raise ParamError("q_noise must lie in [0, 0.1]")
        if not 0 <= self.rng_seed < 2**64:
            raise ParamError("rng_seed must be a 64-bit unsigned integer")
        lo, hi = omega_window(self.alpha, self.nu)
        if not lo < self.omega_th < hi:
            raise ParamError(f"omega_th={self.omega_th} outside ({lo}, {hi})")
        t_of(self.n, self.delta)

    @property
    def t(self) -> int:
        return t_of(self.n, self.delta)

    def to_dict(self) -> dict:
        return asdict(self)
