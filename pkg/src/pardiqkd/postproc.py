"""Classical post-processing: one-way syndrome reconciliation, key validation, Toeplitz PA.

Bit strings are numpy uint8 arrays of 0/1.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .entropy import pa_output_length

TAG_BITS = 64
ML_DECODE_LIMIT = 24
SEARCH_CAP = 200_000


class PostprocError(ValueError):
    pass


def as_bits(x) -> np.ndarray:
    b = np.asarray(x, dtype=np.uint8).ravel()
    if b.size and b.max() > 1:
        raise PostprocError("bit arrays must contain only 0 and 1")
    return b


def bits_to_hex(bits) -> str:
    """Lowercase hex of the bits, MSB first, zero-padded on the right to whole bytes."""
    bits = as_bits(bits)
    return np.packbits(bits).tobytes().hex() if bits.size else ""


def hex_to_bits(s: str, n_bits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes.fromhex(s), dtype=np.uint8))[:n_bits]


# --------------------------------------------------------------------------- Toeplitz hashing


@dataclass(frozen=True, eq=False)
class ToeplitzHash:
    """rows x cols Toeplitz matrix over GF(2), T[i, j] = seed[i - j + cols - 1]."""

    rows: int
    cols: int
    seed_bits: np.ndarray

    def __post_init__(self):
        seed = as_bits(self.seed_bits)
        if self.rows < 0 or self.cols < 1:
            raise PostprocError("Toeplitz shape must be rows >= 0, cols >= 1")
        if seed.size != max(self.rows + self.cols - 1, 0):
            raise PostprocError(f"seed needs {self.rows + self.cols - 1} bits, got {seed.size}")
        object.__setattr__(self, "seed_bits", seed)

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "ToeplitzHash":
        return cls(rows, cols, rng.integers(0, 2, size=max(rows + cols - 1, 0), dtype=np.uint8))

    def matrix(self) -> np.ndarray:
        i = np.arange(self.rows)[:, None]
        j = np.arange(self.cols)[None, :]
        return self.seed_bits[i - j + self.cols - 1] if self.rows else np.zeros((0, self.cols), np.uint8)


def toeplitz_apply(h: ToeplitzHash, bits) -> np.ndarray:
    bits = as_bits(bits)
    if bits.size != h.cols:
        raise PostprocError(f"input has {bits.size} bits, hash expects {h.cols}")
    return (h.matrix().astype(np.int64) @ bits % 2).astype(np.uint8)


def collision_probabilities(rows: int, cols: int) -> np.ndarray:
    """Exact Pr_seed[h(u) = h(v)] for every pair u != v, by enumerating all seeds.

    Returned as a (2^cols, 2^cols) table (diagonal set to 0). Exponential; tiny sizes only.
    """
    n_seed = rows + cols - 1
    if n_seed > 16 or cols > 10:
        raise PostprocError("exhaustive collision count is limited to tiny hashes")
    inputs = ((np.arange(2**cols)[:, None] >> np.arange(cols - 1, -1, -1)) & 1).astype(np.int64)
    counts = np.zeros((2**cols, 2**cols), dtype=np.int64)
    weights = 1 << np.arange(rows - 1, -1, -1)
    for s in range(2**n_seed):
        seed = ((s >> np.arange(n_seed - 1, -1, -1)) & 1).astype(np.uint8)
        m = ToeplitzHash(rows, cols, seed).matrix().astype(np.int64)
        out = (inputs @ m.T % 2) @ weights
        counts += out[:, None] == out[None, :]
    p = counts / 2**n_seed
    np.fill_diagonal(p, 0.0)
    return p


# --------------------------------------------------------------------------- reconciliation


@dataclass(frozen=True, eq=False)
class IrMessage:
    syndrome: np.ndarray
    tag: np.ndarray
    code_seed: np.ndarray  # bits defining the parity-check matrix and the tag hash

    def __len__(self) -> int:
        return self.syndrome.size + self.tag.size

    def to_bytes(self) -> bytes:
        """Framed record: for each field a big-endian u32 bit length then the packed bits."""
        out = bytearray()
        for f in (self.syndrome, self.tag, self.code_seed):
            out += struct.pack(">I", f.size) + np.packbits(f).tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "IrMessage":
        fields, off = [], 0
        for _ in range(3):
            if off + 4 > len(data):
                raise PostprocError("truncated IR message")
            (n,) = struct.unpack_from(">I", data, off)
            off += 4
            nb = (n + 7) // 8
            if off + nb > len(data):
                raise PostprocError("truncated IR message")
            fields.append(np.unpackbits(np.frombuffer(data[off:off + nb], dtype=np.uint8))[:n])
            off += nb
        if off != len(data):
            raise PostprocError("trailing bytes after IR message")
        return cls(*fields)


@dataclass(frozen=True, eq=False)
class IrResult:
    b_corrected: np.ndarray
    leak_bits: int
    validated: bool
    message: IrMessage = field(repr=False)
    flips: int = 0
    seed_bits: int = 0  # public code/tag seed length, ledgered separately from leak_bits


def _parity_matrix(m: int, t: int, seed: np.ndarray) -> np.ndarray:
    return seed[: m * t].reshape(m, t) if m else np.zeros((0, t), np.uint8)


def _tag_hash(t: int, tag_len: int, seed: np.ndarray, m: int) -> ToeplitzHash:
    return ToeplitzHash(tag_len, t, seed[m * t: m * t + tag_len + t - 1])


def _cols_as_ints(h: np.ndarray) -> list[int]:
    return [int("".join(map(str, h[:, j])) or "0", 2) for j in range(h.shape[1])]


def _ml_decode(cols: list[int], target: int, t: int) -> int | None:
    """Minimum-weight pattern e with H e = target, by tabulating all 2^t syndromes.

    Patterns are read MSB-first (bit t-1-j flips position j), hence the reversed build order.
    """
    syn = np.zeros(1, dtype=object if t > 62 else np.int64)
    for c in reversed(cols):
        syn = np.concatenate([syn, syn ^ c])
    hits = np.flatnonzero(syn == target)
    if hits.size == 0:
        return None
    weights = np.array([bin(int(k)).count("1") for k in hits])
    return int(hits[np.argmin(weights)])


def _bounded_decode(cols: list[int], target: int, t: int, radius: int, cap: int) -> int | None:
    tried = 0
    for w in range(radius + 1):
        for combo in itertools.combinations(range(t), w):
            s = 0
            for j in combo:
                s ^= cols[j]
            if s == target:
                e = 0
                for j in combo:
                    e |= 1 << (t - 1 - j)
                return e
            tried += 1
            if tried >= cap:
                return None
    return None


def ir_reconcile(a_key, b_key, rate_budget: float, rng: np.random.Generator, *,
                 radius: int | None = None, tag_len: int = TAG_BITS,
                 search_cap: int = SEARCH_CAP) -> IrResult:
    """One-way syndrome reconciliation from Alice to Bob followed by hash validation.

    Alice sends the syndrome of a random linear code with min(ceil(budget), t) parity checks
    plus a Toeplitz tag of her key. Bob searches for the lowest-weight correction (exhaustively
    for t <= 24, else up to ``radius`` flips) and accepts only if the tags match.
    """
    a, b = as_bits(a_key), as_bits(b_key)
    t = a.size
    if b.size != t:
        raise PostprocError("raw keys differ in length")
    if rate_budget < 0:
        raise PostprocError("rate budget must be nonnegative")
    m = min(math.ceil(rate_budget - 1e-12), t)
    seed = rng.integers(0, 2, size=m * t + tag_len + t - 1, dtype=np.uint8)
    H = _parity_matrix(m, t, seed)
    tagger = _tag_hash(t, tag_len, seed, m)
    syndrome = (H.astype(np.int64) @ a % 2).astype(np.uint8)
    msg = IrMessage(syndrome, toeplitz_apply(tagger, a), seed)

    cols = _cols_as_ints(H) if m else [0] * t
    target = int("".join(map(str, ((H.astype(np.int64) @ b + syndrome) % 2).astype(np.uint8))) or "0", 2)
    if t <= ML_DECODE_LIMIT:
        e = _ml_decode(cols, target, t)
    else:
        if radius is None:
            raise PostprocError("bounded-distance decoding needs a search radius")
        e = _bounded_decode(cols, target, t, radius, search_cap)
    if e is None:
        corrected, flips = b.copy(), 0
    else:
        flip = ((e >> np.arange(t - 1, -1, -1)) & 1).astype(np.uint8)
        corrected, flips = b ^ flip, int(flip.sum())
    ok = e is not None and np.array_equal(toeplitz_apply(tagger, corrected), msg.tag)
    return IrResult(corrected, m + tag_len, bool(ok), msg, flips, seed.size)


def bounded_radius(t: int, nu: float, alpha: float, delta1: float) -> int:
    return math.ceil(2 * (nu + alpha + delta1) * t) + 2


# --------------------------------------------------------------------------- privacy amplification


@dataclass(frozen=True, eq=False)
class PaResult:
    key: np.ndarray
    hash: ToeplitzHash | None


def privacy_amplify(raw, hmin_bound: float, eps_pa: float, rng: np.random.Generator) -> PaResult:
    raw = as_bits(raw)
    ell = min(pa_output_length(hmin_bound, eps_pa), raw.size)
    if ell == 0 or raw.size == 0:
        return PaResult(np.zeros(0, dtype=np.uint8), None)
    h = ToeplitzHash.random(ell, raw.size, rng)
    return PaResult(toeplitz_apply(h, raw), h)


# --------------------------------------------------------------------------- leftover hashing oracle


def min_entropy_classical(p_ae: np.ndarray) -> float:
    """H_min(A|E) = -log2 sum_e max_a p(a, e) for a classical joint table p[a, e]."""
    return -math.log2(np.asarray(p_ae).max(axis=0).sum())


@dataclass(frozen=True)
class LeftoverHashResult:
    distance: float
    bound: float
    hmin: float
    out_bits: int

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound + 1e-12


def leftover_hash_exact_test(p_ae: np.ndarray, out_bits: int) -> LeftoverHashResult:
    """Exact (1/2)||rho_ZEF - tau_Z (x) rho_EF||_1 over the full Toeplitz family, E classical.

    ``p_ae`` is the joint table over A = {0,1}^m (rows) and E (columns).
    """
    p_ae = np.asarray(p_ae, dtype=float)
    n_a, n_e = p_ae.shape
    m = int(round(math.log2(n_a)))
    if 2**m != n_a or n_a > 2**12:
        raise PostprocError("A must be {0,1}^m with m <= 12")
    if abs(p_ae.sum() - 1) > 1e-12 or (p_ae < 0).any():
        raise PostprocError("p_ae must be a probability table")
    ell = out_bits
    n_seed = m + ell - 1
    if ell < 0 or ell > m:
        raise PostprocError("output length must lie in [0, m]")
    if ell == 0:
        return LeftoverHashResult(0.0, 2 ** (-0.5 * min_entropy_classical(p_ae)), min_entropy_classical(p_ae), 0)
    if (2**n_seed) * n_a * n_e > 2**31:
        raise PostprocError("exhaustive enumeration too large")
    inputs = ((np.arange(n_a)[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int64)
    weights = 1 << np.arange(ell - 1, -1, -1)
    p_e = p_ae.sum(axis=0)
    total = 0.0
    for s in range(2**n_seed):
        seed = ((s >> np.arange(n_seed - 1, -1, -1)) & 1).astype(np.uint8)
        mat = ToeplitzHash(ell, m, seed).matrix().astype(np.int64)
        z = (inputs @ mat.T % 2) @ weights
        p_ze = np.zeros((2**ell, n_e))
        np.add.at(p_ze, z, p_ae)
        total += 0.5 * np.abs(p_ze - p_e[None, :] / 2**ell).sum()
    dist = total / 2**n_seed
    hmin = min_entropy_classical(p_ae)
    return LeftoverHashResult(float(dist), 2 ** (0.5 * (ell - hmin)), hmin, ell)
