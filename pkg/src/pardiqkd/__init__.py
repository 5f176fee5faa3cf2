"""Simulator and finite-size key-rate engine for parallel device-independent QKD.

Modules:
    games     non-local games, anchoring, classical values, seed randomness
    quantum   exact states, POVMs, strategies and conditional entropies
    entropy   scalar bound functions and the approximate EAT terms
    params    protocol parameters and the raw-key size t
    protocol  Monte Carlo runs of the protocol on i.i.d. devices
    postproc  reconciliation, validation and Toeplitz privacy amplification
    keyrate   finite-size key length, proxy rate, search and scaling fits
    parrep    exact parallel-repetition identity checks at n <= 3
    cli       command-line entry point
"""

from .entropy import BoundConstants
from .games import BOT, GameSpec, anchor, chsh2_spec, chsh3_anchored, chsh3_spec
from .keyrate import KeyRateReport, finite_size_key_length
from .params import ProtocolParams, t_of

__version__ = "0.1.0"

__all__ = ["BOT", "BoundConstants", "GameSpec", "KeyRateReport", "ProtocolParams", "anchor",
           "chsh2_spec", "chsh3_anchored", "chsh3_spec", "finite_size_key_length", "t_of"]
