"""Block Markov coding scheme, permutation robustification and Monte Carlo error estimates."""
from __future__ import annotations

from .code import (
    DEFAULT_DELTA,
    DEFAULT_MEM_CAP,
    BlockMarkovCode,
    DecodeResult,
    PermutationTuple,
    RandomizedCode,
    apply_permutation,
    backward_decode,
    build_code,
    invert_permutation,
    memory_cap,
    quantize_rate,
    randomize,
    relay_decode,
    transmit_block,
)
from .montecarlo import ErrorEstimate, JammerStrategy, estimate_error, run_trial, wilson_interval

__all__ = [
    "DEFAULT_DELTA",
    "DEFAULT_MEM_CAP",
    "BlockMarkovCode",
    "DecodeResult",
    "ErrorEstimate",
    "JammerStrategy",
    "PermutationTuple",
    "RandomizedCode",
    "apply_permutation",
    "backward_decode",
    "build_code",
    "estimate_error",
    "invert_permutation",
    "memory_cap",
    "quantize_rate",
    "randomize",
    "relay_decode",
    "run_trial",
    "transmit_block",
    "wilson_interval",
]
