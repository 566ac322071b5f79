"""Monte Carlo estimation of block error probability under jamming."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import norm

from ..channel import RelayChannel
from ..errors import ValidationError
from ..probability import _as_prob_vector
from ..symmetrizability import build_attack_x, build_attack_x1y1
from .code import (
    BlockMarkovCode,
    PermutationTuple,
    RandomizedCode,
    apply_permutation,
    backward_decode,
    invert_permutation,
    relay_decode,
    transmit_block,
)

__all__ = ["JammerStrategy", "ErrorEstimate", "TrialOutcome", "wilson_interval", "run_trial", "estimate_error"]

JAMMER_KINDS = ("iid", "per_block", "fixed_sequence", "attack_x", "attack_x1y1")


@dataclass(frozen=True)
class JammerStrategy:
    """How the state sequence of one transmission (``n B`` letters) is chosen."""

    kind: str
    q: NDArray[np.float64] | None = None
    qs: NDArray[np.float64] | None = None
    sequence: NDArray[np.int64] | None = None
    J: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        if self.kind not in JAMMER_KINDS:
            raise ValidationError(f"unknown jammer kind {self.kind!r}; expected one of {JAMMER_KINDS}")
        if self.kind == "iid":
            object.__setattr__(self, "q", _as_prob_vector(self.q, "state pmf"))
        elif self.kind == "per_block":
            qs = np.atleast_2d(np.asarray(self.qs, dtype=np.float64))
            for row in qs:
                _as_prob_vector(row, "state pmf")
            object.__setattr__(self, "qs", qs)
        elif self.kind == "fixed_sequence":
            seq = np.asarray(self.sequence)
            if seq.ndim != 1 or not np.issubdtype(seq.dtype, np.integer) or np.any(seq < 0):
                raise ValidationError("fixed state sequence must be a vector of state indices")
            object.__setattr__(self, "sequence", seq.astype(np.int64))
        else:
            if self.J is None:
                raise ValidationError(f"{self.kind} jammer needs a symmetrizing distribution J")
            object.__setattr__(self, "J", np.asarray(self.J, dtype=np.float64))

    @classmethod
    def iid(cls, q: ArrayLike) -> "JammerStrategy":
        return cls("iid", q=np.asarray(q, dtype=float))

    @classmethod
    def per_block(cls, qs: ArrayLike) -> "JammerStrategy":
        return cls("per_block", qs=np.asarray(qs, dtype=float))

    @classmethod
    def fixed(cls, sequence: ArrayLike) -> "JammerStrategy":
        return cls("fixed_sequence", sequence=np.asarray(sequence))

    @classmethod
    def attack_x(cls, J: ArrayLike) -> "JammerStrategy":
        return cls("attack_x", J=np.asarray(J, dtype=float))

    @classmethod
    def attack_x1y1(cls, J: ArrayLike) -> "JammerStrategy":
        return cls("attack_x1y1", J=np.asarray(J, dtype=float))

    def describe(self) -> str:
        if self.kind == "iid":
            return "iid(" + ",".join(f"{v:.6g}" for v in self.q) + ")"
        return self.kind

    def sampler(self, channel: RelayChannel, code: BlockMarkovCode):
        """Return ``draw(rng) -> states`` of length ``n B``."""
        total = code.n * code.B
        ns = channel.ns
        if self.kind == "iid":
            if self.q.size != ns:
                raise ValidationError("jammer pmf does not match the state alphabet")
            return lambda rng: rng.choice(ns, size=total, p=self.q)
        if self.kind == "per_block":
            if self.qs.shape != (code.B, ns):
                raise ValidationError(f"per-block jammer needs a ({code.B}, {ns}) array")
            return lambda rng: np.concatenate([rng.choice(ns, size=code.n, p=q) for q in self.qs])
        if self.kind == "fixed_sequence":
            if self.sequence.size != total or self.sequence.max(initial=0) >= ns:
                raise ValidationError(f"fixed state sequence must have {total} letters below {ns}")
            return lambda rng: self.sequence
        if self.kind == "attack_x":
            return build_attack_x(code, self.J).sample
        return build_attack_x1y1(code, channel, self.J).sample


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    z = float(norm.ppf(0.5 + level / 2))
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class ErrorEstimate:
    trials: int
    errors: int
    p_hat: float
    wilson_interval: tuple[float, float]
    block_errors_p: tuple[int, ...] = ()
    block_errors_pp: tuple[int, ...] = ()
    relay_errors: int = 0
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "errors": self.errors,
            "p_hat": self.p_hat,
            "ci_lo": self.wilson_interval[0],
            "ci_hi": self.wilson_interval[1],
            "block_errors_p": list(self.block_errors_p),
            "block_errors_pp": list(self.block_errors_pp),
            "relay_errors": self.relay_errors,
            **self.details,
        }


@dataclass
class TrialOutcome:
    error: bool
    wrong_p: NDArray[np.bool_]
    wrong_pp: NDArray[np.bool_]
    relay_error: bool


def _channel_sampler(channel: RelayChannel):
    W = channel.kernel
    cdf = np.cumsum(W.reshape(*W.shape[:3], -1), axis=-1)
    ny1 = channel.ny1
    width = cdf.shape[-1]

    def draw(x, x1, s, rng):
        c = cdf[x, x1, s]
        idx = np.minimum((rng.random(x.size)[:, None] > c).sum(axis=1), width - 1)
        return idx // ny1, idx % ny1

    return draw


def run_trial(
    channel: RelayChannel,
    code: "BlockMarkovCode | RandomizedCode",
    states: NDArray[np.int64],
    rng: np.random.Generator,
    perms: PermutationTuple | None = None,
    mp: NDArray[np.int64] | None = None,
    mpp: NDArray[np.int64] | None = None,
) -> TrialOutcome:
    """Send one message tuple through the channel with the given state sequence."""
    base = code.code if isinstance(code, RandomizedCode) else code
    if isinstance(code, RandomizedCode) and perms is None:
        perms = code.perms
    n, B = base.n, base.B
    if mp is None or mpp is None:
        mp, mpp = base.draw_messages(rng)
    draw = _channel_sampler(channel)
    est = 0
    relay_err = False
    ys = np.empty((B, n), dtype=np.int64)
    for b in range(1, B + 1):
        x, x1 = transmit_block(base, b, mp, mpp, est)
        if perms is not None:
            x = invert_permutation(perms.block(b), x)
            x1 = invert_permutation(perms.block(b), x1)
        s = states[(b - 1) * n : b * n]
        y, y1 = draw(x, x1, s, rng)
        if perms is not None:
            y = apply_permutation(perms.block(b), y)
            y1 = apply_permutation(perms.block(b), y1)
        ys[b - 1] = y
        if b < B:
            est = relay_decode(base, b, y1, est)
            relay_err |= bool(est != mp[b])
    res = backward_decode(base, ys)
    wrong_p = res.mp_hat[1:B] != mp[1:B]
    wrong_pp = res.mpp_hat[1:B] != mpp[1:B]
    err = bool(res.any_flag or wrong_p.any() or wrong_pp.any())
    return TrialOutcome(err, wrong_p | res.flags_p[1:B], wrong_pp | res.flags_pp[1:B], relay_err)


def estimate_error(
    channel: RelayChannel,
    code: "BlockMarkovCode | RandomizedCode",
    jammer: JammerStrategy,
    trials: int,
    seed: int = 0,
    threads: int = 1,
) -> ErrorEstimate:
    """Average error probability over uniformly drawn messages.

    Trial ``t`` uses the generators ``default_rng([seed, t, k])`` for
    messages and channel noise (``k=0``), permutations (``k=1``) and the
    jammer (``k=2``), so counts do not depend on ``threads``.  Randomized codes
    with ``fresh_per_trial`` draw a new permutation tuple in every trial.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    base = code.code if isinstance(code, RandomizedCode) else code
    draw_states = jammer.sampler(channel, base)

    def one(t: int) -> TrialOutcome:
        rng = np.random.default_rng([seed, t, 0])
        perms = None
        if isinstance(code, RandomizedCode):
            if code.fresh_per_trial:
                perms = PermutationTuple.draw(base.B, base.n, np.random.default_rng([seed, t, 1]))
            else:
                perms = code.perms
        states = np.asarray(draw_states(np.random.default_rng([seed, t, 2])), dtype=np.int64)
        return run_trial(channel, code, states, rng, perms)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(trials)))
    else:
        outcomes = [one(t) for t in range(trials)]
    errors = int(sum(o.error for o in outcomes))
    k = max(base.B - 1, 0)
    bp = np.zeros(k, dtype=int)
    bpp = np.zeros(k, dtype=int)
    for o in outcomes:
        bp += o.wrong_p
        bpp += o.wrong_pp
    return ErrorEstimate(
        trials=trials,
        errors=errors,
        p_hat=errors / trials,
        wilson_interval=wilson_interval(errors, trials),
        block_errors_p=tuple(int(v) for v in bp),
        block_errors_pp=tuple(int(v) for v in bpp),
        relay_errors=int(sum(o.relay_error for o in outcomes)),
    )
