"""Block Markov partial decode-forward code with typicality decoders.

Messages are 0-based; index 0 plays the role of the fixed boundary message
"1".  Blocks are 1-based as in the coding scheme: block ``b`` carries the new
message pair ``(m'_b, m''_b)`` for ``b < B`` and the relay forwards ``m'_{b-1}``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..channel import RelayChannel, StateUncertainty, validate
from ..errors import ResourceCapError, ValidationError
from ..probability import state_type_set, typicality_mask

__all__ = [
    "DEFAULT_MEM_CAP",
    "DEFAULT_DELTA",
    "memory_cap",
    "BlockMarkovCode",
    "PermutationTuple",
    "RandomizedCode",
    "DecodeResult",
    "quantize_rate",
    "build_code",
    "transmit_block",
    "relay_decode",
    "backward_decode",
    "randomize",
    "apply_permutation",
    "invert_permutation",
]

DEFAULT_MEM_CAP = 2**24
DEFAULT_DELTA = 0.05


def memory_cap() -> int:
    """Codebook symbol budget; the ``AVRC_MEM_CAP`` environment variable overrides it."""
    raw = os.environ.get("AVRC_MEM_CAP")
    if raw is None:
        return DEFAULT_MEM_CAP
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ValidationError(f"AVRC_MEM_CAP must be an integer, got {raw!r}") from exc


def quantize_rate(rate: float, n: int) -> int:
    """Number of message bits per block, ``round(n R)``; the rate becomes a multiple of 1/n."""
    if rate < 0:
        raise ValidationError("rates must be non-negative")
    return int(round(rate * n))


def _draw_categorical(probs: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.int64]:
    """One draw per row of ``probs[..., k]``."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None]
    return np.minimum((u > cdf).sum(axis=-1), probs.shape[-1] - 1)


def _conditional(joint: NDArray[np.float64], axis_given: tuple[int, ...]) -> NDArray[np.float64]:
    """Normalise ``joint`` over the non-given axes (rows with zero mass become uniform)."""
    other = tuple(i for i in range(joint.ndim) if i not in axis_given)
    tot = joint.sum(axis=other, keepdims=True)
    size = math.prod(joint.shape[i] for i in other)
    return np.divide(joint, tot, out=np.full(joint.shape, 1.0 / size), where=tot > 0)


@dataclass(eq=False)
class BlockMarkovCode:
    """Random block Markov codebooks and the typicality references used to decode them.

    ``x1[b]`` has shape ``(M', n)``, ``u[b]`` shape ``(M', M', n)`` indexed
    ``[m'_{b-1}, m'_b]`` and ``x[b]`` shape ``(M', M', M'', n)`` indexed
    ``[m'_{b-1}, m'_b, m''_b]``; entry 0 of each list is unused.
    """

    channel: RelayChannel
    n: int
    B: int
    bits_p: int
    bits_pp: int
    p_uxx1: NDArray[np.float64]
    delta: float
    Q: StateUncertainty
    seed: int
    flavor: str
    x1: list
    u: list
    x: list
    state_types: NDArray[np.float64]
    ref_relay: NDArray[np.float64] = field(repr=False)
    ref_dest1: NDArray[np.float64] = field(repr=False)
    ref_dest2: NDArray[np.float64] = field(repr=False)

    @property
    def m_p(self) -> int:
        return 2**self.bits_p

    @property
    def m_pp(self) -> int:
        return 2**self.bits_pp

    @property
    def rate_p(self) -> float:
        return self.bits_p / self.n

    @property
    def rate_pp(self) -> float:
        return self.bits_pp / self.n

    @property
    def nu(self) -> int:
        return self.p_uxx1.shape[0]

    @property
    def message_count(self) -> int:
        return (self.m_p * self.m_pp) ** (self.B - 1)

    def draw_messages(self, rng: np.random.Generator) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Uniform messages with boundary entries fixed: arrays of length ``B + 1``."""
        mp = np.zeros(self.B + 1, dtype=np.int64)
        mpp = np.zeros(self.B + 1, dtype=np.int64)
        if self.B > 1:
            mp[1 : self.B] = rng.integers(self.m_p, size=self.B - 1)
            mpp[1 : self.B] = rng.integers(self.m_pp, size=self.B - 1)
        return mp, mpp

    # Jammer interface -----------------------------------------------------

    def phantom_inputs(self, rng: np.random.Generator) -> NDArray[np.int64]:
        mp, mpp = self.draw_messages(rng)
        return np.concatenate([self.x[b][mp[b - 1], mp[b], mpp[b]] for b in range(1, self.B + 1)])

    def phantom_relay_path(
        self, w_y1: NDArray[np.float64], rng: np.random.Generator
    ) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Run a phantom sender and relay through a state-free relay link ``w_y1[x, x1, y1]``."""
        mp, mpp = self.draw_messages(rng)
        est = 0
        x1s, y1s = [], []
        for b in range(1, self.B + 1):
            x, x1 = transmit_block(self, b, mp, mpp, est)
            y1 = _draw_categorical(w_y1[x, x1], rng)
            x1s.append(x1)
            y1s.append(y1)
            if b < self.B:
                est = relay_decode(self, b, y1, est)
        return np.concatenate(x1s), np.concatenate(y1s)


def _references(channel: RelayChannel, P: NDArray[np.float64], types: NDArray[np.float64]):
    W = channel.kernel
    Wt = np.einsum("ts,abscd->tabcd", types, W)
    w_y = Wt.sum(axis=4)  # [t, x, x1, y]
    w_y1 = Wt.sum(axis=3)  # [t, x, x1, y1]
    relay = np.einsum("uxa,txae->tuae", P, w_y1)
    dest1 = np.einsum("uxa,txay->tuay", P, w_y)
    dest2 = P[None, :, :, :, None] * w_y[:, None]

    def flat_unique(ref):
        flat = ref.reshape(ref.shape[0], -1)
        return np.unique(np.round(flat, 15), axis=0)

    return flat_unique(relay), flat_unique(dest1), flat_unique(dest2)


def build_code(
    channel: RelayChannel,
    p_uxx1: ArrayLike,
    n: int,
    B: int,
    rate_p: float,
    rate_pp: float,
    delta: float = DEFAULT_DELTA,
    Q: StateUncertainty | None = None,
    seed: int = 0,
    flavor: str = "robust",
    mem_cap: int | None = None,
) -> BlockMarkovCode:
    """Draw ``B`` independent codebooks from ``p(u, x, x1)``.

    ``x1(m')`` is i.i.d. ``P_X1``, ``u(m'|m'_prev)`` is drawn conditionally on
    ``x1(m'_prev)``, and ``x(m', m''|m'_prev)`` conditionally on both.  Rates are
    quantised to multiples of ``1/n``.  Raises ``ResourceCapError`` when the
    codebooks would hold more than ``mem_cap`` symbols.
    """
    validate(channel)
    P = np.asarray(p_uxx1, dtype=np.float64)
    if P.ndim == 2:
        P = P[None]
    if P.ndim != 3 or P.shape[1:] != (channel.nx, channel.nx1):
        raise ValidationError(
            f"p(u, x, x1) must have shape (|U|, {channel.nx}, {channel.nx1}), got {P.shape}"
        )
    if np.any(P < 0) or abs(P.sum() - 1) > 1e-9:
        raise ValidationError("p(u, x, x1) must be a probability tensor")
    if n < 1 or B < 1:
        raise ValidationError("block length and number of blocks must be positive")
    if delta < 0:
        raise ValidationError("delta must be non-negative")
    Q = Q if Q is not None else StateUncertainty.simplex(channel.ns)
    if Q.size != channel.ns:
        raise ValidationError("Q and the channel disagree on the state alphabet")
    kp, kpp = quantize_rate(rate_p, n), quantize_rate(rate_pp, n)
    cap = memory_cap() if mem_cap is None else int(mem_cap)
    # Exact integer arithmetic: 2**k can be astronomically large.
    mp, mpp = 2**kp, 2**kpp
    total = B * n * (mp + mp * mp + mp * mp * mpp)
    if total > cap:
        raise ResourceCapError(
            f"codebooks need {total:.3e} symbols (M'={mp}, M''={mpp}, n={n}, B={B}), "
            f"above the cap of {cap}; raise AVRC_MEM_CAP to override"
        )

    p_x1 = P.sum(axis=(0, 1))
    p_u_given_x1 = _conditional(P.sum(axis=1), (1,)).T  # [x1, u]
    p_x_given_ux1 = np.moveaxis(_conditional(P, (0, 2)), 1, 2)  # [u, x1, x]
    x1s, us, xs = [None], [None], [None]
    for b in range(1, B + 1):
        rng = np.random.default_rng([seed, b])
        x1 = _draw_categorical(np.broadcast_to(p_x1, (mp, n, channel.nx1)), rng)
        u = _draw_categorical(p_u_given_x1[x1[:, None, :]].repeat(mp, axis=1), rng)
        x = np.empty((mp, mp, mpp, n), dtype=np.int64)
        for prev in range(mp):  # chunked to bound the size of the probability table
            table = p_x_given_ux1[u[prev][:, None, :], x1[prev][None, None, :]]
            x[prev] = _draw_categorical(np.broadcast_to(table, (mp, mpp, n, channel.nx)), rng)
        x1s.append(x1)
        us.append(u)
        xs.append(x)

    types = state_type_set(Q, n, delta, as_array=True)
    if len(types) == 0:
        raise ValidationError("no state type lies within delta of Q; increase delta")
    r, d1, d2 = _references(channel, P, types)
    return BlockMarkovCode(
        channel=channel,
        n=n,
        B=B,
        bits_p=kp,
        bits_pp=kpp,
        p_uxx1=P,
        delta=float(delta),
        Q=Q,
        seed=seed,
        flavor=flavor,
        x1=x1s,
        u=us,
        x=xs,
        state_types=types,
        ref_relay=r,
        ref_dest1=d1,
        ref_dest2=d2,
    )


def _check_block(code: BlockMarkovCode, b: int) -> None:
    if not 1 <= b <= code.B:
        raise ValidationError(f"block index {b} outside [1, {code.B}]")


def transmit_block(
    code: BlockMarkovCode,
    b: int,
    mp: ArrayLike,
    mpp: ArrayLike,
    relay_estimate_prev: int,
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Channel inputs of block ``b``: ``x_b(m'_b, m''_b | m'_{b-1})`` and ``x1_b(m~'_{b-1})``.

    ``mp`` and ``mpp`` are length ``B + 1`` arrays; the boundary entries
    ``mp[0]``, ``mp[B]`` and ``mpp[B]`` are forced to the fixed message.  The
    relay input depends only on the relay's own previous estimate.
    """
    _check_block(code, b)
    mp = np.asarray(mp, dtype=np.int64)
    mpp = np.asarray(mpp, dtype=np.int64)
    if mp.shape != (code.B + 1,) or mpp.shape != (code.B + 1,):
        raise ValidationError(f"message arrays must have length B + 1 = {code.B + 1}")
    prev = 0 if b == 1 else int(mp[b - 1])
    cur_p = 0 if b == code.B else int(mp[b])
    cur_pp = 0 if b == code.B else int(mpp[b])
    if not (0 <= prev < code.m_p and 0 <= cur_p < code.m_p and 0 <= cur_pp < code.m_pp):
        raise ValidationError("message index out of range")
    if not 0 <= relay_estimate_prev < code.m_p:
        raise ValidationError("relay estimate out of range")
    return code.x[b][prev, cur_p, cur_pp], code.x1[b][relay_estimate_prev]


def _typical_candidates(
    cells: NDArray[np.int64], n_cells: int, ref: NDArray[np.float64], code: BlockMarkovCode
) -> NDArray[np.bool_]:
    """For candidate cell sequences ``cells[m, i]``, is some reference row matched?"""
    m = cells.shape[0]
    offsets = (np.arange(m, dtype=np.int64) * n_cells)[:, None]
    counts = np.bincount((cells + offsets).ravel(), minlength=m * n_cells).reshape(m, n_cells)
    return typicality_mask(counts, ref, code.n, code.delta, code.flavor).any(axis=1)


def relay_decode(code: BlockMarkovCode, b: int, y1: ArrayLike, prev_estimate: int) -> int:
    """Relay estimate of ``m'_b`` from block ``b``.

    Returns the unique ``m`` with ``(u_b(m|prev), x1_b(prev), y1)`` typical for
    some state type in the set; none or several candidates give the fixed
    message 0.
    """
    _check_block(code, b)
    ch = code.channel
    y1 = np.asarray(y1, dtype=np.int64)
    u = code.u[b][prev_estimate]  # (M', n)
    x1 = code.x1[b][prev_estimate]  # (n,)
    cells = (u * ch.nx1 + x1[None]) * ch.ny1 + y1[None]
    hits = np.flatnonzero(
        _typical_candidates(cells, code.nu * ch.nx1 * ch.ny1, code.ref_relay, code)
    )
    return int(hits[0]) if hits.size == 1 else 0


@dataclass
class DecodeResult:
    """Destination estimates (arrays of length ``B + 1``, boundary entries 0) and error flags."""

    mp_hat: NDArray[np.int64]
    mpp_hat: NDArray[np.int64]
    flags_p: NDArray[np.bool_]
    flags_pp: NDArray[np.bool_]

    @property
    def any_flag(self) -> bool:
        return bool(self.flags_p.any() or self.flags_pp.any())


def backward_decode(code: BlockMarkovCode, ys: ArrayLike) -> DecodeResult:
    """Two-pass backward decoding of all ``B`` received blocks (``ys`` has shape ``(B, n)``).

    Pass 1 recovers ``m'_b`` from block ``b + 1`` for ``b = B-1, ..., 1``;
    pass 2 recovers ``m''_b`` from block ``b``.  When no candidate or more than
    one is typical the block is flagged and the fixed message is carried on.
    A pass whose message set has a single element is skipped.
    """
    ch = code.channel
    ys = np.asarray(ys, dtype=np.int64)
    if ys.shape != (code.B, code.n):
        raise ValidationError(f"expected received blocks of shape {(code.B, code.n)}, got {ys.shape}")
    B = code.B
    mp_hat = np.zeros(B + 1, dtype=np.int64)
    mpp_hat = np.zeros(B + 1, dtype=np.int64)
    flags_p = np.zeros(B + 1, dtype=bool)
    flags_pp = np.zeros(B + 1, dtype=bool)
    # A part with a single message needs no decision (its index is known).
    c1 = code.nu * ch.nx1 * ch.ny
    for b in range(B - 1, 0, -1) if code.m_p > 1 else ():
        nxt = mp_hat[b + 1]
        y = ys[b]  # block b + 1
        u = code.u[b + 1][:, nxt]  # (M', n) over candidate m'_b
        x1 = code.x1[b + 1]  # (M', n)
        cells = (u * ch.nx1 + x1) * ch.ny + y[None]
        hits = np.flatnonzero(_typical_candidates(cells, c1, code.ref_dest1, code))
        if hits.size == 1:
            mp_hat[b] = hits[0]
        else:
            flags_p[b] = True
    c2 = code.nu * ch.nx * ch.nx1 * ch.ny
    for b in range(B - 1, 0, -1) if code.m_pp > 1 else ():
        prev, cur = mp_hat[b - 1], mp_hat[b]
        y = ys[b - 1]
        u = code.u[b][prev, cur]  # (n,)
        x = code.x[b][prev, cur]  # (M'', n)
        x1 = code.x1[b][prev]  # (n,)
        cells = ((u[None] * ch.nx + x) * ch.nx1 + x1[None]) * ch.ny + y[None]
        hits = np.flatnonzero(_typical_candidates(cells, c2, code.ref_dest2, code))
        if hits.size == 1:
            mpp_hat[b] = hits[0]
        else:
            flags_pp[b] = True
    return DecodeResult(mp_hat, mpp_hat, flags_p, flags_pp)


# --------------------------------------------------------------------------
# Permutation robustification


def apply_permutation(perm: NDArray[np.int64], seq: ArrayLike) -> NDArray[np.int64]:
    """``(pi s)_i = s_{pi(i)}``."""
    return np.asarray(seq)[perm]


def invert_permutation(perm: NDArray[np.int64], seq: ArrayLike) -> NDArray[np.int64]:
    """``pi^{-1} s``, the sequence ``t`` with ``pi t = s``."""
    seq = np.asarray(seq)
    out = np.empty_like(seq)
    out[perm] = seq
    return out


@dataclass(frozen=True)
class PermutationTuple:
    """``B`` permutations of ``{0, ..., n-1}``; ``perms[b-1]`` belongs to block ``b``."""

    perms: NDArray[np.int64]

    def __post_init__(self) -> None:
        perms = np.atleast_2d(np.asarray(self.perms, dtype=np.int64))
        n = perms.shape[1]
        for p in perms:
            if not np.array_equal(np.sort(p), np.arange(n)):
                raise ValidationError("every entry of a permutation tuple must be a bijection")
        perms.setflags(write=False)
        object.__setattr__(self, "perms", perms)

    @classmethod
    def identity(cls, B: int, n: int) -> "PermutationTuple":
        return cls(np.tile(np.arange(n), (B, 1)))

    @classmethod
    def draw(cls, B: int, n: int, rng: np.random.Generator) -> "PermutationTuple":
        return cls(np.array([rng.permutation(n) for _ in range(B)]))

    def block(self, b: int) -> NDArray[np.int64]:
        return self.perms[b - 1]


@dataclass(frozen=True)
class RandomizedCode:
    """A block Markov code used with per-block permutations.

    The sender transmits ``pi_b^{-1} x_b``, the relay un-permutes its
    observation with ``pi_b`` before decoding and permutes its next codeword
    with ``pi_{b+1}^{-1}``, and the destination applies ``pi_b`` to block ``b``.
    With ``fresh_per_trial`` the simulator draws a new tuple for every
    transmission (the common randomness of a random code); otherwise
    ``perms`` is used throughout.
    """

    code: BlockMarkovCode
    perms: PermutationTuple
    fresh_per_trial: bool = True


def randomize(code: BlockMarkovCode, seed: int, fresh_per_trial: bool = True) -> RandomizedCode:
    rng = np.random.default_rng([seed, 0x5EED])
    return RandomizedCode(code, PermutationTuple.draw(code.B, code.n, rng), fresh_per_trial)
