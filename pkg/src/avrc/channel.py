"""State-dependent relay channels and their structural properties.

A kernel is stored as an array ``W[x, x1, s, y, y1]`` giving
``W(y, y1 | x, x1, s)``; each ``(x, x1, s)`` slice is a pmf over ``(y, y1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ChannelError, ValidationError
from .probability import SUM_TOL, Pmf, StateUncertainty

__all__ = [
    "RelayChannel",
    "StateUncertainty",
    "StructureReport",
    "Factorization",
    "OrthogonalSplit",
    "validate",
    "marginals",
    "check_degraded",
    "check_reversely_degraded",
    "detect_orthogonal_sender",
    "average_channel",
    "is_state_free",
    "structure_report",
    "compose_degraded",
    "compose_reversely_degraded",
    "compose_orthogonal",
    "example1_channel",
]

DEFAULT_TOL = 1e-9
_ZERO = 1e-15


@dataclass(frozen=True, eq=False)
class RelayChannel:
    """Finite state-dependent relay channel ``W(y, y1 | x, x1, s)``."""

    kernel: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.kernel, dtype=np.float64)
        if arr.ndim != 5 or min(arr.shape) < 1:
            raise ChannelError(f"kernel must be a 5-d array [x, x1, s, y, y1], got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "kernel", arr)

    @property
    def sizes(self) -> dict[str, int]:
        nx, nx1, ns, ny, ny1 = self.kernel.shape
        return {"x": nx, "x1": nx1, "s": ns, "y": ny, "y1": ny1}

    @property
    def nx(self) -> int:
        return self.kernel.shape[0]

    @property
    def nx1(self) -> int:
        return self.kernel.shape[1]

    @property
    def ns(self) -> int:
        return self.kernel.shape[2]

    @property
    def ny(self) -> int:
        return self.kernel.shape[3]

    @property
    def ny1(self) -> int:
        return self.kernel.shape[4]

    @classmethod
    def from_function(
        cls,
        nx: int,
        nx1: int,
        ns: int,
        ny: int,
        ny1: int,
        law: Callable[[int, int, int, int, int], float],
    ) -> "RelayChannel":
        """Tabulate ``law(y, y1, x, x1, s)`` into a kernel."""
        W = np.zeros((nx, nx1, ns, ny, ny1))
        for idx in np.ndindex(W.shape):
            x, x1, s, y, y1 = idx
            W[idx] = law(y, y1, x, x1, s)
        return cls(W)

    @classmethod
    def from_outputs(
        cls, w_y: ArrayLike, w_y1: ArrayLike
    ) -> "RelayChannel":
        """Product channel ``W_Y(y|x,x1,s) W_Y1(y1|x,x1,s)``."""
        w_y = np.asarray(w_y, dtype=float)
        w_y1 = np.asarray(w_y1, dtype=float)
        return cls(w_y[..., :, None] * w_y1[..., None, :])


def validate(channel: RelayChannel, tol: float = SUM_TOL) -> None:
    """Raise ``ChannelError`` naming the first invalid ``(x, x1, s)`` slice."""
    W = channel.kernel
    if not np.all(np.isfinite(W)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(W))[0][:3])
        raise ChannelError(f"non-finite entry in row (x, x1, s) = {bad}", bad)
    neg = np.argwhere(W < 0)
    if neg.size:
        bad = tuple(int(i) for i in neg[0][:3])
        raise ChannelError(f"negative probability in row (x, x1, s) = {bad}", bad)
    sums = W.sum(axis=(3, 4))
    off = np.argwhere(np.abs(sums - 1.0) > tol)
    if off.size:
        bad = tuple(int(i) for i in off[0])
        raise ChannelError(
            f"row (x, x1, s) = {bad} sums to {sums[bad]!r}, not 1", bad
        )


def marginals(channel: RelayChannel) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return ``(W_Y1[x, x1, s, y1], W_Y[x, x1, s, y])``."""
    W = channel.kernel
    return W.sum(axis=3), W.sum(axis=4)


def average_channel(channel: RelayChannel, q: "Pmf | ArrayLike") -> RelayChannel:
    """State-averaged kernel ``sum_s q(s) W(.|., ., s)`` as a one-state channel."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (channel.ns,):
        raise ValidationError(f"q must have {channel.ns} entries, got {q.shape}")
    avg = np.einsum("s,abscd->abcd", q, channel.kernel)
    return RelayChannel(avg[:, :, None, :, :])


def is_state_free(kernel: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    """True iff a ``[x, x1, s, ...]`` kernel does not depend on ``s``."""
    K = np.asarray(kernel, dtype=np.float64)
    return bool(np.max(np.abs(K - K[:, :, :1])) <= tol)


@dataclass(frozen=True)
class Factorization:
    """Outcome of a degradedness test.

    ``witness[x1, s, a, b]`` is the common conditional ``p(b | a, x1, s)`` of the
    far output ``b`` given the near output ``a``; rows whose conditioning event
    has zero probability for every ``x`` are set to uniform.
    """

    holds: bool
    witness: NDArray[np.float64]
    max_deviation: float
    reachable: NDArray[np.bool_]

    def __bool__(self) -> bool:
        return self.holds


def _conditional_independence(
    joint: NDArray[np.float64], tol: float
) -> Factorization:
    # joint[x, x1, s, a, b]: is b independent of x given (a, x1, s)?
    p_a = joint.sum(axis=4)
    live = p_a > _ZERO
    cond = np.divide(joint, p_a[..., None], out=np.zeros_like(joint), where=live[..., None])
    nb = joint.shape[4]
    weight = live.astype(float)
    count = weight.sum(axis=0)
    reachable = count > 0
    mean = np.divide(
        (cond * weight[..., None]).sum(axis=0),
        count[..., None],
        out=np.full(joint.shape[1:], 1.0 / nb),
        where=reachable[..., None],
    )
    dev = np.abs(cond - mean[None]) * weight[..., None]
    max_dev = float(dev.max()) if dev.size else 0.0
    return Factorization(max_dev <= tol, mean, max_dev, reachable)


def check_degraded(channel: RelayChannel, tol: float = DEFAULT_TOL) -> Factorization:
    """Test ``W = W_Y1(y1|x,x1,s) p(y|y1,x1,s)``; witness is ``p[x1, s, y1, y]``."""
    return _conditional_independence(np.swapaxes(channel.kernel, 3, 4), tol)


def check_reversely_degraded(channel: RelayChannel, tol: float = DEFAULT_TOL) -> Factorization:
    """Test ``W = W_Y(y|x,x1,s) p(y1|y,x1,s)``; witness is ``p[x1, s, y, y1]``."""
    return _conditional_independence(channel.kernel, tol)


@dataclass(frozen=True)
class OrthogonalSplit:
    """Result of an orthogonal-sender-components test for ``x = x' * |X''| + x''``."""

    holds: bool
    direct_state_free: bool
    w_y: NDArray[np.float64]
    w_y1: NDArray[np.float64]
    max_deviation: float
    split: tuple[int, int]

    def __bool__(self) -> bool:
        return self.holds


def detect_orthogonal_sender(
    channel: RelayChannel, split: tuple[int, int], tol: float = DEFAULT_TOL
) -> OrthogonalSplit:
    """Check ``W = W_Y(y|x',x1,s) W_Y1(y1|x'',x1,s)`` under the declared split.

    ``split = (|X'|, |X''|)`` and input letter ``x`` corresponds to the pair
    ``(x // |X''|, x % |X''|)``.  ``w_y`` is indexed ``[x', x1, s, y]`` and
    ``w_y1`` is indexed ``[x'', x1, s, y1]``.
    """
    n1, n2 = (int(v) for v in split)
    if n1 < 1 or n2 < 1 or n1 * n2 != channel.nx:
        raise ValidationError(
            f"split {split} is incompatible with |X| = {channel.nx}"
        )
    W = channel.kernel.reshape(n1, n2, channel.nx1, channel.ns, channel.ny, channel.ny1)
    w_y_full = W.sum(axis=5)  # [x', x'', x1, s, y]
    w_y1_full = W.sum(axis=4)  # [x', x'', x1, s, y1]
    w_y = w_y_full.mean(axis=1)
    w_y1 = w_y1_full.mean(axis=0)
    dev_y = np.max(np.abs(w_y_full - w_y[:, None]))
    dev_y1 = np.max(np.abs(w_y1_full - w_y1[None]))
    product = w_y[:, None, :, :, :, None] * w_y1[None, :, :, :, None, :]
    dev_prod = np.max(np.abs(W - product))
    max_dev = float(max(dev_y, dev_y1, dev_prod))
    return OrthogonalSplit(
        holds=max_dev <= tol,
        direct_state_free=is_state_free(w_y, tol),
        w_y=w_y,
        w_y1=w_y1,
        max_deviation=max_dev,
        split=(n1, n2),
    )


@dataclass(frozen=True)
class StructureReport:
    degraded: bool
    reversely_degraded: bool
    relay_link_state_free: bool
    direct_link_state_free: bool
    orthogonal_sender: tuple[int, int] | None
    orthogonal_direct_state_free: bool = False

    def as_dict(self) -> dict:
        return {
            "degraded": self.degraded,
            "reversely_degraded": self.reversely_degraded,
            "relay_link_state_free": self.relay_link_state_free,
            "direct_link_state_free": self.direct_link_state_free,
            "orthogonal_sender": list(self.orthogonal_sender) if self.orthogonal_sender else None,
            "orthogonal_direct_state_free": self.orthogonal_direct_state_free,
        }


def structure_report(
    channel: RelayChannel,
    split: tuple[int, int] | None = None,
    tol: float = DEFAULT_TOL,
) -> StructureReport:
    w_y1, w_y = marginals(channel)
    orth = None
    orth_free = False
    if split is not None:
        res = detect_orthogonal_sender(channel, split, tol)
        if res.holds:
            orth = res.split
            orth_free = res.direct_state_free
    return StructureReport(
        degraded=check_degraded(channel, tol).holds,
        reversely_degraded=check_reversely_degraded(channel, tol).holds,
        relay_link_state_free=is_state_free(w_y1, tol),
        direct_link_state_free=is_state_free(w_y, tol),
        orthogonal_sender=orth,
        orthogonal_direct_state_free=orth_free,
    )


def compose_degraded(w_y1: ArrayLike, p_y_given_y1: ArrayLike) -> RelayChannel:
    """``W(y,y1|x,x1,s) = w_y1[x,x1,s,y1] * p[x1,s,y1,y]``."""
    w_y1 = np.asarray(w_y1, dtype=float)
    p = np.asarray(p_y_given_y1, dtype=float)
    W = np.einsum("abse,bsey->absye", w_y1, p)
    return RelayChannel(W)


def compose_reversely_degraded(w_y: ArrayLike, p_y1_given_y: ArrayLike) -> RelayChannel:
    """``W(y,y1|x,x1,s) = w_y[x,x1,s,y] * p[x1,s,y,y1]``."""
    w_y = np.asarray(w_y, dtype=float)
    p = np.asarray(p_y1_given_y, dtype=float)
    W = np.einsum("absy,bsye->absye", w_y, p)
    return RelayChannel(W)


def compose_orthogonal(w_y: ArrayLike, w_y1: ArrayLike) -> RelayChannel:
    """Orthogonal-sender channel from ``w_y[x',x1,s,y]`` and ``w_y1[x'',x1,s,y1]``."""
    w_y = np.asarray(w_y, dtype=float)
    w_y1 = np.asarray(w_y1, dtype=float)
    n1, nx1, ns, ny = w_y.shape
    n2 = w_y1.shape[0]
    ny1 = w_y1.shape[3]
    W = w_y[:, None, :, :, :, None] * w_y1[None, :, :, :, None, :]
    return RelayChannel(W.reshape(n1 * n2, nx1, ns, ny, ny1))


def example1_channel(theta: float) -> RelayChannel:
    """Binary relay channel with ``Y1 = X xor Z``, ``Z ~ Bern(theta)``, and ``Y = X1 + S``."""
    if not 0.0 <= theta <= 1.0:
        raise ValidationError("theta must lie in [0, 1]")

    def law(y, y1, x, x1, s):
        p_y1 = 1.0 - theta if y1 == x else theta
        return p_y1 * (1.0 if y == x1 + s else 0.0)

    return RelayChannel.from_function(2, 2, 2, 3, 2, law)
