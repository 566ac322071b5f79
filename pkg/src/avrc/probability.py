"""Finite-alphabet probability primitives: pmfs, sequences, types and typicality.

Probabilities are float64 arrays.  A pmf must sum to one within ``SUM_TOL``;
set-membership and typicality comparisons use the looser ``MEMBER_TOL``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError

SUM_TOL = 1e-12
MEMBER_TOL = 1e-9

TYPICALITY_FLAVORS = ("robust", "strong")


def _as_prob_vector(values: ArrayLike, what: str = "pmf") -> NDArray[np.float64]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{what} must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{what} has negative entries: {arr}")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise ValidationError(f"{what} sums to {total!r}, not 1")
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector over ``{0, ..., support_size - 1}``."""

    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = _as_prob_vector(self.probs)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def support_size(self) -> int:
        return int(self.probs.size)

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point(cls, size: int, index: int) -> "Pmf":
        probs = np.zeros(size)
        probs[index] = 1.0
        return cls(probs)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __len__(self) -> int:
        return self.support_size

    def __repr__(self) -> str:
        return f"Pmf({np.array2string(self.probs, precision=6)})"

    def allclose(self, other: "Pmf | ArrayLike", atol: float = MEMBER_TOL) -> bool:
        return bool(np.allclose(self.probs, np.asarray(other, dtype=float), atol=atol, rtol=0.0))


@dataclass(frozen=True, eq=False)
class CondPmf:
    """Indexed family of pmfs: ``rows[g]`` is the law given conditioning value ``g``."""

    rows: NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.asarray(self.rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValidationError(f"conditional pmf must be a 2-d array, got shape {arr.shape}")
        for g, row in enumerate(arr):
            _as_prob_vector(row, what=f"row {g} of conditional pmf")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @property
    def given_size(self) -> int:
        return int(self.rows.shape[0])

    @property
    def support_size(self) -> int:
        return int(self.rows.shape[1])

    def __getitem__(self, given: int) -> Pmf:
        return Pmf(self.rows[given])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rows, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Sequence:
    """A length-n string of alphabet indices."""

    symbols: NDArray[np.int64]
    alphabet_size: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.symbols)
        if arr.ndim != 1:
            raise ValidationError("sequence symbols must be one-dimensional")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            raise ValidationError("sequence symbols must be integers")
        arr = arr.astype(np.int64, copy=True)
        if self.alphabet_size < 1:
            raise ValidationError("alphabet_size must be positive")
        if arr.size and (arr.min() < 0 or arr.max() >= self.alphabet_size):
            raise ValidationError(
                f"sequence symbols must lie in [0, {self.alphabet_size}), got range "
                f"[{arr.min()}, {arr.max()}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "symbols", arr)

    def __len__(self) -> int:
        return int(self.symbols.size)


def _coerce_sequence(seq: "Sequence | ArrayLike", alphabet_size: int | None) -> Sequence:
    if isinstance(seq, Sequence):
        return seq
    if alphabet_size is None:
        raise ValidationError("alphabet_size is required for raw symbol arrays")
    return Sequence(np.asarray(seq), alphabet_size)


def empirical_type(seq: "Sequence | ArrayLike", alphabet_size: int | None = None) -> Pmf:
    """Empirical frequency vector of ``seq``; every entry is a multiple of 1/n."""
    seq = _coerce_sequence(seq, alphabet_size)
    n = len(seq)
    if n == 0:
        raise ValidationError("empirical type of an empty sequence is undefined")
    counts = np.bincount(seq.symbols, minlength=seq.alphabet_size)
    return Pmf(counts / n)


def joint_counts(seqs: Iterable["Sequence"]) -> NDArray[np.int64]:
    """Joint symbol counts of equal-length sequences, shaped by their alphabet sizes."""
    seqs = list(seqs)
    if not seqs:
        raise ValidationError("need at least one sequence")
    n = len(seqs[0])
    if any(len(s) != n for s in seqs):
        raise ValidationError(f"sequence lengths differ: {[len(s) for s in seqs]}")
    sizes = tuple(s.alphabet_size for s in seqs)
    flat = np.ravel_multi_index(tuple(s.symbols for s in seqs), sizes) if n else np.zeros(0, int)
    return np.bincount(flat, minlength=math.prod(sizes)).reshape(sizes)


def typicality_mask(
    counts: ArrayLike,
    reference: ArrayLike,
    n: int,
    delta: float,
    flavor: str = "robust",
) -> NDArray[np.bool_]:
    """Vectorised typicality test of joint counts against reference pmfs.

    ``counts`` has shape ``(..., C)`` and ``reference`` shape ``(R, C)``; the
    result has shape ``(..., R)``.  Robust typicality requires
    ``|N(a) - n P(a)| <= delta n P(a)`` for every cell, which forces empty
    cells wherever ``P(a) = 0``.  Strong typicality bounds the absolute
    frequency deviation by ``delta / C`` and keeps the zero-mass clause.
    """
    if flavor not in TYPICALITY_FLAVORS:
        raise ValidationError(f"unknown typicality flavor {flavor!r}")
    if delta < 0:
        raise ValidationError("delta must be non-negative")
    counts = np.asarray(counts, dtype=np.float64)
    ref = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    expected = n * ref
    dev = np.abs(counts[..., None, :] - expected)
    slack = n * MEMBER_TOL
    if flavor == "robust":
        ok = dev <= delta * expected + slack
    else:
        cells = ref.shape[-1]
        ok = (dev <= n * delta / cells + slack) & ((ref > 0) | (counts[..., None, :] == 0))
    return ok.all(axis=-1)


def is_jointly_typical(
    seqs: Iterable["Sequence"],
    joint: "Pmf | ArrayLike",
    delta: float,
    flavor: str = "robust",
) -> bool:
    """True iff the joint type of ``seqs`` is ``delta``-typical for ``joint``.

    ``joint`` is either an array shaped by the sequences' alphabet sizes or a
    ``Pmf`` over their product alphabet in row-major order.
    """
    seqs = list(seqs)
    counts = joint_counts(seqs)
    ref = np.asarray(joint, dtype=np.float64)
    if ref.size != counts.size:
        raise ValidationError(
            f"joint pmf has {ref.size} atoms but the product alphabet has {counts.size}"
        )
    if ref.ndim > 1 and ref.shape != counts.shape:
        raise ValidationError(f"joint pmf shape {ref.shape} != alphabet sizes {counts.shape}")
    _as_prob_vector(ref.ravel(), what="joint pmf")
    n = len(seqs[0])
    if n == 0:
        raise ValidationError("typicality of empty sequences is undefined")
    return bool(typicality_mask(counts.ravel(), ref.ravel()[None, :], n, delta, flavor)[0])


def enumerate_types(n: int, size: int) -> NDArray[np.int64]:
    """All count vectors of length ``size`` summing to ``n`` (stars and bars)."""
    if n < 0 or size < 1:
        raise ValidationError("need n >= 0 and size >= 1")
    if size == 1:
        return np.array([[n]], dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(n + size - 1), size - 1):
        edges = (-1,) + bars + (n + size - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(size)])
    return np.asarray(rows, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class StateUncertainty:
    """The set Q of admissible state distributions.

    ``kind`` is ``"simplex"`` (all pmfs on S), ``"list"`` (finitely many pmfs)
    or ``"box"`` (per-letter intervals intersected with the simplex).  Open
    sets are represented by their closure.
    """

    kind: str
    size: int
    points: NDArray[np.float64] | None = field(default=None)
    lower: NDArray[np.float64] | None = field(default=None)
    upper: NDArray[np.float64] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValidationError("state alphabet size must be positive")
        if self.kind == "simplex":
            return
        if self.kind == "list":
            pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
            if pts.size == 0:
                raise ValidationError("finite state list must be non-empty")
            if pts.shape[1] != self.size:
                raise ValidationError(f"state pmfs must have {self.size} entries")
            for row in pts:
                _as_prob_vector(row, what="state pmf")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)
            return
        if self.kind == "box":
            lo = np.asarray(self.lower, dtype=np.float64)
            hi = np.asarray(self.upper, dtype=np.float64)
            if lo.shape != (self.size,) or hi.shape != (self.size,):
                raise ValidationError(f"box bounds must have {self.size} entries")
            lo = np.clip(lo, 0.0, 1.0)
            hi = np.clip(hi, 0.0, 1.0)
            if np.any(lo > hi + MEMBER_TOL):
                raise ValidationError("box lower bounds exceed upper bounds")
            if lo.sum() > 1 + MEMBER_TOL or hi.sum() < 1 - MEMBER_TOL:
                raise ValidationError("box does not intersect the probability simplex")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
            return
        raise ValidationError(f"unknown state uncertainty kind {self.kind!r}")

    @classmethod
    def simplex(cls, size: int) -> "StateUncertainty":
        return cls("simplex", size)

    @classmethod
    def finite(cls, points: ArrayLike) -> "StateUncertainty":
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls("list", pts.shape[1], points=pts)

    @classmethod
    def box(cls, lower: ArrayLike, upper: ArrayLike) -> "StateUncertainty":
        lo = np.asarray(lower, dtype=np.float64)
        return cls("box", lo.size, lower=lo, upper=np.asarray(upper, dtype=np.float64))

    def _bounds(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        if self.kind == "box":
            return self.lower, self.upper
        return np.zeros(self.size), np.ones(self.size)

    def contains(self, q: ArrayLike, tol: float = MEMBER_TOL) -> bool:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.size,) or np.any(q < -tol) or abs(q.sum() - 1) > tol:
            return False
        if self.kind == "list":
            return bool(np.any(np.max(np.abs(self.points - q), axis=1) <= tol))
        lo, hi = self._bounds()
        return bool(np.all(q >= lo - tol) and np.all(q <= hi + tol))

    def near(self, t: ArrayLike, radius: float, tol: float = MEMBER_TOL) -> bool:
        """Is there a q in Q with ``max_s |t(s) - q(s)| <= radius``?"""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "list":
            return bool(np.any(np.max(np.abs(self.points - t), axis=1) <= radius + tol))
        lo, hi = self._bounds()
        a = np.maximum(lo, t - radius)
        b = np.minimum(hi, t + radius)
        return bool(np.all(a <= b + tol) and a.sum() <= 1 + tol and b.sum() >= 1 - tol)

    def project(self, v: ArrayLike) -> NDArray[np.float64]:
        """Euclidean projection onto Q (nearest listed point for finite Q)."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "list":
            return self.points[int(np.argmin(np.sum((self.points - v) ** 2, axis=1)))].copy()
        lo, hi = self._bounds()
        # sum(clip(v - lam, lo, hi)) is non-increasing in lam; bisect for 1.
        a, b = float(np.min(v - hi)) - 1.0, float(np.max(v - lo)) + 1.0
        for _ in range(200):
            mid = 0.5 * (a + b)
            if np.clip(v - mid, lo, hi).sum() > 1.0:
                a = mid
            else:
                b = mid
        q = np.clip(v - 0.5 * (a + b), lo, hi)
        return q / q.sum()

    def grid(self, resolution: int) -> NDArray[np.float64]:
        """Finite set of points of Q used to seed searches over Q."""
        if self.kind == "list":
            return self.points.copy()
        lattice = enumerate_types(resolution, self.size) / resolution
        if self.kind == "simplex":
            return lattice
        pts = np.array([self.project(p) for p in lattice])
        pts = np.round(pts, 12)
        return np.unique(pts, axis=0)


def state_type_set(
    Q: StateUncertainty, n: int, delta: float, as_array: bool = False
) -> "list[Pmf] | NDArray[np.float64]":
    """All n-types on S within ``delta / (2|S|)`` (sup-norm) of some q in Q."""
    if n < 1:
        raise ValidationError("block length must be positive")
    if delta < 0:
        raise ValidationError("delta must be non-negative")
    radius = delta / (2 * Q.size)
    types = enumerate_types(n, Q.size) / n
    if Q.kind == "simplex":
        kept = types
    else:
        kept = types[[Q.near(t, radius) for t in types]]
    if as_array:
        return kept
    return [Pmf(t) for t in kept]
