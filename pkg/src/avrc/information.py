"""Entropy and (conditional) mutual information in bits.

Joint distributions carry named axes so that quantities such as
``I(U, X1; Y)`` can be requested as ``cmi(dist, ["U", "X1"], ["Y"], [])``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence as Seq

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .channel import RelayChannel
from .errors import ConsistencyError, ValidationError
from .probability import SUM_TOL

__all__ = [
    "JointDist",
    "induced_joint",
    "entropy",
    "conditional_mutual_information",
    "mutual_information",
    "binary_entropy",
    "NEGATIVE_GUARD",
]

NEGATIVE_GUARD = 1e-10
# Floor applied inside logarithms when forming gradients; keeps them finite
# on the boundary of the simplex.
LOG_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class JointDist:
    """A pmf over a product of named finite alphabets."""

    axes: tuple[str, ...]
    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        axes = tuple(self.axes)
        arr = np.asarray(self.probs, dtype=np.float64)
        if len(set(axes)) != len(axes):
            raise ValidationError(f"axis names must be distinct: {axes}")
        if arr.ndim != len(axes):
            raise ValidationError(f"{len(axes)} axes named but tensor has {arr.ndim} dimensions")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValidationError("joint distribution has negative or non-finite entries")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL * max(1, arr.size) ** 0.5:
            raise ValidationError(f"joint distribution sums to {total!r}, not 1")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", arr)

    @property
    def shape(self) -> dict[str, int]:
        return dict(zip(self.axes, self.probs.shape))

    def index(self, names: Iterable[str]) -> tuple[int, ...]:
        out = []
        for name in names:
            if name not in self.axes:
                raise ValidationError(f"unknown axis {name!r}; have {self.axes}")
            out.append(self.axes.index(name))
        return tuple(out)

    def marginal(self, names: Iterable[str]) -> "JointDist":
        """Marginal on ``names`` (in the given order)."""
        names = tuple(names)
        keep = self.index(names)
        drop = tuple(i for i in range(len(self.axes)) if i not in keep)
        m = self.probs.sum(axis=drop) if drop else self.probs
        kept_sorted = sorted(keep)
        m = np.transpose(m, [kept_sorted.index(i) for i in keep])
        return JointDist(names, m)


def induced_joint(
    p_inputs: "JointDist | ArrayLike",
    channel: RelayChannel,
    q: ArrayLike,
) -> JointDist:
    """Joint law of ``(U, X, X1, Y, Y1)`` under inputs ``p(u, x, x1)`` and state law ``q``.

    ``p_inputs`` may be a ``JointDist`` with axes ``(U, X, X1)`` or ``(X, X1)``
    (in which case ``U`` is omitted from the result), or a raw array of the
    same shape.
    """
    if isinstance(p_inputs, JointDist):
        axes = p_inputs.axes
        p = p_inputs.probs
    else:
        p = np.asarray(p_inputs, dtype=np.float64)
        axes = ("U", "X", "X1") if p.ndim == 3 else ("X", "X1")
    if axes not in (("U", "X", "X1"), ("X", "X1")):
        raise ValidationError(f"input axes must be (U, X, X1) or (X, X1), got {axes}")
    if p.shape[-2:] != (channel.nx, channel.nx1):
        raise ValidationError(
            f"input pmf shape {p.shape} does not match |X|={channel.nx}, |X1|={channel.nx1}"
        )
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (channel.ns,):
        raise ValidationError(f"q must have {channel.ns} entries, got shape {q.shape}")
    wq = np.einsum("s,abscd->abcd", q, channel.kernel)
    joint = p[..., None, None] * wq
    return JointDist(axes + ("Y", "Y1"), joint)


def _plogp_sum(arr: NDArray[np.float64]) -> float:
    nz = arr[arr > 0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(dist: JointDist, axes: Iterable[str] | None = None) -> float:
    """Shannon entropy (bits) of the marginal of ``dist`` on ``axes``."""
    if axes is None:
        return _plogp_sum(dist.probs)
    axes = tuple(axes)
    if not axes:
        return 0.0
    return _plogp_sum(dist.marginal(axes).probs)


def _check_disjoint(*groups: tuple[str, ...]) -> None:
    seen: set[str] = set()
    for g in groups:
        if len(set(g)) != len(g) or seen & set(g):
            raise ValidationError(f"axis groups must be disjoint: {groups}")
        seen |= set(g)


def conditional_mutual_information(
    dist: JointDist,
    a: Seq[str],
    b: Seq[str],
    c: Seq[str] = (),
) -> float:
    """``I(A; B | C)`` in bits, clamped at zero against round-off.

    Values below ``-NEGATIVE_GUARD`` indicate an internal error and raise
    ``ConsistencyError``.
    """
    a, b, c = tuple(a), tuple(b), tuple(c)
    if not a or not b:
        raise ValidationError("A and B must be non-empty")
    _check_disjoint(a, b, c)
    val = (
        entropy(dist, a + c)
        + entropy(dist, b + c)
        - entropy(dist, a + b + c)
        - entropy(dist, c)
    )
    if val < -NEGATIVE_GUARD:
        raise ConsistencyError(f"conditional mutual information evaluated to {val!r}")
    return max(val, 0.0)


def mutual_information(dist: JointDist, a: Seq[str], b: Seq[str]) -> float:
    return conditional_mutual_information(dist, a, b, ())


def binary_entropy(t: float) -> float:
    """``h(t) = -t log2 t - (1-t) log2 (1-t)`` with ``h(0) = h(1) = 0``."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"binary entropy needs t in [0, 1], got {t}")
    if t in (0.0, 1.0):
        return 0.0
    return float(-t * np.log2(t) - (1 - t) * np.log2(1 - t))


# --------------------------------------------------------------------------
# Vectorised helpers used by the optimizers.  They work on raw tensors whose
# axes are addressed by integer position and return gradients with respect to
# every entry of the tensor.


def _marg(t: NDArray[np.float64], keep: tuple[int, ...]) -> NDArray[np.float64]:
    drop = tuple(i for i in range(t.ndim) if i not in keep)
    return t.sum(axis=drop, keepdims=True) if drop else t


def cmi_tensor(
    t: NDArray[np.float64],
    a: tuple[int, ...],
    b: tuple[int, ...],
    c: tuple[int, ...],
    grad: bool = False,
) -> "float | tuple[float, NDArray[np.float64]]":
    """``I(A;B|C)`` of a (possibly unnormalised) tensor and optionally ``dI/dt``.

    For a normalised tensor the gradient is
    ``log2 t_ABC + log2 t_C - log2 t_AC - log2 t_BC`` broadcast over the
    remaining axes; the ``1/ln 2`` terms cancel.
    """
    abc = _marg(t, a + b + c)
    ac = _marg(t, a + c)
    bc = _marg(t, b + c)
    cc = _marg(t, c) if c else np.array(t.sum()).reshape((1,) * t.ndim)
    if not grad:
        return _plogp_sum(ac) + _plogp_sum(bc) - _plogp_sum(abc) - _plogp_sum(cc)
    lg = (
        np.log2(np.maximum(abc, LOG_FLOOR))
        + np.log2(np.maximum(cc, LOG_FLOOR))
        - np.log2(np.maximum(ac, LOG_FLOOR))
        - np.log2(np.maximum(bc, LOG_FLOOR))
    )
    val = _plogp_sum(ac) + _plogp_sum(bc) - _plogp_sum(abc) - _plogp_sum(cc)
    return val, np.broadcast_to(lg, t.shape)
