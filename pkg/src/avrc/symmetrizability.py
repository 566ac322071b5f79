"""Symmetrizability tests, capacity classification and symmetrizing jammers.

Both symmetrizability conditions are linear in the unknown conditional law
``J``; we minimise the largest violation of the defining identities
(an infinity-norm epigraph LP) so that the optimum doubles as a margin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linprog

from .channel import RelayChannel, check_degraded, is_state_free, marginals, validate
from .errors import SolverError, StructureError, ValidationError
from .probability import CondPmf

__all__ = [
    "DEFAULT_TOL",
    "SymmetrizabilityVerdict",
    "CapacityClassification",
    "check_symmetrizable_x_given_x1",
    "check_symmetrizable_x1y1",
    "violation_x_given_x1",
    "violation_x1y1",
    "classify_capacity",
    "RelayCode",
    "AttackX",
    "AttackX1Y1",
    "build_attack_x",
    "build_attack_x1y1",
]

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class SymmetrizabilityVerdict:
    """Outcome of a symmetrizability LP.

    ``max_violation`` is recomputed by substituting the (clipped and
    renormalised) witness into the defining identities; ``lp_optimum`` is the
    raw LP value.  ``witness.rows[g]`` is ``J(.|g)`` where ``g`` is ``x`` for
    the X|X1 test and ``x1 * |Y1| + y1`` for the X1 x Y1 test.
    """

    symmetrizable: bool
    witness: CondPmf | None
    max_violation: float
    lp_optimum: float
    kind: str

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "symmetrizable": self.symmetrizable,
            "max_violation": self.max_violation,
            "lp_optimum": self.lp_optimum,
            "witness": None if self.witness is None else self.witness.rows.tolist(),
        }


@dataclass(frozen=True)
class CapacityClassification:
    verdict: str
    reasons: tuple[str, ...]
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "reasons": list(self.reasons), "details": self.details}


# --------------------------------------------------------------------------
# LP machinery


def _minimax_lp(
    A: NDArray[np.float64], n_groups: int, ns: int
) -> tuple[NDArray[np.float64], float]:
    """Minimise ``max |A j|`` over row-stochastic ``J`` (``j = J.ravel()``, shape groups x S)."""
    nv = n_groups * ns
    m = A.shape[0]
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    if m == 0:
        return np.full((n_groups, ns), 1.0 / ns), 0.0
    ones = np.ones((m, 1))
    A_ub = np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])])
    b_ub = np.zeros(2 * m)
    A_eq = np.zeros((n_groups, nv + 1))
    for g in range(n_groups):
        A_eq[g, g * ns : (g + 1) * ns] = 1.0
    b_eq = np.ones(n_groups)
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0.0, None)] * (nv + 1),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0 or res.x is None:
        raise SolverError(f"symmetrizability LP failed: {res.message}")
    J = np.clip(res.x[:nv].reshape(n_groups, ns), 0.0, None)
    J /= J.sum(axis=1, keepdims=True)
    return J, float(res.x[-1])


def _as_kernel(kernel: "RelayChannel | ArrayLike") -> NDArray[np.float64]:
    """Flatten a ``[x, x1, s, ...]`` kernel to ``[x, x1, s, outputs]``."""
    if isinstance(kernel, RelayChannel):
        validate(kernel)
        K = kernel.kernel
    else:
        K = np.asarray(kernel, dtype=np.float64)
        if K.ndim < 4:
            raise ValidationError("kernel must be indexed [x, x1, s, outputs...]")
        sums = K.reshape(*K.shape[:3], -1).sum(axis=3)
        if np.any(K < 0) or np.max(np.abs(sums - 1)) > 1e-9:
            raise ValidationError("kernel rows must be probability vectors")
    return K.reshape(*K.shape[:3], -1)


def _x_given_x1_matrix(K: NDArray[np.float64]) -> NDArray[np.float64]:
    nx, nx1, ns, no = K.shape
    rows = []
    for x in range(nx):
        for xt in range(x + 1, nx):
            for x1 in range(nx1):
                # sum_s K[x,x1,s,o] J[xt,s] - sum_s K[xt,x1,s,o] J[x,s]
                block = np.zeros((no, nx, ns))
                block[:, xt, :] += K[x, x1].T
                block[:, x, :] -= K[xt, x1].T
                rows.append(block.reshape(no, nx * ns))
    if not rows:
        return np.zeros((0, nx * ns))
    return np.vstack(rows)


def violation_x_given_x1(kernel: "RelayChannel | ArrayLike", J: ArrayLike) -> float:
    """Largest absolute violation of the X|X1 symmetrizing identity for ``J[x, s]``."""
    K = _as_kernel(kernel)
    J = np.asarray(J, dtype=np.float64)
    lhs = np.einsum("aiso,bs->abio", K, J)  # sum_s K[x,x1,s,o] J[xt,s]
    return float(np.max(np.abs(lhs - np.swapaxes(lhs, 0, 1)))) if lhs.size else 0.0


def check_symmetrizable_x_given_x1(
    kernel: "RelayChannel | ArrayLike", tol: float = DEFAULT_TOL
) -> SymmetrizabilityVerdict:
    """Is there ``J(s|x)`` making ``sum_s W(.|x,x1,s) J(s|x~)`` symmetric in ``(x, x~)``?

    ``kernel`` is a relay channel or any kernel indexed ``[x, x1, s, outputs...]``,
    e.g. one of the marginals returned by ``channel.marginals``.
    """
    K = _as_kernel(kernel)
    nx, _, ns, _ = K.shape
    J, opt = _minimax_lp(_x_given_x1_matrix(K), nx, ns)
    viol = violation_x_given_x1(K, J)
    ok = viol <= tol
    return SymmetrizabilityVerdict(ok, CondPmf(J), viol, opt, "x_given_x1")


def _degraded_witness(channel: RelayChannel, tol: float):
    fac = check_degraded(channel, tol=max(tol, 1e-9))
    if not fac.holds:
        raise StructureError(
            f"channel is not degraded (max deviation {fac.max_deviation:.3g}); "
            "the X1 x Y1 condition is defined for degraded channels only"
        )
    # witness[x1, s, y1, y] = W(y | y1, x1, s)
    return fac.witness, fac.reachable


def violation_x1y1(V: NDArray[np.float64], J: ArrayLike, live: NDArray[np.bool_] | None = None) -> float:
    """Largest violation of the X1 x Y1 identity for ``V[x1, s, y1, y]`` and ``J[(x1, y1), s]``."""
    nx1, ns, ny1, ny = V.shape
    J = np.asarray(J, dtype=np.float64).reshape(nx1, ny1, ns)
    # L[x1, y1, xt1, yt1, y] = sum_s V[x1, s, y1, y] J[xt1, yt1, s]
    L = np.einsum("asby,cds->abcdy", V, J)
    R = np.transpose(L, (2, 3, 0, 1, 4))
    diff = np.abs(L - R)
    if live is not None:
        live = np.asarray(live).reshape(nx1, ny1)
        diff = diff * live[:, :, None, None, None] * live[None, None, :, :, None]
    return float(diff.max()) if diff.size else 0.0


def check_symmetrizable_x1y1(channel: RelayChannel, tol: float = DEFAULT_TOL) -> SymmetrizabilityVerdict:
    """Is there ``J(s|x1,y1)`` symmetrizing the relay-to-destination leg of a degraded channel?

    Pairs ``(x1, y1)`` that the relay can never observe are left out of the
    identities; their witness rows are uniform.
    """
    validate(channel)
    V, reachable = _degraded_witness(channel, tol)
    nx1, ns, ny1, ny = V.shape
    live = reachable.any(axis=1)  # [x1, y1]
    groups = [(x1, y1) for x1 in range(nx1) for y1 in range(ny1)]
    G = len(groups)
    rows = []
    for i, (x1, y1) in enumerate(groups):
        for k in range(i + 1, G):
            xt1, yt1 = groups[k]
            if not (live[x1, y1] and live[xt1, yt1]):
                continue
            block = np.zeros((ny, G, ns))
            block[:, k, :] += V[x1, :, y1, :].T
            block[:, i, :] -= V[xt1, :, yt1, :].T
            rows.append(block.reshape(ny, G * ns))
    A = np.vstack(rows) if rows else np.zeros((0, G * ns))
    J, opt = _minimax_lp(A, G, ns)
    viol = violation_x1y1(V, J, live)
    return SymmetrizabilityVerdict(viol <= tol, CondPmf(J), viol, opt, "x1y1")


def classify_capacity(channel: RelayChannel, tol: float = DEFAULT_TOL) -> CapacityClassification:
    """Apply the sufficient conditions for deterministic-code capacity in order.

    1. both marginals non-symmetrizable-X|X1 → equals the random-code capacity
       (Corollary 4);
    2. the channel is symmetrizable-X|X1 → zero (Lemma 4);
    3. degraded with a state-free relay link and symmetrizable-X1 x Y1 → zero
       (Lemma 5);
    otherwise unknown.
    """
    validate(channel)
    w_y1, w_y = marginals(channel)
    sym_y = check_symmetrizable_x_given_x1(w_y, tol)
    sym_y1 = check_symmetrizable_x_given_x1(w_y1, tol)
    details: dict = {
        "y_marginal_symmetrizable": sym_y.symmetrizable,
        "y1_marginal_symmetrizable": sym_y1.symmetrizable,
    }
    if not sym_y.symmetrizable and not sym_y1.symmetrizable:
        return CapacityClassification(
            "equals_random_code_capacity",
            ("Corollary 4: W_Y|X,X1,S and W_Y1|X,X1,S are both non-symmetrizable-X|X1",),
            details,
        )
    full = check_symmetrizable_x_given_x1(channel, tol)
    details["symmetrizable_x_given_x1"] = full.symmetrizable
    if full.symmetrizable:
        return CapacityClassification(
            "zero", ("Lemma 4: the channel is symmetrizable-X|X1",), details
        )
    fac = check_degraded(channel)
    relay_free = is_state_free(w_y1)
    details["degraded"] = fac.holds
    details["relay_link_state_free"] = relay_free
    if fac.holds and relay_free:
        v = check_symmetrizable_x1y1(channel, tol)
        details["symmetrizable_x1y1"] = v.symmetrizable
        if v.symmetrizable:
            return CapacityClassification(
                "zero",
                ("Lemma 5: the channel is degraded and symmetrizable-X1xY1",),
                details,
            )
    return CapacityClassification(
        "unknown", ("no sufficient condition applies",), details
    )


# --------------------------------------------------------------------------
# Symmetrizing jammers


class PhantomSource(Protocol):
    """What a jammer needs from a deterministic code."""

    def phantom_inputs(self, rng: np.random.Generator) -> NDArray[np.int64]:
        """Encoder output for a uniformly drawn message."""

    def phantom_relay_path(
        self, w_y1: NDArray[np.float64], rng: np.random.Generator
    ) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Relay inputs and relay observations for a uniformly drawn message."""


@dataclass(frozen=True)
class RelayCode:
    """A plain deterministic relay code.

    ``codebook[m]`` is the sender's codeword and ``relay(i, y1_prefix)`` the
    relay's symbol at time ``i`` given ``y1[:i]`` (default: always 0).
    """

    codebook: NDArray[np.int64]
    relay: object = None

    def __post_init__(self) -> None:
        cb = np.atleast_2d(np.asarray(self.codebook, dtype=np.int64))
        if cb.shape[0] < 1 or cb.shape[1] < 1:
            raise ValidationError("codebook must be non-empty")
        object.__setattr__(self, "codebook", cb)

    def relay_symbol(self, i: int, y1_prefix: NDArray[np.int64]) -> int:
        return 0 if self.relay is None else int(self.relay(i, y1_prefix))

    def phantom_inputs(self, rng):
        return self.codebook[rng.integers(self.codebook.shape[0])]

    def phantom_relay_path(self, w_y1, rng):
        x = self.phantom_inputs(rng)
        n = x.size
        x1 = np.zeros(n, dtype=np.int64)
        y1 = np.zeros(n, dtype=np.int64)
        for i in range(n):
            x1[i] = self.relay_symbol(i, y1[:i])
            p = w_y1[x[i], x1[i]]
            y1[i] = rng.choice(p.size, p=p)
        return x1, y1


def _as_source(code) -> PhantomSource:
    if hasattr(code, "phantom_inputs"):
        return code
    return RelayCode(np.asarray(code))


def _draw_rows(J: NDArray[np.float64], idx: NDArray[np.int64], rng) -> NDArray[np.int64]:
    cdf = np.cumsum(J[idx], axis=1)
    u = rng.random(idx.size)[:, None]
    return np.minimum((u > cdf).sum(axis=1), J.shape[1] - 1)


@dataclass(frozen=True)
class AttackX:
    """``s_i ~ J(.|x_i(m~))`` for a phantom message ``m~`` drawn uniformly."""

    source: object
    J: NDArray[np.float64]

    def sample(self, rng: np.random.Generator) -> NDArray[np.int64]:
        x = np.asarray(self.source.phantom_inputs(rng), dtype=np.int64)
        return _draw_rows(self.J, x, rng)


@dataclass(frozen=True)
class AttackX1Y1:
    """Replays a phantom relay: ``s_i ~ J(.|x~1_i, y~1_i)`` along a simulated relay path."""

    source: object
    J: NDArray[np.float64]
    w_y1: NDArray[np.float64]

    def sample(self, rng: np.random.Generator) -> NDArray[np.int64]:
        x1, y1 = self.source.phantom_relay_path(self.w_y1, rng)
        ny1 = self.w_y1.shape[-1]
        return _draw_rows(self.J, np.asarray(x1) * ny1 + np.asarray(y1), rng)


def build_attack_x(code, J: "CondPmf | ArrayLike") -> AttackX:
    """Symmetrizing jammer for the X|X1 condition.

    ``code`` is a codebook array ``(M, n)`` or any object providing
    ``phantom_inputs(rng)`` (e.g. a block Markov code).
    """
    J = np.asarray(J, dtype=np.float64)
    CondPmf(J)
    return AttackX(_as_source(code), J)


def build_attack_x1y1(code, channel: RelayChannel, J: "CondPmf | ArrayLike") -> AttackX1Y1:
    """Symmetrizing jammer for the X1 x Y1 condition of a degraded channel.

    The relay link must be state-free so the jammer can simulate the relay's
    observations without knowing the state.
    """
    validate(channel)
    if not check_degraded(channel).holds:
        raise StructureError("the X1 x Y1 attack needs a degraded channel")
    w_y1_full, _ = marginals(channel)
    if not is_state_free(w_y1_full):
        raise StructureError("the X1 x Y1 attack needs a state-free relay link W(y1|x,x1)")
    J = np.asarray(J, dtype=np.float64)
    CondPmf(J)
    if J.shape[0] != channel.nx1 * channel.ny1 or J.shape[1] != channel.ns:
        raise ValidationError(
            f"J must have {channel.nx1 * channel.ny1} rows (x1, y1) and {channel.ns} columns"
        )
    return AttackX1Y1(_as_source(code), J, w_y1_full[:, :, 0, :])
