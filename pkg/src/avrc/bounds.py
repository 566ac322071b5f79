"""Capacity bounds as minimax problems over input and state distributions.

Every bound is a combination of conditional mutual informations
``I_q(A; B | C)`` evaluated on the joint law of ``(U, X, X1, Y, Y1)``.  Two
solver shapes cover all of them:

* **max-min with per-term infima** — ``max_p min_r sum_{k in r} inf_q I_k``.
  Each ``I_k`` is convex in ``q``, so the inner infimum is a convex program;
  the outer maximisation is an epigraph NLP solved by SLSQP, with the state
  constraints generated lazily (an exchange / cutting-plane method: every
  ``v_k <= I_k(p, q)`` cut is valid for all ``p``).
* **min-max** — ``min_q max_p min_r I_{r,q}``: the inner problem at fixed ``q``
  is a concave maximisation, and the outer minimisation runs over a lattice on
  ``Q`` followed by a local Nelder–Mead refinement.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence as Seq

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize, minimize_scalar
from scipy.special import xlogy

from .channel import (
    RelayChannel,
    StateUncertainty,
    detect_orthogonal_sender,
    structure_report,
    validate,
)
from .errors import StructureError, ValidationError
from .information import LOG_FLOOR, JointDist

log = logging.getLogger(__name__)

__all__ = [
    "OptimizerOptions",
    "BoundReport",
    "cutset_bound",
    "partial_df_bound",
    "direct_transmission_bound",
    "full_df_bound",
    "degraded_closed_form",
    "orthogonal_components_capacity",
    "minimax_gap",
    "reevaluate",
    "BOUND_KINDS",
]

BOUND_KINDS = ("cutset", "partial_df", "full_df", "direct", "orthogonal", "degraded_closed_form")


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs shared by all bound computations.

    ``grid_resolution`` is the lattice resolution used on ``Q`` (0 picks a
    size-dependent default).  ``u_cardinality`` of ``None`` means
    ``|X| |X1| + 2``.
    """

    grid_resolution: int = 0
    multistart_count: int = 8
    max_iterations: int = 60
    tolerance: float = 1e-4
    u_cardinality: int | None = None
    exchange_rounds: int = 60
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.u_cardinality is not None and self.u_cardinality < 1:
            raise ValidationError("u_cardinality must be at least 1")
        if self.multistart_count < 1 or self.max_iterations < 1:
            raise ValidationError("multistart_count and max_iterations must be positive")
        if self.grid_resolution < 0:
            raise ValidationError("grid_resolution must be non-negative")

    def q_resolution(self, ns: int) -> int:
        if self.grid_resolution:
            return self.grid_resolution
        return {1: 1, 2: 32, 3: 12, 4: 6}.get(ns, 3)


@dataclass
class BoundReport:
    """A computed bound with its optimiser certificate.

    ``worst_q`` is either one state pmf (min-max bounds) or one row per term
    (max-min bounds with separate infima).  ``reevaluate`` recomputes
    ``value`` from ``argmax_p`` and ``worst_q``.
    """

    bound_kind: str
    value: float
    argmax_p: JointDist
    worst_q: NDArray[np.float64]
    terms: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]
    term_values: dict[str, float]
    solver_iterations: int
    residual: float
    converged: bool
    split: tuple[int, int] | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "bound_kind": self.bound_kind,
            "value": float(self.value),
            "argmax_p": {
                "axes": list(self.argmax_p.axes),
                "probs": np.asarray(self.argmax_p.probs).tolist(),
            },
            "worst_q": np.asarray(self.worst_q).tolist(),
            "terms": list(self.terms),
            "rows": [list(r) for r in self.rows],
            "term_values": {k: float(v) for k, v in self.term_values.items()},
            "solver_iterations": int(self.solver_iterations),
            "residual": float(self.residual),
            "converged": bool(self.converged),
            "diagnostics": self.diagnostics,
        }


# --------------------------------------------------------------------------
# Information terms on the joint tensor.

_TERM_SPECS: dict[str, tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]] = {
    "I(U,X1;Y)": (("U", "X1"), ("Y",), ()),
    "I(X;Y|X1,U)": (("X",), ("Y",), ("X1", "U")),
    "I(U;Y1|X1)": (("U",), ("Y1",), ("X1",)),
    "I(X,X1;Y)": (("X", "X1"), ("Y",), ()),
    "I(X;Y,Y1|X1)": (("X",), ("Y", "Y1"), ("X1",)),
    "I(X;Y1|X1)": (("X",), ("Y1",), ("X1",)),
    "I(X;Y|X1)": (("X",), ("Y",), ("X1",)),
    "I(X',X1;Y)": (("Xp", "X1"), ("Y",), ()),
    "I(X'';Y1|X1)": (("Xpp",), ("Y1",), ("X1",)),
    "I(X';Y|X1)": (("Xp",), ("Y",), ("X1",)),
}


class _Model:
    """Evaluates information terms and their gradients for inputs ``P[u, x, x1]``."""

    def __init__(self, channel: RelayChannel, nu: int, split: tuple[int, int] | None = None):
        self.channel = channel
        self.W = channel.kernel
        self.nu = nu
        self.split = split
        if split is None:
            self.axes = ("U", "X", "X1", "Y", "Y1")
        else:
            self.axes = ("U", "Xp", "Xpp", "X1", "Y", "Y1")

    def _idx(self, names: tuple[str, ...]) -> tuple[int, ...]:
        return tuple(self.axes.index(n) for n in names)

    def wq(self, q: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.einsum("s,abscd->abcd", q, self.W)

    def term(
        self,
        name: str,
        P: NDArray[np.float64],
        q: NDArray[np.float64],
        grad_p: bool = False,
        grad_q: bool = False,
    ):
        """Value (and optional gradients) of one term at a single ``q``."""
        vals, gp, gq = self.term_batch(name, P, np.asarray(q)[None], grad_p, grad_q)
        return (
            float(vals[0]),
            None if gp is None else gp[0],
            None if gq is None else gq[0],
        )

    def term_batch(
        self,
        name: str,
        P: NDArray[np.float64],
        qs: NDArray[np.float64],
        grad_p: bool = False,
        grad_q: bool = False,
    ):
        """Values of one term at every row of ``qs`` (shape ``(m, |S|)``)."""
        a, b, c = (tuple(i + 1 for i in self._idx(g)) for g in _TERM_SPECS[name])
        wq = np.einsum("ms,abscd->mabcd", qs, self.W)
        T = P[None, ..., None, None] * wq[:, None]
        shape = T.shape
        if self.split is not None:
            n1, n2 = self.split
            T = T.reshape(shape[0], shape[1], n1, n2, *shape[3:])
        vals, G = _batched_cmi(T, a, b, c, grad_p or grad_q)
        if G is None:
            return vals, None, None
        G = G.reshape(shape)
        gp = np.einsum("muxayz,mxayz->muxa", G, wq) if grad_p else None
        gq = np.einsum("muxayz,uxa,xasyz->ms", G, P, self.W) if grad_q else None
        return vals, gp, gq


_LN2 = math.log(2.0)


def _batched_cmi(T, a, b, c, grad):
    """``I(A;B|C)`` for each slice ``T[m]``; axis 0 is the batch axis."""
    nd = T.ndim

    def marg(keep):
        drop = tuple(i for i in range(1, nd) if i not in keep)
        return T.sum(axis=drop, keepdims=True) if drop else T

    def ent(m):
        return -xlogy(m, m).reshape(m.shape[0], -1).sum(axis=1) / _LN2

    abc, ac, bc, cc = marg(a + b + c), marg(a + c), marg(b + c), marg(c)
    vals = ent(ac) + ent(bc) - ent(abc) - ent(cc)
    if not grad:
        return vals, None
    lg = (
        np.log2(np.maximum(abc, LOG_FLOOR))
        + np.log2(np.maximum(cc, LOG_FLOOR))
        - np.log2(np.maximum(ac, LOG_FLOOR))
        - np.log2(np.maximum(bc, LOG_FLOOR))
    )
    return vals, np.broadcast_to(lg, T.shape)


# --------------------------------------------------------------------------
# Parametrisations of the input law p(u, x, x1).


class _Param:
    """Maps a parameter vector ``theta`` to ``P[u, x, x1]`` with linear sum constraints."""

    dim: int
    shape: tuple[int, int, int]
    A_eq: NDArray[np.float64]

    def to_p(self, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        raise NotImplementedError

    def vjp(self, theta: NDArray[np.float64], g: NDArray[np.float64]) -> NDArray[np.float64]:
        """Pull back gradients ``g[m, u, x, x1]`` to ``(m, dim)``."""
        raise NotImplementedError

    def normalize(self, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        theta = np.clip(theta, 0.0, None)
        out = theta.copy()
        for row in self.A_eq:
            mask = row > 0
            s = theta[mask].sum()
            out[mask] = theta[mask] / s if s > 0 else 1.0 / mask.sum()
        return out

    def uniform(self) -> NDArray[np.float64]:
        return self.normalize(np.ones(self.dim))

    def random(self, rng: np.random.Generator) -> NDArray[np.float64]:
        return self.normalize(rng.exponential(size=self.dim) ** 2)


class _FreeParam(_Param):
    """Arbitrary pmf on ``U x X x X1``."""

    def __init__(self, nu: int, nx: int, nx1: int):
        self.shape = (nu, nx, nx1)
        self.dim = nu * nx * nx1
        self.A_eq = np.ones((1, self.dim))

    def to_p(self, theta):
        return theta.reshape(self.shape)

    def vjp(self, theta, g):
        return g.reshape(g.shape[0], -1)

    def embed(self, p_xx1: NDArray[np.float64], u_of_x: NDArray[np.int64]) -> NDArray[np.float64]:
        P = np.zeros(self.shape)
        for x in range(self.shape[1]):
            P[u_of_x[x], x, :] = p_xx1[x]
        return P.ravel()


class _ForcedParam(_Param):
    """``p(u, x, x1) = p(x, x1) 1{u = phi(x)}``."""

    def __init__(self, phi: NDArray[np.int64], nx1: int):
        self.phi = np.asarray(phi, dtype=np.int64)
        nx = self.phi.size
        self.shape = (int(self.phi.max()) + 1, nx, nx1)
        self.dim = nx * nx1
        self.A_eq = np.ones((1, self.dim))

    def to_p(self, theta):
        P = np.zeros(self.shape)
        P[self.phi, np.arange(self.shape[1]), :] = theta.reshape(self.shape[1:])
        return P

    def vjp(self, theta, g):
        return g[:, self.phi, np.arange(self.shape[1]), :].reshape(g.shape[0], -1)


class _ProductParam(_Param):
    """``p(x', x'', x1) = p(x1) p(x'|x1) p(x''|x1)`` with ``x = x' |X''| + x''``."""

    def __init__(self, n1: int, n2: int, nx1: int):
        self.n1, self.n2, self.nx1 = n1, n2, nx1
        self.shape = (1, n1 * n2, nx1)
        self.dim = nx1 + n1 * nx1 + n2 * nx1
        A = np.zeros((1 + 2 * nx1, self.dim))
        A[0, :nx1] = 1.0
        for x1 in range(nx1):
            A[1 + x1, nx1 + np.arange(n1) * nx1 + x1] = 1.0
            A[1 + nx1 + x1, nx1 + n1 * nx1 + np.arange(n2) * nx1 + x1] = 1.0
        self.A_eq = A

    def _parts(self, theta):
        nx1, n1, n2 = self.nx1, self.n1, self.n2
        p1 = theta[:nx1]
        a = theta[nx1 : nx1 + n1 * nx1].reshape(n1, nx1)
        b = theta[nx1 + n1 * nx1 :].reshape(n2, nx1)
        return p1, a, b

    def to_p(self, theta):
        p1, a, b = self._parts(theta)
        P = a[:, None, :] * b[None, :, :] * p1[None, None, :]
        return P.reshape(self.shape)

    def vjp(self, theta, g):
        p1, a, b = self._parts(theta)
        m = g.shape[0]
        G = g.reshape(m, self.n1, self.n2, self.nx1)
        d_p1 = np.einsum("mijk,ik,jk->mk", G, a, b)
        d_a = np.einsum("mijk,jk,k->mik", G, b, p1)
        d_b = np.einsum("mijk,ik,k->mjk", G, a, p1)
        return np.concatenate([d_p1, d_a.reshape(m, -1), d_b.reshape(m, -1)], axis=1)


# --------------------------------------------------------------------------
# Inner infimum over Q (convex in q for every term).


class _StateSearch:
    def __init__(self, Q: StateUncertainty, opts: OptimizerOptions):
        self.Q = Q
        self.opts = opts
        if Q.kind == "list":
            self.grid = Q.points.copy()
        else:
            res = {1: 1, 2: 16, 3: 8, 4: 4}.get(Q.size, 2)
            self.grid = Q.grid(res)
        if Q.kind == "box":
            self.lo, self.hi = Q.lower, Q.upper
        else:
            self.lo, self.hi = np.zeros(Q.size), np.ones(Q.size)

    def seeds(self) -> NDArray[np.float64]:
        """Initial working set: the extreme lattice points of Q plus its centre."""
        if self.Q.kind == "list":
            pts = self.Q.points
            if len(pts) <= 16:
                return pts.copy()
            return pts[:: max(1, len(pts) // 16)].copy()
        # Cuts are evaluated in one batch, so a generous initial set is cheap
        # and saves exchange rounds.
        res = {1: 1, 2: 8, 3: 4}.get(self.Q.size, 2)
        return self.Q.grid(res)

    def minimize(self, f: Callable[[NDArray[np.float64], bool], tuple]):
        """Return ``(min value, argmin)`` of a convex function over Q.

        ``f(qs, grad)`` evaluates a batch of state pmfs and returns the values
        and (if ``grad``) their gradients.
        """
        vals = f(self.grid, False)[0]
        k = int(np.argmin(vals))
        best_v, best_q = float(vals[k]), self.grid[k].copy()
        if self.Q.kind == "list" or self.Q.size == 1:
            return best_v, best_q
        if np.ptp(vals) <= 1e-13:
            return best_v, best_q
        cache: dict = {}

        def fun(q):
            key = q.tobytes()
            if key not in cache:
                qq = np.clip(q, 0.0, None)
                cache.clear()
                v, g = f((qq / qq.sum())[None], True)
                cache[key] = (float(v[0]), g[0])
            return cache[key]

        res = minimize(
            lambda q: fun(q)[0],
            best_q,
            jac=lambda q: fun(q)[1],
            method="SLSQP",
            bounds=list(zip(self.lo, self.hi)),
            constraints=[{"type": "eq", "fun": lambda q: q.sum() - 1.0, "jac": lambda q: np.ones_like(q)}],
            options={"maxiter": 200, "ftol": 1e-13},
        )
        q = self.Q.project(np.clip(res.x, 0.0, None))
        v = float(f(q[None], False)[0][0])
        if v < best_v:
            best_v, best_q = float(v), q
        return best_v, best_q


# --------------------------------------------------------------------------
# Max-min program with separate infima per term.


@dataclass
class _Program:
    model: _Model
    param: _Param
    terms: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]
    search: _StateSearch

    def term_inf(self, k: int, P: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        name = self.terms[k]

        def f(qs, grad):
            v, _, gq = self.model.term_batch(name, P, qs, grad_q=grad)
            return v, gq

        return self.search.minimize(f)

    def true_value(self, theta) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
        P = self.param.to_p(theta)
        vals, qs = [], []
        for k in range(len(self.terms)):
            v, q = self.term_inf(k, P)
            vals.append(max(v, 0.0))
            qs.append(q)
        vals = np.array(vals)
        obj = min(float(vals[list(r)].sum()) for r in self.rows)
        return obj, vals, np.array(qs)


def _solve_epigraph(
    prog: _Program,
    cuts: list[list[NDArray[np.float64]]],
    theta0: NDArray[np.float64],
    opts: OptimizerOptions,
) -> tuple[NDArray[np.float64], float, int]:
    """One SLSQP solve of ``max t`` subject to the current cuts."""
    param, model = prog.param, prog.model
    d, K = param.dim, len(prog.terms)
    cut_arrays = [np.asarray(c) for c in cuts]
    n_cuts = sum(len(c) for c in cut_arrays)
    cap = math.log2(max(model.channel.ny * model.channel.ny1, 2)) + 1.0

    cache: dict = {}

    def evaluate(z):
        key = z.tobytes()
        if key in cache:
            return cache[key]
        theta = np.clip(z[:d], 0.0, None)
        P = param.to_p(theta)
        vals = np.empty(n_cuts)
        jac = np.zeros((n_cuts, z.size))
        i = 0
        for k, qs in enumerate(cut_arrays):
            v, gp, _ = model.term_batch(prog.terms[k], P, qs, grad_p=True)
            j = i + len(qs)
            vals[i:j] = v - z[d + k]
            jac[i:j, :d] = param.vjp(theta, gp)
            jac[i:j, d + k] = -1.0
            i = j
        cache.clear()
        cache[key] = (vals, jac)
        return vals, jac

    row_mat = np.zeros((len(prog.rows), d + K + 1))
    for r, row in enumerate(prog.rows):
        row_mat[r, [d + k for k in row]] = 1.0
        row_mat[r, -1] = -1.0
    eq_mat = np.hstack([param.A_eq, np.zeros((param.A_eq.shape[0], K + 1))])

    z0 = np.concatenate([theta0, np.zeros(K), [0.0]])
    P0 = param.to_p(theta0)
    for k in range(K):
        z0[d + k] = model.term_batch(prog.terms[k], P0, cut_arrays[k])[0].min()
    z0[-1] = min(z0[[d + k for k in row]].sum() for row in prog.rows)

    obj_grad = np.zeros(z0.size)
    obj_grad[-1] = -1.0
    res = minimize(
        lambda z: -z[-1],
        z0,
        jac=lambda z: obj_grad,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * d + [(0.0, cap)] * K + [(0.0, cap * K)],
        constraints=[
            {"type": "eq", "fun": lambda z: eq_mat @ z - 1.0, "jac": lambda z: eq_mat},
            {"type": "ineq", "fun": lambda z: evaluate(z)[0], "jac": lambda z: evaluate(z)[1]},
            {"type": "ineq", "fun": lambda z: row_mat @ z, "jac": lambda z: row_mat},
        ],
        options={"maxiter": opts.max_iterations, "ftol": 1e-12},
    )
    theta = param.normalize(res.x[:d])
    return theta, float(res.x[-1]), int(res.nit)


def _solve_program(
    prog: _Program,
    opts: OptimizerOptions,
    warm: Seq[NDArray[np.float64]] = (),
) -> dict:
    rng = np.random.default_rng(opts.seed)
    starts = [np.asarray(w, dtype=float) for w in warm]
    if not starts or opts.multistart_count > 1:
        starts.append(prog.param.uniform())
    while len(starts) < len(warm) + opts.multistart_count:
        starts.append(prog.param.random(rng))

    cuts = [[q.copy() for q in prog.search.seeds()] for _ in prog.terms]
    best: dict | None = None
    total_iters = 0
    for start in starts:
        theta = prog.param.normalize(start)
        obj, vals, qs = prog.true_value(theta)
        cand = {"theta": theta, "value": obj, "vals": vals, "qs": qs, "residual": 0.0, "converged": True}
        if best is None or obj > best["value"]:
            best = cand
        for _ in range(opts.exchange_rounds):
            theta, t_est, nit = _solve_epigraph(prog, cuts, theta, opts)
            total_iters += nit
            obj, vals, qs = prog.true_value(theta)
            cand = {
                "theta": theta,
                "value": obj,
                "vals": vals,
                "qs": qs,
                "residual": max(t_est - obj, 0.0),
                "converged": t_est - obj <= opts.tolerance,
            }
            if obj > best["value"] + 1e-12 or (
                abs(obj - best["value"]) <= 1e-12 and cand["residual"] < best["residual"]
            ):
                best = cand
            added = False
            P = prog.param.to_p(theta)
            for k, name in enumerate(prog.terms):
                cur = prog.model.term_batch(name, P, np.asarray(cuts[k]))[0].min()
                if vals[k] < cur - 0.1 * opts.tolerance:
                    cuts[k].append(qs[k])
                    added = True
            # Without new cuts, a further round only helps if SLSQP stopped
            # at an infeasible or unconverged iterate.
            if not added and cand["converged"]:
                break
    assert best is not None
    best["iterations"] = total_iters
    best["cuts"] = sum(len(c) for c in cuts)
    return best


def _report_from_program(kind: str, prog: _Program, sol: dict, opts: OptimizerOptions) -> BoundReport:
    P = prog.param.to_p(sol["theta"])
    if P.shape[0] > 1:
        argmax = JointDist(("U", "X", "X1"), P)
    else:
        argmax = JointDist(("X", "X1"), P[0])
    # A negligible negative objective is round-off; bounds are non-negative.
    value = max(float(sol["value"]), 0.0)
    return BoundReport(
        bound_kind=kind,
        value=value,
        argmax_p=argmax,
        worst_q=np.asarray(sol["qs"]),
        terms=prog.terms,
        rows=prog.rows,
        term_values={n: float(v) for n, v in zip(prog.terms, sol["vals"])},
        solver_iterations=int(sol["iterations"]),
        residual=float(sol["residual"]),
        converged=bool(sol["converged"]),
        split=prog.model.split,
        diagnostics={"cuts": int(sol["cuts"]), "u_cardinality": int(P.shape[0])},
    )


# --------------------------------------------------------------------------
# Min-max over a lattice on Q.


def _minmax(
    channel: RelayChannel,
    Q: StateUncertainty,
    terms: tuple[str, ...],
    opts: OptimizerOptions,
    kind: str,
) -> BoundReport:
    """``min_q max_{p(x,x1)} min_k I_{k,q}``."""
    model = _Model(channel, 1)
    param = _FreeParam(1, channel.nx, channel.nx1)
    rows = tuple((k,) for k in range(len(terms)))
    inner_opts = OptimizerOptions(
        multistart_count=1,
        max_iterations=opts.max_iterations,
        tolerance=opts.tolerance,
        exchange_rounds=4,
        seed=opts.seed,
    )
    memo: dict[bytes, dict] = {}
    warm: list[NDArray[np.float64]] = []

    def g(q: NDArray[np.float64]) -> dict:
        q = np.asarray(q, dtype=float)
        key = np.round(q, 14).tobytes()
        if key not in memo:
            prog = _Program(model, param, terms, rows, _StateSearch(StateUncertainty.finite(q[None]), inner_opts))
            sol = _solve_program(prog, inner_opts, warm=warm[-1:])
            sol["q"] = q
            memo[key] = sol
            warm.append(sol["theta"])
        return memo[key]

    grid = Q.grid(opts.q_resolution(Q.size)) if Q.kind != "list" else Q.points
    sols = [g(q) for q in grid]
    order = np.argsort([s["value"] for s in sols])
    best = sols[int(order[0])]
    step = 1.0 / opts.q_resolution(Q.size)
    if Q.kind != "list" and Q.size == 2:
        # One-dimensional: bracket the best lattice point by its neighbours.
        t0 = best["q"][1]
        res = minimize_scalar(
            lambda t: g(Q.project(np.array([1.0 - t, t])))["value"],
            bounds=(max(t0 - step, 0.0), min(t0 + step, 1.0)),
            method="bounded",
            options={"xatol": 1e-7},
        )
        cand = g(Q.project(np.array([1.0 - res.x, res.x])))
        if cand["value"] < best["value"]:
            best = cand
    elif Q.kind != "list" and Q.size > 2:
        start = best["q"]
        res = minimize(
            lambda v: g(Q.project(v))["value"],
            start,
            method="Nelder-Mead",
            options={
                "xatol": 1e-6,
                "fatol": opts.tolerance * 1e-2,
                "maxiter": 60 * Q.size,
                "initial_simplex": _initial_simplex(start, 0.5 * step),
            },
        )
        cand = g(Q.project(res.x))
        if cand["value"] < best["value"]:
            best = cand
    P = param.to_p(best["theta"])
    return BoundReport(
        bound_kind=kind,
        value=max(float(best["value"]), 0.0),
        argmax_p=JointDist(("X", "X1"), P[0]),
        worst_q=np.asarray(best["q"]),
        terms=terms,
        rows=rows,
        term_values={n: float(v) for n, v in zip(terms, best["vals"])},
        solver_iterations=int(sum(s["iterations"] for s in memo.values())),
        residual=float(best["residual"]),
        converged=bool(best["converged"]),
        diagnostics={"q_evaluations": len(memo)},
    )


def _initial_simplex(x0: NDArray[np.float64], step: float) -> NDArray[np.float64]:
    pts = [x0.copy()]
    for i in range(x0.size):
        p = x0.copy()
        p[i] += step if p[i] + step <= 1 else -step
        pts.append(p)
    return np.array(pts)


# --------------------------------------------------------------------------
# Public bounds.


def _prep(channel: RelayChannel, Q: StateUncertainty | None) -> StateUncertainty:
    validate(channel)
    if Q is None:
        return StateUncertainty.simplex(channel.ns)
    if Q.size != channel.ns:
        raise ValidationError(f"Q is over {Q.size} states but the channel has {channel.ns}")
    return Q


def _u_map(force_u: str | None, nx: int, split: tuple[int, int] | None) -> NDArray[np.int64] | None:
    if force_u is None:
        return None
    if force_u in ("empty", "none", "0"):
        return np.zeros(nx, dtype=np.int64)
    if force_u in ("x", "X"):
        return np.arange(nx, dtype=np.int64)
    if force_u in ("x_pp", "X''", "xpp"):
        if split is None:
            raise ValidationError("forcing U = X'' needs an orthogonal split")
        n1, n2 = split
        if n1 * n2 != nx:
            raise ValidationError(f"split {split} is incompatible with |X| = {nx}")
        return np.arange(nx, dtype=np.int64) % n2
    raise ValidationError(f"unknown U forcing {force_u!r}")


_PDF_TERMS = ("I(U,X1;Y)", "I(X;Y|X1,U)", "I(U;Y1|X1)")
_PDF_ROWS = ((0, 1), (2, 1))


def partial_df_bound(
    channel: RelayChannel,
    Q: StateUncertainty | None = None,
    opts: OptimizerOptions | None = None,
    force_u: str | None = None,
    split: tuple[int, int] | None = None,
) -> BoundReport:
    """Partial decode-forward lower bound with a separate infimum over Q per term.

    ``force_u`` restricts the auxiliary: ``"empty"`` (U constant), ``"x"``
    (U = X) or ``"x_pp"`` (U = X'' under the declared ``split``).
    """
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    search = _StateSearch(Q, opts)
    phi = _u_map(force_u, channel.nx, split)
    if phi is not None:
        param: _Param = _ForcedParam(phi, channel.nx1)
        prog = _Program(_Model(channel, param.shape[0]), param, _PDF_TERMS, _PDF_ROWS, search)
        return _report_from_program("partial_df", prog, _solve_program(prog, opts), opts)

    nu = opts.u_cardinality or channel.nx * channel.nx1 + 2
    free = _FreeParam(nu, channel.nx, channel.nx1)
    prog = _Program(_Model(channel, nu), free, _PDF_TERMS, _PDF_ROWS, search)
    # The U = constant and U = X specialisations are feasible points of the
    # general problem; seeding with their optima guarantees the sandwich.
    warm = []
    if nu >= 1:
        d = direct_transmission_bound(channel, Q, opts)
        warm.append(free.embed(d.argmax_p.probs, np.zeros(channel.nx, dtype=np.int64)))
    if nu >= channel.nx:
        f = full_df_bound(channel, Q, opts)
        warm.append(free.embed(f.argmax_p.probs, np.arange(channel.nx)))
    return _report_from_program("partial_df", prog, _solve_program(prog, opts, warm), opts)


def direct_transmission_bound(
    channel: RelayChannel, Q: StateUncertainty | None = None, opts: OptimizerOptions | None = None
) -> BoundReport:
    """``max_p inf_q I_q(X; Y | X1)``."""
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    param = _FreeParam(1, channel.nx, channel.nx1)
    prog = _Program(_Model(channel, 1), param, ("I(X;Y|X1)",), ((0,),), _StateSearch(Q, opts))
    return _report_from_program("direct", prog, _solve_program(prog, opts), opts)


def full_df_bound(
    channel: RelayChannel, Q: StateUncertainty | None = None, opts: OptimizerOptions | None = None
) -> BoundReport:
    """``max_p inf_q min{I_q(X, X1; Y), I_q(X; Y1 | X1)}``."""
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    param = _FreeParam(1, channel.nx, channel.nx1)
    prog = _Program(
        _Model(channel, 1), param, ("I(X,X1;Y)", "I(X;Y1|X1)"), ((0,), (1,)), _StateSearch(Q, opts)
    )
    return _report_from_program("full_df", prog, _solve_program(prog, opts), opts)


_CUTSET_TERMS = ("I(X,X1;Y)", "I(X;Y,Y1|X1)")


def cutset_bound(
    channel: RelayChannel, Q: StateUncertainty | None = None, opts: OptimizerOptions | None = None
) -> BoundReport:
    """``inf_q max_p min{I_q(X, X1; Y), I_q(X; Y, Y1 | X1)}``."""
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    return _minmax(channel, Q, _CUTSET_TERMS, opts, "cutset")


def minimax_gap(
    channel: RelayChannel, Q: StateUncertainty | None = None, opts: OptimizerOptions | None = None
) -> float:
    """``|min_q max_p F - max_p min_q F|`` for the cut-set objective ``F``.

    The gap vanishes when the minimax theorem applies (degraded channels with a
    state-free relay link, reversely degraded ones with a state-free direct
    link); for other channels it is informational only.
    """
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    upper = _minmax(channel, Q, _CUTSET_TERMS, opts, "cutset")
    param = _FreeParam(1, channel.nx, channel.nx1)
    prog = _Program(_Model(channel, 1), param, _CUTSET_TERMS, ((0,), (1,)), _StateSearch(Q, opts))
    lower = _solve_program(prog, opts, warm=[upper.argmax_p.probs.ravel()])
    return abs(upper.value - max(lower["value"], 0.0))


def degraded_closed_form(
    channel: RelayChannel,
    opts: OptimizerOptions | None = None,
    Q: StateUncertainty | None = None,
    tol: float = 1e-9,
) -> BoundReport:
    """Capacity formula for the two structured classes.

    * degraded with a state-free relay link:
      ``max_p min{min_q I_q(X, X1; Y), I(X; Y1 | X1)}``;
    * reversely degraded with a state-free direct link:
      ``min_q max_p I_q(X; Y | X1)``.

    Raises ``StructureError`` when neither hypothesis is certified.
    """
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    rep = structure_report(channel, tol=tol)
    if rep.degraded and rep.relay_link_state_free:
        param = _FreeParam(1, channel.nx, channel.nx1)
        prog = _Program(
            _Model(channel, 1), param, ("I(X,X1;Y)", "I(X;Y1|X1)"), ((0,), (1,)), _StateSearch(Q, opts)
        )
        report = _report_from_program("degraded_closed_form", prog, _solve_program(prog, opts), opts)
        report.diagnostics["structure"] = "degraded"
        return report
    if rep.reversely_degraded and rep.direct_link_state_free:
        report = _minmax(channel, Q, ("I(X;Y|X1)",), opts, "degraded_closed_form")
        report.diagnostics["structure"] = "reversely_degraded"
        return report
    raise StructureError(
        "closed form needs a degraded channel with a state-free relay link or a reversely "
        f"degraded channel with a state-free direct link; got {rep.as_dict()}"
    )


def orthogonal_components_capacity(
    channel: RelayChannel,
    split: tuple[int, int],
    opts: OptimizerOptions | None = None,
    Q: StateUncertainty | None = None,
    tol: float = 1e-9,
) -> BoundReport:
    """Capacity of a channel with orthogonal sender components and a state-free direct link.

    Maximises ``min{I(X', X1; Y), min_q I_q(X''; Y1 | X1) + I(X'; Y | X1)}``
    over product inputs ``p(x1) p(x'|x1) p(x''|x1)``.
    """
    opts = opts or OptimizerOptions()
    Q = _prep(channel, Q)
    orth = detect_orthogonal_sender(channel, split, tol)
    if not orth.holds:
        raise StructureError(
            f"channel does not factor into orthogonal sender components under split {split} "
            f"(deviation {orth.max_deviation:.3g})"
        )
    if not orth.direct_state_free:
        raise StructureError("the direct link W(y|x', x1, s) depends on the state")
    n1, n2 = orth.split
    param = _ProductParam(n1, n2, channel.nx1)
    prog = _Program(
        _Model(channel, 1, split=(n1, n2)),
        param,
        ("I(X',X1;Y)", "I(X'';Y1|X1)", "I(X';Y|X1)"),
        ((0,), (1, 2)),
        _StateSearch(Q, opts),
    )
    return _report_from_program("orthogonal", prog, _solve_program(prog, opts), opts)


def reevaluate(report: BoundReport, channel: RelayChannel) -> float:
    """Objective value at the report's ``(argmax_p, worst_q)``."""
    p = report.argmax_p
    P = p.probs if p.axes == ("U", "X", "X1") else p.probs[None]
    model = _Model(channel, P.shape[0], split=report.split)
    qs = np.asarray(report.worst_q)
    if qs.ndim == 1:
        qs = np.broadcast_to(qs, (len(report.terms), qs.size))
    vals = np.array([model.term(n, P, q)[0] for n, q in zip(report.terms, qs)])
    return max(min(float(vals[list(r)].sum()) for r in report.rows), 0.0)
