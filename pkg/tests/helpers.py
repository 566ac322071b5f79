"""Shared constructions and definition-level oracles for the tests."""
from __future__ import annotations

import itertools
import math

import numpy as np

from avrc import RelayChannel
from avrc.channel import compose_degraded, compose_orthogonal, compose_reversely_degraded


def random_stochastic(rng: np.random.Generator, shape: tuple[int, ...], k: int, sparsity: float = 0.0) -> np.ndarray:
    """Random conditional pmfs with ``k`` outcomes on the last axis."""
    a = rng.gamma(0.7, size=shape + (k,))
    if sparsity:
        mask = rng.random(a.shape) < sparsity
        a[mask] = 0.0
        empty = a.sum(axis=-1) == 0
        a[empty, 0] = 1.0
    return a / a.sum(axis=-1, keepdims=True)


def random_channel(rng: np.random.Generator, nx=2, nx1=2, ns=2, ny=2, ny1=2) -> RelayChannel:
    w = random_stochastic(rng, (nx, nx1, ns), ny * ny1)
    return RelayChannel(w.reshape(nx, nx1, ns, ny, ny1))


def random_degraded(rng: np.random.Generator, nx=2, nx1=2, ns=2, ny=2, ny1=2) -> RelayChannel:
    """Degraded with a state-free relay link: W(y1|x,x1) p(y|x1,s,y1)."""
    w_y1 = np.broadcast_to(random_stochastic(rng, (nx, nx1, 1), ny1), (nx, nx1, ns, ny1))
    p = random_stochastic(rng, (nx1, ns, ny1), ny)
    return compose_degraded(w_y1, p)


def random_reversely_degraded(rng: np.random.Generator, nx=2, nx1=2, ns=2, ny=2, ny1=2) -> RelayChannel:
    """Reversely degraded with a state-free direct link: W(y|x,x1) p(y1|x1,s,y)."""
    w_y = np.broadcast_to(random_stochastic(rng, (nx, nx1, 1), ny), (nx, nx1, ns, ny))
    p = random_stochastic(rng, (nx1, ns, ny), ny1)
    return compose_reversely_degraded(w_y, p)


def random_orthogonal(rng: np.random.Generator, n1=2, n2=2, nx1=2, ns=2, ny=2, ny1=2) -> RelayChannel:
    """Orthogonal sender components with a state-free direct link."""
    w_y = np.broadcast_to(random_stochastic(rng, (n1, nx1, 1), ny), (n1, nx1, ns, ny))
    w_y1 = random_stochastic(rng, (n2, nx1, ns), ny1)
    return compose_orthogonal(w_y, w_y1)


def brute_force_cmi(p: np.ndarray, a: tuple[int, ...], b: tuple[int, ...], c: tuple[int, ...]) -> float:
    """I(A;B|C) as the sum over atoms of p(a,b,c) log p(a,b,c) p(c) / (p(a,c) p(b,c)).

    Marginals are accumulated atom by atom in dictionaries, with no array
    reductions, so the oracle shares no code path with the library.
    """
    atoms = list(itertools.product(*(range(k) for k in p.shape)))

    def marginal(keep):
        table: dict[tuple[int, ...], float] = {}
        for atom in atoms:
            key = tuple(atom[i] for i in keep)
            table[key] = table.get(key, 0.0) + float(p[atom])
        return table

    m_abc, m_ac, m_bc, m_c = marginal(a + b + c), marginal(a + c), marginal(b + c), marginal(c)
    total = 0.0
    for key, mass in m_abc.items():
        if mass <= 0:
            continue
        atom = dict(zip(a + b + c, key))
        k_ac = tuple(atom[i] for i in a + c)
        k_bc = tuple(atom[i] for i in b + c)
        k_c = tuple(atom[i] for i in c)
        total += mass * math.log2(mass * m_c[k_c] / (m_ac[k_ac] * m_bc[k_bc]))
    return total


def h2(t: float) -> float:
    if t in (0.0, 1.0):
        return 0.0
    return -t * math.log2(t) - (1 - t) * math.log2(1 - t)
