from __future__ import annotations

import itertools

import numpy as np
import pytest
from helpers import random_channel, random_stochastic
from hypothesis import given, settings
from hypothesis import strategies as st

from avrc import RelayChannel, ValidationError, example1_channel
from avrc.channel import compose_degraded, marginals
from avrc.errors import StructureError
from avrc.symmetrizability import (
    RelayCode,
    build_attack_x,
    build_attack_x1y1,
    check_symmetrizable_x1y1,
    check_symmetrizable_x_given_x1,
    classify_capacity,
    violation_x1y1,
    violation_x_given_x1,
)


def xor_channel() -> RelayChannel:
    """Y = Y1 = X xor S, relay input unused."""
    return RelayChannel.from_function(2, 1, 2, 2, 2, lambda y, y1, x, x1, s: float(y == x ^ s and y1 == x ^ s))


def symmetric_kernel(rng, nx, nx1, ny) -> np.ndarray:
    """W[x, x1, s, y] with S = X and W[x, x1, s] = W[s, x1, x]: symmetrizable with J = identity."""
    W = random_stochastic(rng, (nx, nx1, nx), ny)
    for a, b in itertools.combinations(range(nx), 2):
        W[b, :, a] = W[a, :, b]
    return W


def mixed_channel(noise: float = 0.1) -> RelayChannel:
    """Y = X xor S (symmetrizable), Y1 = X through a clean BSC: not degraded."""

    def law(y, y1, x, x1, s):
        return float(y == x ^ s) * (1 - noise if y1 == x else noise)

    return RelayChannel.from_function(2, 2, 2, 2, 2, law)


class TestXGivenX1:
    def test_xor_is_symmetrizable(self):
        v = check_symmetrizable_x_given_x1(xor_channel())
        assert v.symmetrizable and v.max_violation <= 1e-8
        assert violation_x_given_x1(xor_channel(), np.eye(2)) == 0.0

    def test_state_free_distinct_rows_not_symmetrizable(self, rng):
        w = np.broadcast_to(random_stochastic(rng, (3, 2, 1), 3), (3, 2, 1, 3))
        v = check_symmetrizable_x_given_x1(w)
        assert not v.symmetrizable and v.max_violation > 1e-3
        assert v.kind == "x_given_x1"

    @pytest.mark.parametrize("seed", range(6))
    def test_constructed_symmetric_channels(self, seed):
        W = symmetric_kernel(np.random.default_rng(seed), 3, 2, 3)
        v = check_symmetrizable_x_given_x1(W)
        assert v.symmetrizable
        assert violation_x_given_x1(W, np.asarray(v.witness)) <= 1e-8

    @pytest.mark.parametrize("seed", range(4))
    def test_full_channel_symmetrizable_implies_marginals(self, seed):
        rng = np.random.default_rng(seed)
        W = symmetric_kernel(rng, 2, 2, 6).reshape(2, 2, 2, 3, 2)
        ch = RelayChannel(W)
        v = check_symmetrizable_x_given_x1(ch)
        assert v.symmetrizable
        w_y1, w_y = marginals(ch)
        J = np.asarray(v.witness)
        assert violation_x_given_x1(w_y, J) <= 1e-8
        assert violation_x_given_x1(w_y1, J) <= 1e-8
        assert check_symmetrizable_x_given_x1(w_y).symmetrizable
        assert check_symmetrizable_x_given_x1(w_y1).symmetrizable

    @given(st.integers(0, 10_000), st.booleans())
    @settings(max_examples=30, deadline=None)
    def test_state_free_shortcut(self, seed, duplicate):
        rng = np.random.default_rng(seed)
        w = random_stochastic(rng, (2, 2, 1), 3)
        if duplicate:
            w[1] = w[0]
        rows_equal = all(np.allclose(w[0, x1], w[1, x1]) for x1 in range(2))
        assert check_symmetrizable_x_given_x1(w).symmetrizable == rows_equal

    def test_rejects_bad_kernel(self):
        with pytest.raises(ValidationError):
            check_symmetrizable_x_given_x1(np.ones((2, 2, 2)))
        with pytest.raises(ValidationError):
            check_symmetrizable_x_given_x1(np.ones((2, 2, 2, 2)))

    def test_verdict_as_dict(self):
        d = check_symmetrizable_x_given_x1(xor_channel()).as_dict()
        assert d["symmetrizable"] is True
        assert np.asarray(d["witness"]).shape == (2, 2)


class TestX1Y1:
    @pytest.mark.parametrize("theta", [0.0, 0.1, 0.2, 0.5])
    def test_example1_witness(self, theta):
        v = check_symmetrizable_x1y1(example1_channel(theta))
        assert v.symmetrizable and v.max_violation <= 1e-8
        J = np.asarray(v.witness)
        # rows indexed x1 * |Y1| + y1; the state copies the relay input
        expected = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        assert np.allclose(J, expected, atol=1e-8)

    def test_non_degraded_rejected(self):
        with pytest.raises(StructureError):
            check_symmetrizable_x1y1(mixed_channel())

    def test_state_free_distinct_rows(self, rng):
        # Y given (x1, y1) does not depend on the state and differs across (x1, y1).
        w_y1 = np.broadcast_to(random_stochastic(rng, (2, 2, 1), 2), (2, 2, 1, 2))
        p = random_stochastic(rng, (2, 1, 2), 3)
        v = check_symmetrizable_x1y1(compose_degraded(w_y1, p))
        assert not v.symmetrizable

    @pytest.mark.parametrize("seed", range(5))
    def test_randomly_symmetrized_construction(self, seed):
        # S indexes the (x1, y1) pairs and p(y | y1, x1, s) = T(y | g, s) with T symmetric.
        rng = np.random.default_rng(seed)
        G = 4
        T = random_stochastic(rng, (G, G), 3)
        for a, b in itertools.combinations(range(G), 2):
            T[b, a] = T[a, b]
        p = np.empty((2, G, 2, 3))
        for x1, y1, s in itertools.product(range(2), range(2), range(G)):
            p[x1, s, y1] = T[x1 * 2 + y1, s]
        w_y1 = np.broadcast_to(random_stochastic(rng, (2, 2, 1), 2), (2, 2, G, 2))
        ch = compose_degraded(w_y1, p)
        v = check_symmetrizable_x1y1(ch)
        assert v.symmetrizable
        assert violation_x1y1(p, np.asarray(v.witness)) <= 1e-8
        assert violation_x1y1(p, np.eye(G)) <= 1e-12


class TestClassify:
    def test_example1_zero_by_lemma5(self):
        c = classify_capacity(example1_channel(0.2))
        assert c.verdict == "zero"
        assert any("Lemma 5" in r for r in c.reasons)

    def test_clean_channel(self):
        # Noiseless state-free pipes to both receivers.
        ch = RelayChannel.from_function(2, 2, 1, 2, 2, lambda y, y1, x, x1, s: float(y == x and y1 == x))
        c = classify_capacity(ch)
        assert c.verdict == "equals_random_code_capacity"
        assert "Corollary 4" in c.reasons[0]

    def test_xor_zero_by_lemma4(self):
        c = classify_capacity(xor_channel())
        assert c.verdict == "zero" and "Lemma 4" in c.reasons[0]

    def test_open_case_unknown(self):
        c = classify_capacity(mixed_channel())
        assert c.verdict == "unknown"
        assert c.details["y_marginal_symmetrizable"] and not c.details["y1_marginal_symmetrizable"]
        assert c.as_dict()["verdict"] == "unknown"

    @pytest.mark.parametrize("seed", range(4))
    def test_generic_random_channels(self, seed):
        c = classify_capacity(random_channel(np.random.default_rng(seed)))
        assert c.verdict in ("equals_random_code_capacity", "unknown")


class TestAttacks:
    def test_identity_attack_copies_codeword(self):
        att = build_attack_x(np.array([[0, 0], [1, 1]]), np.eye(2))
        rng = np.random.default_rng(0)
        draws = {tuple(att.sample(rng)) for _ in range(200)}
        assert draws == {(0, 0), (1, 1)}

    def test_single_codeword_mixture(self):
        J = np.array([[0.3, 0.7], [0.9, 0.1]])
        att = build_attack_x(np.array([[0, 1, 1]]), J)
        rng = np.random.default_rng(1)
        s = np.array([att.sample(rng) for _ in range(20_000)])
        assert np.allclose(s.mean(axis=0), [0.7, 0.1, 0.1], atol=0.015)

    def test_attack_x_distribution_tv(self):
        codebook = np.array([[0, 1, 1], [1, 0, 0], [1, 1, 0]])
        J = np.array([[0.8, 0.2], [0.25, 0.75]])
        att = build_attack_x(codebook, J)
        rng = np.random.default_rng(2)
        N = 100_000
        counts = {}
        for _ in range(N):
            key = tuple(att.sample(rng))
            counts[key] = counts.get(key, 0) + 1
        tv = 0.0
        for s in itertools.product((0, 1), repeat=3):
            exact = np.mean([np.prod([J[x, si] for x, si in zip(cw, s)]) for cw in codebook])
            tv += abs(counts.get(s, 0) / N - exact)
        assert tv / 2 <= 0.02

    def test_attack_x_law_of_large_numbers(self):
        rng = np.random.default_rng(3)
        codebook = rng.integers(0, 2, size=(1, 10_000))
        J = np.array([[0.6, 0.4], [0.1, 0.9]])
        s = build_attack_x(codebook, J).sample(rng)
        x = codebook[0]
        expected = (J[x, 1]).mean()
        assert abs(s.mean() - expected) <= 0.01

    def test_attack_x1y1_replays_relay_codeword(self):
        ch = example1_channel(0.0)
        J = np.asarray(check_symmetrizable_x1y1(ch).witness)
        # The relay forwards its previous observation.
        code = RelayCode(np.array([[0, 1, 1, 0, 1], [1, 1, 0, 0, 0]]), relay=lambda i, y1: int(y1[-1]) if i else 0)
        att = build_attack_x1y1(code, ch, J)
        rng = np.random.default_rng(4)
        seen = {tuple(att.sample(rng)) for _ in range(100)}
        # s_i = x~1_i = x~_{i-1} for a phantom codeword x~
        assert seen == {(0, 0, 1, 1, 0), (0, 1, 1, 0, 0)}

    def test_attack_x1y1_deterministic_for_single_message(self):
        ch = example1_channel(0.0)
        J = np.asarray(check_symmetrizable_x1y1(ch).witness)
        code = RelayCode(np.array([[1, 0, 1]]), relay=lambda i, y1: int(y1[-1]) if i else 1)
        att = build_attack_x1y1(code, ch, J)
        rng = np.random.default_rng(5)
        assert {tuple(att.sample(rng)) for _ in range(20)} == {(1, 1, 0)}

    def test_attack_x1y1_distribution_tv(self):
        theta = 0.3
        ch = example1_channel(theta)
        J = np.array([[0.7, 0.3], [0.2, 0.8], [0.5, 0.5], [0.1, 0.9]])
        codebook = np.array([[0, 1, 1], [1, 0, 1]])

        def relay(i, y1):
            return int(y1[-1]) if i else 0

        att = build_attack_x1y1(RelayCode(codebook, relay), ch, J)
        rng = np.random.default_rng(6)
        N = 100_000
        counts = {}
        for _ in range(N):
            key = tuple(att.sample(rng))
            counts[key] = counts.get(key, 0) + 1
        # Exact mixture: average over codewords and relay observation paths.
        exact = {}
        for cw in codebook:
            for y1 in itertools.product((0, 1), repeat=3):
                py = np.prod([1 - theta if b == x else theta for b, x in zip(y1, cw)])
                x1 = [relay(i, np.array(y1[:i])) for i in range(3)]
                for s in itertools.product((0, 1), repeat=3):
                    ps = np.prod([J[a * 2 + b, c] for a, b, c in zip(x1, y1, s)])
                    exact[s] = exact.get(s, 0.0) + py * ps / len(codebook)
        tv = 0.5 * sum(abs(counts.get(s, 0) / N - exact[s]) for s in exact)
        assert tv <= 0.02

    def test_attack_x1y1_needs_degraded(self):
        with pytest.raises(StructureError):
            build_attack_x1y1(np.array([[0, 1]]), mixed_channel(), np.full((4, 2), 0.5))

    def test_attack_rejects_bad_j(self):
        with pytest.raises(ValidationError):
            build_attack_x(np.array([[0, 1]]), np.array([[0.5, 0.6], [1, 0]]))
        with pytest.raises(ValidationError):
            build_attack_x1y1(np.array([[0, 1]]), example1_channel(0.1), np.full((3, 2), 0.5))
