from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from avrc import RelayChannel, ValidationError, example1_channel
from avrc.errors import ResourceCapError, StructureError
from avrc.probability import empirical_type
from avrc.simulation import (
    JammerStrategy,
    PermutationTuple,
    RandomizedCode,
    apply_permutation,
    backward_decode,
    build_code,
    estimate_error,
    invert_permutation,
    quantize_rate,
    randomize,
    relay_decode,
    run_trial,
    transmit_block,
    wilson_interval,
)
from avrc.simulation.montecarlo import _channel_sampler
from avrc.symmetrizability import check_symmetrizable_x1y1

U_EQUALS_X = np.zeros((2, 2, 2))
for _u in range(2):
    U_EQUALS_X[_u, _u, :] = 0.25


def split_pipe() -> RelayChannel:
    """X = (A, B) two bits; the relay sees A, the destination sees (X, X1). No state."""

    def law(y, y1, x, x1, s):
        return float(y == x * 2 + x1 and y1 == x // 2)

    return RelayChannel.from_function(4, 2, 1, 8, 2, law)


def split_law() -> np.ndarray:
    """U = first bit of X, all inputs uniform."""
    P = np.zeros((2, 4, 2))
    for x in range(4):
        P[x // 2, x, :] = 1 / 8
    return P


def xor_channel() -> RelayChannel:
    return RelayChannel.from_function(2, 1, 2, 2, 2, lambda y, y1, x, x1, s: float(y == x ^ s and y1 == x ^ s))


class TestBuildCode:
    def test_toy_shapes(self):
        code = build_code(example1_channel(0.1), U_EQUALS_X, n=20, B=2, rate_p=1 / 20, rate_pp=1 / 20)
        assert (code.m_p, code.m_pp) == (2, 2)
        assert code.x1[1].shape == (2, 20)
        assert code.u[1].shape == (2, 2, 20)
        assert code.x[2].shape == (2, 2, 2, 20)
        assert code.x1[0] is None
        assert code.message_count == 4
        assert code.rate_p == pytest.approx(0.05)

    def test_rates_are_quantised(self):
        assert quantize_rate(0.26, 10) == 3
        code = build_code(example1_channel(0.1), U_EQUALS_X, n=10, B=2, rate_p=0.26, rate_pp=0)
        assert code.rate_p == pytest.approx(0.3)
        with pytest.raises(ValidationError):
            quantize_rate(-0.1, 10)

    def test_deterministic_law_gives_constant_codewords(self):
        P = np.zeros((2, 2, 2))
        P[1, 1, 0] = 1.0
        code = build_code(example1_channel(0.1), P, n=15, B=3, rate_p=2 / 15, rate_pp=1 / 15)
        for b in range(1, 4):
            assert np.all(code.x1[b] == 0)
            assert np.all(code.u[b] == 1)
            assert np.all(code.x[b] == 1)

    def test_relay_codeword_type(self):
        P = np.zeros((1, 2, 2))
        P[0, :, 0] = 0.35
        P[0, :, 1] = 0.15
        code = build_code(example1_channel(0.1), P, n=10_000, B=1, rate_p=0, rate_pp=0)
        t = empirical_type(code.x1[1][0], 2).probs
        assert np.allclose(t, [0.7, 0.3], atol=0.02)

    def test_conditional_generation(self):
        # U = X: every codeword x equals its cloud centre u.
        code = build_code(example1_channel(0.1), U_EQUALS_X, n=50, B=2, rate_p=2 / 50, rate_pp=1 / 50, seed=3)
        for prev in range(code.m_p):
            for cur in range(code.m_p):
                assert np.all(code.x[1][prev, cur] == code.u[1][prev, cur][None])

    def test_reproducible_and_blocks_independent(self):
        a = build_code(example1_channel(0.1), U_EQUALS_X, n=40, B=3, rate_p=1 / 40, rate_pp=0, seed=9)
        b = build_code(example1_channel(0.1), U_EQUALS_X, n=40, B=3, rate_p=1 / 40, rate_pp=0, seed=9)
        assert all(np.array_equal(a.x[k], b.x[k]) for k in range(1, 4))
        assert not np.array_equal(a.x1[1], a.x1[2])

    def test_memory_cap(self, monkeypatch):
        with pytest.raises(ResourceCapError):
            build_code(example1_channel(0.1), U_EQUALS_X, n=300, B=4, rate_p=0.15, rate_pp=0)
        with pytest.raises(ResourceCapError):
            build_code(example1_channel(0.1), U_EQUALS_X, n=20, B=2, rate_p=0.1, rate_pp=0, mem_cap=100)
        monkeypatch.setenv("AVRC_MEM_CAP", "50")
        with pytest.raises(ResourceCapError):
            build_code(example1_channel(0.1), U_EQUALS_X, n=20, B=2, rate_p=0, rate_pp=0)

    def test_input_validation(self):
        ch = example1_channel(0.1)
        with pytest.raises(ValidationError):
            build_code(ch, np.full((3, 2), 1 / 6), n=10, B=2, rate_p=0, rate_pp=0)
        with pytest.raises(ValidationError):
            build_code(ch, U_EQUALS_X, n=0, B=2, rate_p=0, rate_pp=0)
        with pytest.raises(ValidationError):
            build_code(ch, U_EQUALS_X * 2, n=10, B=2, rate_p=0, rate_pp=0)


class TestEncoding:
    def setup_method(self):
        self.code = build_code(example1_channel(0.0), U_EQUALS_X, n=30, B=3, rate_p=2 / 30, rate_pp=1 / 30, delta=1.0, seed=1)

    def test_block_one_relay_sends_fixed_codeword(self):
        mp, mpp = np.array([0, 2, 3, 0]), np.array([0, 1, 0, 0])
        x, x1 = transmit_block(self.code, 1, mp, mpp, 0)
        assert np.array_equal(x1, self.code.x1[1][0])
        assert np.array_equal(x, self.code.x[1][0, 2, 1])

    def test_last_block_uses_fixed_messages(self):
        mp, mpp = np.array([0, 2, 3, 1]), np.array([0, 1, 1, 1])
        x, x1 = transmit_block(self.code, 3, mp, mpp, 3)
        assert np.array_equal(x, self.code.x[3][3, 0, 0])
        assert np.array_equal(x1, self.code.x1[3][3])

    def test_relay_uses_its_own_estimate(self):
        mp, mpp = np.array([0, 2, 3, 0]), np.array([0, 1, 0, 0])
        _, x1 = transmit_block(self.code, 2, mp, mpp, 1)
        assert np.array_equal(x1, self.code.x1[2][1])

    def test_index_checks(self):
        mp, mpp = np.zeros(4, int), np.zeros(4, int)
        with pytest.raises(ValidationError):
            transmit_block(self.code, 0, mp, mpp, 0)
        with pytest.raises(ValidationError):
            transmit_block(self.code, 1, np.array([0, 9, 0, 0]), mpp, 0)
        with pytest.raises(ValidationError):
            transmit_block(self.code, 1, mp, mpp, 7)
        with pytest.raises(ValidationError):
            transmit_block(self.code, 1, np.zeros(3, int), mpp, 0)

    def test_draw_messages_boundaries(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            mp, mpp = self.code.draw_messages(rng)
            assert mp[0] == 0 and mp[-1] == 0 and mpp[-1] == 0 and mpp[0] == 0

    def test_strict_causality(self):
        # Corrupting block b's relay observation changes nothing sent in block b.
        code = self.code
        mp, mpp = np.array([0, 2, 3, 0]), np.array([0, 1, 0, 0])
        clean = code.u[1][0, 2]
        corrupt = 1 - clean
        est_clean = relay_decode(code, 1, clean, 0)
        est_corrupt = relay_decode(code, 1, corrupt, 0)
        # block 1 transmissions were fixed before its reception
        assert np.array_equal(transmit_block(code, 1, mp, mpp, 0)[1], code.x1[1][0])
        assert est_clean == 2
        # only block 2 can depend on the block-1 observation
        assert np.array_equal(transmit_block(code, 2, mp, mpp, est_clean)[1], code.x1[2][2])
        assert np.array_equal(transmit_block(code, 2, mp, mpp, est_corrupt)[1], code.x1[2][est_corrupt])


class TestRelayDecoding:
    def test_noiseless_link_decodes(self):
        ch = example1_channel(0.0)
        n = 200
        code = build_code(ch, U_EQUALS_X, n=n, B=2, rate_p=7 / n, rate_pp=0, delta=0.5, seed=2)
        rng = np.random.default_rng(0)
        draw = _channel_sampler(ch)
        hits = 0
        trials = 300
        for _ in range(trials):
            mp, mpp = code.draw_messages(rng)
            x, x1 = transmit_block(code, 1, mp, mpp, 0)
            _, y1 = draw(x, x1, rng.integers(0, 2, n), rng)
            hits += relay_decode(code, 1, y1, 0) == mp[1]
        assert hits / trials >= 0.99

    def test_atypical_observation_falls_back(self):
        code = build_code(example1_channel(0.0), U_EQUALS_X, n=40, B=2, rate_p=2 / 40, rate_pp=0, seed=5)
        # y1 = x here, so a constant observation matches no random cloud centre
        assert relay_decode(code, 1, np.ones(40, dtype=int), 0) == 0
        assert relay_decode(code, 1, np.zeros(40, dtype=int), 0) == 0

    def test_ambiguity_falls_back(self):
        code = build_code(example1_channel(0.0), U_EQUALS_X, n=40, B=2, rate_p=2 / 40, rate_pp=0, delta=0.5, seed=5)
        code.u[1][0, 2] = code.u[1][0, 1]
        y1 = code.u[1][0, 1].copy()
        assert relay_decode(code, 1, y1, 0) == 0
        y1 = code.u[1][0, 3].copy()
        assert relay_decode(code, 1, y1, 0) == 3


class TestBackwardDecoding:
    def test_noiseless_composite_recovers_everything(self):
        ch = split_pipe()
        n, B = 200, 4
        code = build_code(ch, split_law(), n=n, B=B, rate_p=5 / n, rate_pp=4 / n, delta=1.0, seed=4)
        est = estimate_error(ch, code, JammerStrategy.iid([1.0]), trials=100, seed=1)
        assert est.errors == 0 and est.relay_errors == 0

    def test_garbage_output_flags(self):
        ch = split_pipe()
        code = build_code(ch, split_law(), n=100, B=3, rate_p=2 / 100, rate_pp=2 / 100, delta=0.5, seed=4)
        rng = np.random.default_rng(3)
        flagged = sum(backward_decode(code, rng.integers(0, 8, size=(3, 100))).any_flag for _ in range(50))
        assert flagged == 50

    def test_shape_checked(self):
        code = build_code(split_pipe(), split_law(), n=10, B=2, rate_p=0.1, rate_pp=0, seed=4)
        with pytest.raises(ValidationError):
            backward_decode(code, np.zeros((3, 10), dtype=int))

    def test_single_block_is_vacuous(self):
        ch = example1_channel(0.3)
        code = build_code(ch, U_EQUALS_X, n=20, B=1, rate_p=0.1, rate_pp=0.1)
        est = estimate_error(ch, code, JammerStrategy.iid([0.5, 0.5]), trials=20)
        assert est.p_hat == 0.0 and est.block_errors_p == ()

    def test_zero_rate_code_never_errs(self):
        ch = example1_channel(0.3)
        code = build_code(ch, U_EQUALS_X, n=30, B=3, rate_p=0, rate_pp=0)
        est = estimate_error(ch, code, JammerStrategy.iid([0.5, 0.5]), trials=30)
        assert est.p_hat == 0.0


class TestPermutations:
    @given(st.integers(1, 30), st.integers(0, 2**32 - 1))
    def test_inverse(self, n, seed):
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        s = rng.integers(0, 5, n)
        assert np.array_equal(apply_permutation(perm, invert_permutation(perm, s)), s)
        assert np.array_equal(invert_permutation(perm, apply_permutation(perm, s)), s)

    def test_tuple_validation(self):
        with pytest.raises(ValidationError):
            PermutationTuple(np.array([[0, 0, 1]]))
        t = PermutationTuple.identity(3, 4)
        assert np.array_equal(t.block(2), np.arange(4))

    def test_identity_permutations_are_bit_identical(self):
        ch = example1_channel(0.1)
        code = build_code(ch, U_EQUALS_X, n=60, B=3, rate_p=2 / 60, rate_pp=0, delta=0.7, seed=2)
        ident = RandomizedCode(code, PermutationTuple.identity(3, 60), fresh_per_trial=False)
        jam = JammerStrategy.iid([0.3, 0.7])
        a = estimate_error(ch, code, jam, trials=60, seed=5)
        b = estimate_error(ch, ident, jam, trials=60, seed=5)
        assert a == b

    def test_randomize_is_seeded(self):
        code = build_code(example1_channel(0.1), U_EQUALS_X, n=20, B=2, rate_p=0.05, rate_pp=0)
        assert np.array_equal(randomize(code, 3).perms.perms, randomize(code, 3).perms.perms)
        assert not np.array_equal(randomize(code, 3).perms.perms, randomize(code, 4).perms.perms)

    def test_permuted_code_matches_base_on_iid_states(self):
        ch = example1_channel(0.1)
        code = build_code(ch, U_EQUALS_X, n=100, B=2, rate_p=2 / 100, rate_pp=0, delta=0.7, seed=2)
        jam = JammerStrategy.iid([0.5, 0.5])
        N = 400
        a = estimate_error(ch, code, jam, trials=N, seed=11)
        b = estimate_error(ch, randomize(code, 1), jam, trials=N, seed=12)
        pooled = (a.errors + b.errors) / (2 * N)
        if 0 < pooled < 1:
            z = (a.p_hat - b.p_hat) / math.sqrt(pooled * (1 - pooled) * 2 / N)
            assert 2 * norm.sf(abs(z)) > 0.01
        else:
            assert a.errors == b.errors

    def test_permutations_defeat_a_fixed_adverse_sequence(self):
        ch = example1_channel(0.0)
        n = 50
        code = build_code(ch, U_EQUALS_X, n=n, B=2, rate_p=1 / n, rate_pp=0, delta=1.0, seed=1)
        # Fixed sequences that replay one of the relay codewords in block 2.
        candidates = [np.concatenate([np.zeros(n, int), code.x1[2][m]]) for m in range(code.m_p)]
        worst = max(
            estimate_error(ch, code, JammerStrategy.fixed(s), trials=100, seed=0).p_hat for s in candidates
        )
        s = candidates[int(np.argmax([0, 1]))]
        avg = estimate_error(ch, randomize(code, 0), JammerStrategy.fixed(s), trials=200, seed=0).p_hat
        assert avg <= worst
        assert worst >= 0.4


class TestMonteCarlo:
    def test_reproducible_and_thread_independent(self):
        ch = example1_channel(0.1)
        code = build_code(ch, U_EQUALS_X, n=60, B=3, rate_p=2 / 60, rate_pp=0, delta=0.7, seed=2)
        rc = randomize(code, 4)
        jam = JammerStrategy.iid([0.4, 0.6])
        a = estimate_error(ch, rc, jam, trials=40, seed=8)
        b = estimate_error(ch, rc, jam, trials=40, seed=8)
        c = estimate_error(ch, rc, jam, trials=40, seed=8, threads=3)
        assert a == b == c

    def test_trials_must_be_positive(self):
        code = build_code(example1_channel(0.1), U_EQUALS_X, n=10, B=2, rate_p=0, rate_pp=0)
        with pytest.raises(ValidationError):
            estimate_error(example1_channel(0.1), code, JammerStrategy.iid([1, 0]), trials=0)

    def test_channel_sampler_frequencies(self):
        ch = example1_channel(0.3)
        draw = _channel_sampler(ch)
        rng = np.random.default_rng(0)
        N = 40_000
        y, y1 = draw(np.ones(N, int), np.zeros(N, int), np.ones(N, int), rng)
        assert np.all(y == 1)
        assert abs(y1.mean() - 0.7) < 0.01

    def test_per_block_jammer(self):
        ch = example1_channel(0.0)
        code = build_code(ch, U_EQUALS_X, n=20, B=2, rate_p=0.05, rate_pp=0)
        sampler = JammerStrategy.per_block([[1, 0], [0, 1]]).sampler(ch, code)
        s = sampler(np.random.default_rng(0))
        assert np.all(s[:20] == 0) and np.all(s[20:] == 1)
        with pytest.raises(ValidationError):
            JammerStrategy.per_block([[1, 0]]).sampler(ch, code)

    def test_jammer_validation(self):
        ch = example1_channel(0.0)
        code = build_code(ch, U_EQUALS_X, n=20, B=2, rate_p=0.05, rate_pp=0)
        with pytest.raises(ValidationError):
            JammerStrategy.iid([0.5, 0.6])
        with pytest.raises(ValidationError):
            JammerStrategy.fixed(np.zeros(5, int)).sampler(ch, code)
        with pytest.raises(ValidationError):
            JammerStrategy.fixed(np.full(40, 2)).sampler(ch, code)
        with pytest.raises(ValidationError):
            JammerStrategy("gaussian")
        with pytest.raises(ValidationError):
            JammerStrategy("attack_x")
        with pytest.raises(ValidationError):
            JammerStrategy.iid([1.0]).sampler(ch, code)

    def test_attack_on_symmetrizable_x_channel(self):
        ch = xor_channel()
        P = np.full((1, 2, 1), 0.5)
        n = 50
        code = build_code(ch, P, n=n, B=2, rate_p=0, rate_pp=1 / n, delta=1.0, seed=3)
        est = estimate_error(ch, code, JammerStrategy.attack_x(np.eye(2)), trials=300, seed=2)
        assert est.p_hat + (est.wilson_interval[1] - est.p_hat) > 0.15

    def test_attack_x1y1_on_example1(self):
        ch = example1_channel(0.0)
        n = 50
        code = build_code(ch, U_EQUALS_X, n=n, B=2, rate_p=1 / n, rate_pp=0, delta=1.0, seed=1)
        J = np.asarray(check_symmetrizable_x1y1(ch).witness)
        est = estimate_error(ch, code, JammerStrategy.attack_x1y1(J), trials=300, seed=2)
        assert est.p_hat >= 0.2
        benign = estimate_error(ch, code, JammerStrategy.iid([0.5, 0.5]), trials=300, seed=2)
        assert benign.p_hat <= 0.05

    def test_attack_x1y1_needs_state_free_relay_link(self):
        def law(y, y1, x, x1, s):
            return float(y == y1 and y1 == x ^ s)

        ch = RelayChannel.from_function(2, 1, 2, 2, 2, law)
        code = build_code(ch, np.full((1, 2, 1), 0.5), n=10, B=2, rate_p=0, rate_pp=0.1)
        with pytest.raises(StructureError):
            JammerStrategy.attack_x1y1(np.full((2, 2), 0.5)).sampler(ch, code)

    def test_run_trial_with_given_messages(self):
        ch = split_pipe()
        code = build_code(ch, split_law(), n=60, B=3, rate_p=2 / 60, rate_pp=1 / 60, delta=1.0, seed=4)
        mp, mpp = np.array([0, 3, 1, 0]), np.array([0, 1, 0, 0])
        out = run_trial(ch, code, np.zeros(180, int), np.random.default_rng(0), mp=mp, mpp=mpp)
        assert not out.error and not out.relay_error


class TestWilson:
    def test_known_value(self):
        lo, hi = wilson_interval(5, 100)
        assert lo == pytest.approx(0.02154, abs=1e-4)
        assert hi == pytest.approx(0.11175, abs=1e-4)

    @given(st.integers(1, 500), st.data())
    def test_brackets_estimate(self, trials, data):
        errors = data.draw(st.integers(0, trials))
        lo, hi = wilson_interval(errors, trials)
        assert 0.0 <= lo <= errors / trials <= hi <= 1.0

    def test_as_dict_fields(self):
        code = build_code(example1_channel(0.1), U_EQUALS_X, n=10, B=2, rate_p=0, rate_pp=0)
        d = estimate_error(example1_channel(0.1), code, JammerStrategy.iid([1, 0]), trials=3).as_dict()
        for k in ("trials", "errors", "p_hat", "ci_lo", "ci_hi"):
            assert k in d
