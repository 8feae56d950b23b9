import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractor_ebm.errors import ContractError, DivergenceError
from attractor_ebm.memory import (
    MemorySpec,
    MemoryState,
    _validate_action_columns,
    build_action_matrix,
    build_recurrent,
    cann_step,
    encode_action,
    matrix_digest,
    memory_update,
    one_hot,
    spectral_norm_power_iteration,
    validate_one_hot,
    zero_action,
)
from attractor_ebm.rng import RngStream


def make_state(n=16, alpha=0.5, beta=0.0, firing="tanh", w_seed=1, a_seed=2,
               n_actions=4, rank=None, seed=0):
    spec = MemorySpec(
        n=n, rank=rank or max(1, n // 4), alpha=alpha, beta=beta,
        n_actions=n_actions, w_seed=w_seed, a_seed=a_seed, firing=firing,
    )
    return spec.initial_state(RngStream(seed, 0))


class TestBuildRecurrent:
    def test_zero_alpha_gives_zero_matrix(self):
        np.testing.assert_array_equal(build_recurrent(8, 2, 0.0, seed=1), np.zeros((8, 8)))

    def test_spectral_norm_and_rank_against_svd_oracle(self):
        W = build_recurrent(64, 8, 0.5, seed=3)
        measured = spectral_norm_power_iteration(W, iters=200)
        assert 0.499 <= measured <= 0.501
        sv = np.linalg.svd(W, compute_uv=False)
        numerical_rank = int(np.sum(sv > 1e-8 * sv[0]))
        assert numerical_rank == 8

    def test_same_seed_bit_identical(self):
        a = build_recurrent(32, 4, 0.7, seed=9)
        b = build_recurrent(32, 4, 0.7, seed=9)
        np.testing.assert_array_equal(a, b)
        assert matrix_digest(a) == matrix_digest(b)

    def test_rank_bounds_enforced(self):
        with pytest.raises(ContractError):
            build_recurrent(4, 5, 0.5, seed=0)
        with pytest.raises(ContractError):
            build_recurrent(4, 0, 0.5, seed=0)

    def test_negative_alpha_rejected(self):
        with pytest.raises(ContractError):
            build_recurrent(4, 2, -0.1, seed=0)


class TestCannStep:
    def test_leaky_integrator_converges_to_constant_drive(self):
        # W = 0, beta = 0: I relaxes to the drive like exp(-t).
        state = make_state(n=8, alpha=0.0, beta=0.0)
        drive = np.linspace(0.1, 0.8, 8)
        start_gap = np.abs(state.I - drive).max()
        for _ in range(200):  # T = 10 at dt = 0.05
            state = cann_step(state, drive, 0.05)
        assert np.abs(state.I - drive).max() <= np.exp(-10) * start_gap + 1e-3

    def test_linear_fixed_point_matches_direct_solve(self):
        # Identity firing, beta = 0: the fixed point solves (Id - W) I = u.
        state = make_state(n=64, alpha=0.3, beta=0.0, firing="identity", rank=8)
        rng = RngStream(5, 0)
        drive = rng.standard_normal(64)
        for _ in range(600):  # relax to depth (1 - alpha) * 30
            state = cann_step(state, drive, 0.05)
        direct = np.linalg.solve(np.eye(64) - state.W, drive)
        assert np.abs(state.I - direct).max() <= 1e-4

    def test_bounded_with_adaptation_and_tanh(self):
        state = make_state(n=32, alpha=0.5, beta=1.0, firing="tanh")
        drive = np.zeros(32)
        for _ in range(10_000):
            state = cann_step(state, drive, 0.05)
            assert np.abs(state.I).max() <= 10.0

    def test_firing_rate_consistent_with_input(self):
        state = make_state(n=8, beta=0.5)
        state = cann_step(state, np.ones(8), 0.05)
        np.testing.assert_array_equal(state.m, np.tanh(state.I))

    def test_divergence_detected(self):
        state = make_state(n=4, alpha=0.0)
        with pytest.raises(DivergenceError):
            cann_step(state, np.full(4, np.inf), 0.05)

    def test_drive_width_checked(self):
        state = make_state(n=8)
        with pytest.raises(ContractError):
            cann_step(state, np.zeros(9), 0.05)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 50))
    @settings(max_examples=25, deadline=None)
    def test_tanh_rates_bounded_by_one(self, seed, steps):
        state = make_state(n=8, alpha=0.8, beta=0.7)
        drive = RngStream(seed, 0).standard_normal(8) * 3.0
        for _ in range(steps):
            state = cann_step(state, drive, 0.05)
        assert np.abs(state.m).max() <= 1.0


class TestMemoryUpdate:
    def test_single_step_matches_hand_formula(self):
        state = make_state(n=4, alpha=0.0, beta=0.0, n_actions=2)
        s_top = np.array([0.1, 0.2, 0.3, 0.4])
        action = one_hot(1, 2)
        dt = 0.05
        drive = s_top + state.A[:, 1]
        expected_I = state.I + dt * (-state.I + state.W @ state.m - state.V + drive)
        out = memory_update(state, s_top, action, duration=dt, dt=dt)
        np.testing.assert_allclose(out.I, expected_I, rtol=1e-15)
        np.testing.assert_array_equal(out.m, np.tanh(out.I))

    def test_transition_is_bit_stable(self):
        state = make_state(n=16)
        s_top = RngStream(3, 0).standard_normal(16)
        a = one_hot(2, 4)
        out1 = memory_update(state, s_top, a, duration=10.0, dt=0.05)
        out2 = memory_update(state, s_top, a, duration=10.0, dt=0.05)
        np.testing.assert_array_equal(out1.I, out2.I)
        np.testing.assert_array_equal(out1.V, out2.V)
        np.testing.assert_array_equal(out1.m, out2.m)

    def test_attractor_consistency_paired_trials(self):
        # Re-presenting the pattern that generated the state moves the
        # memory less than an equal-norm random pattern does.
        wins = 0
        for trial in range(20):
            rng = RngStream(1000 + trial, 0)
            state = make_state(n=32, alpha=0.5, beta=0.0, w_seed=trial, a_seed=trial + 50)
            pattern = rng.standard_normal(32)
            zero = zero_action(4)
            state = memory_update(state, pattern, zero, duration=10.0, dt=0.05)
            m_t = state.m.copy()
            stay = memory_update(state, pattern, zero, duration=10.0, dt=0.05)
            rand = rng.standard_normal(32)
            rand *= np.linalg.norm(pattern) / np.linalg.norm(rand)
            jump = memory_update(state, rand, zero, duration=10.0, dt=0.05)
            if np.linalg.norm(stay.m - m_t) < np.linalg.norm(jump.m - m_t):
                wins += 1
        assert wins >= 18

    def test_duration_below_dt_rejected(self):
        state = make_state()
        with pytest.raises(ContractError):
            memory_update(state, np.zeros(16), one_hot(0, 4), duration=0.01, dt=0.05)

    def test_structure_matrices_never_change(self):
        state = make_state(n=16)
        w_digest, a_digest = matrix_digest(state.W), matrix_digest(state.A)
        out = memory_update(state, np.ones(16), one_hot(0, 4), duration=10.0, dt=0.05)
        assert out.W is state.W and out.A is state.A
        assert matrix_digest(out.W) == w_digest
        assert matrix_digest(out.A) == a_digest

    def test_batched_rows_evolve_independently(self):
        spec = MemorySpec(n=8, rank=2, alpha=0.4, beta=0.3, n_actions=4,
                          w_seed=1, a_seed=2)
        from attractor_ebm.rng import BatchedStreams
        batch = spec.initial_state(BatchedStreams.for_batch(0, 2000, 3), batch=3)
        tops = RngStream(9, 0).standard_normal((3, 8))
        actions = np.stack([one_hot(i, 4) for i in range(3)])
        out = memory_update(batch, tops, actions, duration=1.0, dt=0.05)
        for b in range(3):
            single = MemoryState(
                I=batch.I[b], m=batch.m[b], V=batch.V[b], W=batch.W, A=batch.A,
                alpha=batch.alpha, beta=batch.beta, firing=batch.firing,
            )
            ref = memory_update(single, tops[b], actions[b], duration=1.0, dt=0.05)
            np.testing.assert_allclose(out.I[b], ref.I, rtol=1e-12, atol=1e-15)


class TestEncodeAction:
    def test_zero_action_gives_zero_drive(self):
        A = build_action_matrix(8, 4, seed=1)
        np.testing.assert_array_equal(encode_action(zero_action(4), A), np.zeros(8))

    def test_one_hot_selects_scaled_column(self):
        A = build_action_matrix(8, 4, seed=1, gain=2.5)
        np.testing.assert_array_equal(encode_action(one_hot(2, 4), A), A[:, 2])
        assert abs(np.linalg.norm(A[:, 2]) - 2.5) < 1e-12

    def test_columns_pairwise_distinct_at_construction(self):
        A = build_action_matrix(64, 16, seed=3)
        for j in range(16):
            for k in range(j + 1, 16):
                assert np.linalg.norm(A[:, j] - A[:, k]) > 1e-6

    def test_duplicate_columns_rejected(self):
        bad = np.ones((4, 2))
        with pytest.raises(ContractError):
            _validate_action_columns(bad)

    def test_width_mismatch_rejected(self):
        A = build_action_matrix(8, 4, seed=1)
        with pytest.raises(ContractError):
            encode_action(np.zeros(5), A)


class TestActionVectors:
    def test_one_hot_shape(self):
        a = one_hot(3, 6)
        assert validate_one_hot(a) == 3

    def test_rejects_two_hot(self):
        a = np.zeros(4)
        a[1] = a[2] = 1.0
        with pytest.raises(ContractError):
            validate_one_hot(a)

    def test_rejects_scaled(self):
        with pytest.raises(ContractError):
            validate_one_hot(np.array([0.0, 0.5, 0.0]))

    def test_rejects_zero(self):
        with pytest.raises(ContractError):
            validate_one_hot(np.zeros(3))


class TestMemorySpec:
    def test_initial_state_recomputable_firing(self):
        state = make_state(n=8)
        np.testing.assert_array_equal(state.m, np.tanh(state.I))
        np.testing.assert_array_equal(state.V, np.zeros(8))

    def test_matrices_regenerate_bit_exactly(self):
        spec = MemorySpec(n=16, rank=4, alpha=0.5, beta=0.0, n_actions=4,
                          w_seed=11, a_seed=12)
        W1, A1 = spec.build_matrices()
        W2, A2 = spec.build_matrices()
        np.testing.assert_array_equal(W1, W2)
        np.testing.assert_array_equal(A1, A2)
