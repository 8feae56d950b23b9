import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from attractor_ebm.errors import ContractError, DivergenceError
from attractor_ebm.hierarchy import (
    HierarchyParams,
    LayerStack,
    layer_loss,
    layer_mean,
    leaky_relu,
    learn_layer,
    params_digest,
    posterior_sample,
    predict_mean,
    sample_prior_stack,
    step_observation,
)
from attractor_ebm.rng import BatchedStreams, RngStream


def make_params(n, lam=1.0, seed=0, **kw):
    return HierarchyParams.init(n, seed, lam=lam, **kw)


def scalar_loop_affine(theta, s_upper, slope):
    """Independent oracle: the top-down mean via explicit python loops."""
    out = []
    for i in range(theta.shape[0]):
        acc = 0.0
        for j in range(theta.shape[1]):
            v = s_upper[j]
            acc += theta[i][j] * (v if v >= 0 else slope * v)
        out.append(acc)
    return np.array(out)


class TestLayerMean:
    def test_identity_weights_apply_rectifier(self):
        out = layer_mean(np.eye(2), np.array([2.0, -2.0]), 0.01)
        np.testing.assert_allclose(out, [2.0, -0.02])

    def test_zero_weights_give_zero(self):
        out = layer_mean(np.zeros((3, 2)), np.array([5.0, -7.0]), 0.01)
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_hand_evaluated_affine_map(self):
        theta = np.array([[0.5, -1.0]])
        s = np.array([4.0, -3.0])
        out = layer_mean(theta, s, 0.01)
        np.testing.assert_allclose(out, [2.03])
        np.testing.assert_array_equal(out, scalar_loop_affine(theta, s, 0.01))

    def test_batched_matches_per_row(self):
        rng = np.random.default_rng(3)
        theta = rng.standard_normal((3, 4))
        batch = rng.standard_normal((5, 4))
        out = layer_mean(theta, batch, 0.01)
        # batched GEMM and single GEMV accumulate in different orders
        for b in range(5):
            np.testing.assert_allclose(out[b], layer_mean(theta, batch[b], 0.01), rtol=1e-12, atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ContractError):
            layer_mean(np.eye(2), np.zeros(3), 0.01)


class TestLayerLoss:
    def test_zero_error_gives_zero(self):
        assert layer_loss(np.zeros(4), 1.0) == 0.0

    def test_three_four_five(self):
        assert layer_loss(np.array([3.0, 4.0]), 1.0) == 12.5

    def test_half_precision_case_against_loop(self):
        e = np.array([1.0, -2.0, 2.0])
        acc = 0.0
        for v in e:
            acc += 0.5 * 0.5 * v * v
        assert layer_loss(e, 0.5) == acc == 2.25

    def test_non_finite_rejected(self):
        with pytest.raises(ContractError):
            layer_loss(np.array([np.inf]), 1.0)

    # Magnitudes where squares stay representable; below ~1e-154 the square
    # underflows to zero and the "zero iff zero" reading no longer applies.
    _component = st.one_of(
        st.just(0.0),
        st.floats(1e-6, 1e6),
        st.floats(-1e6, -1e-6),
    )

    @given(st.lists(_component, min_size=1, max_size=16), st.floats(1e-3, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_and_zero_iff_zero_error(self, values, lam):
        e = np.array(values)
        loss = layer_loss(e, lam)
        assert loss >= 0.0
        if np.any(e != 0.0):
            assert loss > 0.0
        else:
            assert loss == 0.0


class TestLearnLayer:
    def test_zero_error_is_fixed_point_bit_exactly(self):
        rng = np.random.default_rng(1)
        theta = rng.standard_normal((3, 4))
        upper = rng.standard_normal(4)
        target = layer_mean(theta, upper, 0.01)
        p = make_params((3, 4))
        for method in ("closed", "euler"):
            out = learn_layer(theta, target, upper, 1.0, p, method=method)
            np.testing.assert_array_equal(out, theta)

    def test_one_dimensional_flow_matches_linear_ode_oracle(self):
        # dtheta/dt = 0.1 * (1 - theta); Euler with dt=0.05 over T=10.
        p = HierarchyParams(
            n=(1, 1), theta=[np.zeros((1, 1))], lam=np.array([1.0, 1.0]),
            dt=0.05, T=10.0, tau_theta=10.0,
        )
        oracle = 0.0
        for _ in range(200):
            oracle += 0.05 * 0.1 * (1.0 - oracle)
        assert abs(oracle - (1.0 - 0.995**200)) < 1e-12
        assert abs((1.0 - np.exp(-1.0)) - oracle) < 2e-3  # closed-form ODE limit
        for method in ("closed", "euler"):
            got = learn_layer(
                np.zeros((1, 1)), np.array([1.0]), np.array([1.0]), 1.0, p, method=method
            )[0, 0]
            assert abs(got - oracle) <= 1e-10

    def test_single_step_matches_central_finite_differences(self):
        rng = np.random.default_rng(7)
        theta = rng.standard_normal((3, 4))
        target = rng.standard_normal(3)
        upper = rng.standard_normal(4)
        lam = 0.7
        p = HierarchyParams(
            n=(3, 4), theta=[theta], lam=np.array([lam, 1.0]),
            dt=0.05, T=0.05, tau_theta=10.0,
        )
        updated = learn_layer(theta, target, upper, lam, p)
        direction = (updated - theta) / (p.dt / p.tau_theta)

        def loss_at(th):
            return layer_loss(target - layer_mean(th, upper, p.slope), lam)

        h = 1e-5
        grad = np.zeros_like(theta)
        for i in range(theta.shape[0]):
            for j in range(theta.shape[1]):
                dp = theta.copy(); dp[i, j] += h
                dm = theta.copy(); dm[i, j] -= h
                grad[i, j] = (loss_at(dp) - loss_at(dm)) / (2 * h)
        rel = np.linalg.norm(direction - (-grad)) / np.linalg.norm(grad)
        assert rel <= 1e-4

    def test_closed_form_equals_euler_loop(self):
        rng = np.random.default_rng(11)
        for n_l, n_u, batch in [(3, 4, 1), (5, 2, 7), (8, 16, 3)]:
            theta = rng.standard_normal((n_l, n_u))
            target = rng.standard_normal((batch, n_l)) if batch > 1 else rng.standard_normal(n_l)
            upper = rng.standard_normal((batch, n_u)) if batch > 1 else rng.standard_normal(n_u)
            p = make_params((n_l, n_u), lam=0.9)
            a = learn_layer(theta, target, upper, 0.9, p, method="closed")
            b = learn_layer(theta, target, upper, 0.9, p, method="euler")
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-11)

    def test_batch_drift_is_the_mean_of_elementwise_drifts(self):
        # A single step on a batch equals the average of single-element steps.
        rng = np.random.default_rng(5)
        theta = rng.standard_normal((2, 3))
        targets = rng.standard_normal((4, 2))
        uppers = rng.standard_normal((4, 3))
        p = HierarchyParams(
            n=(2, 3), theta=[theta], lam=np.array([1.0, 1.0]),
            dt=0.05, T=0.05, tau_theta=10.0,
        )
        batched = learn_layer(theta, targets, uppers, 1.0, p)
        singles = [learn_layer(theta, targets[b], uppers[b], 1.0, p) for b in range(4)]
        np.testing.assert_allclose(batched - theta, np.mean(singles, axis=0) - theta, atol=1e-12)

    def test_divergence_raises(self):
        p = HierarchyParams(
            n=(1, 1), theta=[np.zeros((1, 1))], lam=np.array([1e9, 1.0]),
            dt=0.05, T=10.0, tau_theta=1.0,
        )
        with pytest.raises(DivergenceError):
            learn_layer(np.zeros((1, 1)), np.array([1.0]), np.array([1.0]), 1e9, p)

    def test_determinism(self):
        rng = np.random.default_rng(2)
        theta = rng.standard_normal((3, 3))
        target = rng.standard_normal(3)
        upper = rng.standard_normal(3)
        p = make_params((3, 3))
        a = learn_layer(theta, target, upper, 1.0, p)
        b = learn_layer(theta, target, upper, 1.0, p)
        np.testing.assert_array_equal(a, b)


class TestSamplePriorStack:
    def test_vanishing_variance_recovers_the_mean_chain(self):
        p = make_params((3, 5, 4), lam=1e8, seed=4)
        m = np.linspace(-1, 1, 4)
        stack = sample_prior_stack(p, m, RngStream(0, 0))
        np.testing.assert_allclose(stack.s_hat[2], m, atol=1e-3)
        x = m
        for l in (1, 0):
            x = layer_mean(p.theta[l], x, p.slope)
            np.testing.assert_allclose(stack.s_hat[l], x, atol=1e-3)

    def test_direct_sampling_standard_normal_moments(self):
        # theta = 0, lambda = 1, m = 0: bottom samples are standard normal.
        p = HierarchyParams(
            n=(1, 1), theta=[np.zeros((1, 1))], lam=np.array([1.0, 1.0])
        )
        m = np.zeros((100_000, 1))
        stack = sample_prior_stack(p, m, RngStream(123, 0))
        x = stack.s_hat[0][:, 0]
        assert abs(x.mean()) < 0.02
        assert 0.95 < x.var() < 1.05

    def test_langevin_stationary_distribution_ks(self):
        # 10^4 independent chains (dt=0.05, T=10) retained at their final
        # state; with zero weights the bottom-layer law is standard normal.
        p = HierarchyParams(
            n=(1, 1), theta=[np.zeros((1, 1))], lam=np.array([1.0, 1.0]),
            dt=0.05, T=10.0,
        )
        m = np.zeros((10_000, 1))
        stack = sample_prior_stack(p, m, RngStream(77, 0), mode="langevin")
        x = stack.s_hat[0][:, 0]
        result = stats.kstest(x, "norm")
        assert result.pvalue > 0.01

    def test_langevin_and_direct_agree_distributionally(self):
        p = HierarchyParams(
            n=(1, 1), theta=[np.zeros((1, 1))], lam=np.array([1.0, 1.0]),
            dt=0.05, T=10.0,
        )
        m = np.zeros((10_000, 1))
        direct = sample_prior_stack(p, m, RngStream(5, 0), mode="direct").s_hat[0][:, 0]
        langevin = sample_prior_stack(p, m, RngStream(6, 0), mode="langevin").s_hat[0][:, 0]
        assert stats.ks_2samp(direct, langevin).pvalue > 0.01

    def test_mean_mode_is_noise_free(self):
        p = make_params((3, 4), seed=9)
        m = np.linspace(0, 1, 4)
        stack = sample_prior_stack(p, m, RngStream(0, 0), mode="mean")
        np.testing.assert_array_equal(stack.s_hat[1], m)
        np.testing.assert_array_equal(stack.s_hat[0], layer_mean(p.theta[0], m, p.slope))

    def test_divergence_names_the_layer(self):
        p = HierarchyParams(
            n=(1, 1), theta=[np.zeros((1, 1))], lam=np.array([1.0, 1e9]),
            dt=0.05, T=10.0,
        )
        with pytest.raises(DivergenceError) as err:
            sample_prior_stack(p, np.zeros(1), RngStream(0, 0), mode="langevin")
        assert err.value.layer == 1

    def test_determinism(self):
        p = make_params((4, 6, 5), seed=1)
        m = np.linspace(-1, 1, 5)
        a = sample_prior_stack(p, m, RngStream(3, 1))
        b = sample_prior_stack(p, m, RngStream(3, 1))
        for x, y in zip(a.s_hat, b.s_hat):
            np.testing.assert_array_equal(x, y)


def conjugate_posterior_1d(theta_b, lam_b, lam_h, obs, prior_mean):
    """Analytic Gaussian product for a linear 1-d readout."""
    precision = theta_b**2 * lam_b + lam_h
    mean = (theta_b * lam_b * obs + lam_h * prior_mean) / precision
    return mean, 1.0 / precision


class TestPosteriorSample:
    def test_drift_vanishes_at_the_gaussian_product_mean(self):
        # Linear readout, unit precisions: the balance point is the midpoint.
        p = HierarchyParams(
            n=(1, 1), theta=[np.array([[1.0]])], lam=np.array([1.0, 1.0]),
            slope=1.0, dt=0.05, T=10.0,
        )
        out = posterior_sample(
            np.array([0.75]), np.array([0.5]), np.array([0.25]),
            np.array([[1.0]]), None, (1.0, 1.0), p, RngStream(0, 0),
            deterministic=True,
        )
        np.testing.assert_array_equal(out, [0.5])

    def test_stationary_matches_conjugate_gaussian_oracle(self):
        obs, prior_mean = 0.75, 0.25
        mean_oracle, var_oracle = conjugate_posterior_1d(1.0, 1.0, 1.0, obs, prior_mean)
        p = HierarchyParams(
            n=(1, 1), theta=[np.array([[1.0]])], lam=np.array([1.0, 1.0]),
            slope=1.0, dt=0.02, T=10.0,
        )
        n = 100_000
        samples = posterior_sample(
            np.full((n, 1), obs), np.full((n, 1), prior_mean), np.full((n, 1), prior_mean),
            np.array([[1.0]]), None, (1.0, 1.0), p, RngStream(21, 0),
        )[:, 0]
        assert abs(samples.mean() - mean_oracle) < 0.02
        assert abs(samples.var() - var_oracle) < 0.1 * var_oracle

    def test_zero_noise_converges_to_the_drift_fixed_point(self):
        p = HierarchyParams(
            n=(1, 1), theta=[np.array([[1.0]])], lam=np.array([1.0, 1.0]),
            slope=1.0, dt=0.05, T=10.0,
        )
        out = posterior_sample(
            np.array([0.75]), np.array([0.25]), np.array([0.25]),
            np.array([[1.0]]), None, (1.0, 1.0), p, RngStream(0, 0),
            deterministic=True,
        )
        assert abs(out[0] - 0.5) <= 1e-4

    def test_prior_mean_through_upper_weights(self):
        # With theta_here given, the prior pull centers on theta_here f(upper).
        p = HierarchyParams(
            n=(1, 1), theta=[np.array([[1.0]])], lam=np.array([1.0, 1.0]),
            slope=1.0, dt=0.05, T=10.0,
        )
        theta_here = np.array([[2.0]])
        upper = np.array([0.35])
        out = posterior_sample(
            np.array([0.3]), np.array([0.5]), upper,
            np.array([[1.0]]), theta_here, (1.0, 1.0), p, RngStream(0, 0),
            deterministic=True,
        )
        want = (0.3 + 2.0 * 0.35) / 2.0
        assert abs(out[0] - want) <= 1e-4

    def test_divergence_raises(self):
        p = HierarchyParams(
            n=(1, 1), theta=[np.array([[1.0]])], lam=np.array([1.0, 1e9]),
            dt=0.05, T=10.0,
        )
        with pytest.raises(DivergenceError):
            posterior_sample(
                np.array([0.5]), np.array([0.0]), np.array([0.0]),
                np.array([[1.0]]), None, (1.0, 1e9), p, RngStream(0, 0),
            )

    def test_determinism(self):
        p = make_params((2, 3), seed=3, lam=np.array([1.0, 2.0]))
        args = (
            np.array([0.5, -0.5]), np.array([0.1, 0.2, 0.3]), np.array([0.1, 0.2, 0.3]),
            p.theta[0], None, (1.0, 2.0), p,
        )
        a = posterior_sample(*args, RngStream(8, 0))
        b = posterior_sample(*args, RngStream(8, 0))
        np.testing.assert_array_equal(a, b)


class TestStepObservation:
    def test_exactly_fitted_model_is_a_fixed_point(self):
        # Observation constructed to match the prediction: zero loss, and
        # the weights do not move at all (even at large precision).
        p = HierarchyParams.init(
            (2, 2), 0, lam=np.array([1e4, 1e4]), dt=1e-5, T=1e-3
        )
        m = np.array([0.3, -0.2])
        stack = sample_prior_stack(p, m, RngStream(1, 0))
        obs = layer_mean(p.theta[0], stack.s_hat[1], p.slope)
        p2, stack2, met = step_observation(p, stack, m, obs, RngStream(2, 0))
        assert met.losses[0] == 0.0
        np.testing.assert_array_equal(p2.theta[0], p.theta[0])

    def test_repeated_constant_observation_loss_trend(self):
        # Mean layer-0 loss over 10 seeds is non-increasing after step 5,
        # up to 3 standard errors of the step-to-step difference.
        n_seeds, n_steps = 10, 55
        losses = np.zeros((n_seeds, n_steps))
        obs = np.full(4, 0.6)
        m = np.zeros(8)
        for s in range(n_seeds):
            p = HierarchyParams.init((4, 8, 8), s, dt=0.05, T=10.0)
            rng = RngStream(100 + s, 0)
            for t in range(n_steps):
                stack = sample_prior_stack(p, m, rng)
                p, _, met = step_observation(p, stack, m, obs, rng)
                losses[s, t] = met.losses[0]
        mu = losses.mean(axis=0)
        se = losses.std(axis=0, ddof=1) / np.sqrt(n_seeds)
        for t in range(5, n_steps - 1):
            slack = 3.0 * np.hypot(se[t], se[t + 1])
            assert mu[t + 1] <= mu[t] + slack, f"loss rose at step {t}"

    def test_metrics_mse_matches_scalar_loop_exactly(self):
        # Differences are dyadic rationals, so any summation order is exact.
        p = make_params((4, 3), seed=0)
        m = np.zeros(3)
        base = sample_prior_stack(p, m, RngStream(0, 0))
        diffs = np.array([0.25, -0.5, 1.0, 0.125])
        obs = base.s_hat[0] + diffs
        stack = LayerStack(s_hat=[obs - diffs, base.s_hat[1]])
        _, _, met = step_observation(p, stack, m, obs, RngStream(1, 0))
        acc = 0.0
        for d in diffs:
            acc += d * d
        assert met.mse == acc / len(diffs)

    def test_weight_update_is_local(self):
        # Perturbing a non-adjacent layer's weights leaves lower updates
        # bit-identical (same seeds, same stack).
        pa = HierarchyParams.init((3, 4, 4, 4), 0)
        pb = pa.copy()
        pb.theta[2] = pb.theta[2] + 0.1
        m = np.linspace(0, 1, 4)
        stack = sample_prior_stack(pa, m, RngStream(5, 0))
        obs = np.array([0.1, 0.5, 0.9])
        out_a, _, _ = step_observation(pa, stack, m, obs, RngStream(9, 0))
        out_b, _, _ = step_observation(pb, stack, m, obs, RngStream(9, 0))
        np.testing.assert_array_equal(out_a.theta[0], out_b.theta[0])
        np.testing.assert_array_equal(out_a.theta[1], out_b.theta[1])
        assert not np.array_equal(out_a.theta[2], out_b.theta[2])

    def test_loss_decomposition_is_exact(self):
        p = make_params((3, 5, 4), seed=2)
        m = np.linspace(-0.5, 0.5, 4)
        stack = sample_prior_stack(p, m, RngStream(3, 0))
        obs = np.array([0.2, 0.4, 0.6])
        p2, stack2, met = step_observation(p, stack, m, obs, RngStream(4, 0))
        recomputed = []
        for l in range(p.L):
            e = stack2.s[l] - layer_mean(p.theta[l], stack.s_hat[l + 1], p.slope)
            recomputed.append(float(np.mean(layer_loss(e, p.lam[l]))))
        np.testing.assert_array_equal(met.losses, recomputed)
        assert met.losses.sum() == sum(recomputed)

    def test_error_fields_recompute_exactly(self):
        p = make_params((3, 5, 4), seed=6)
        m = np.linspace(-0.5, 0.5, 4)
        stack = sample_prior_stack(p, m, RngStream(13, 0))
        obs = np.array([0.2, 0.4, 0.6])
        p2, stack2, _ = step_observation(p, stack, m, obs, RngStream(14, 0))
        for l in range(p.L):
            pred = layer_mean(p2.theta[l], stack2.s_hat[l + 1], p2.slope)
            np.testing.assert_array_equal(stack2.e_hat[l], stack2.s[l] - pred)
            recon = layer_mean(p2.theta[l], stack2.s[l + 1], p2.slope)
            np.testing.assert_array_equal(stack2.e[l], stack2.s[l] - recon)
        np.testing.assert_array_equal(stack2.e_hat[p.L], stack2.s[p.L] - m)

    def test_bitwise_determinism(self):
        p = make_params((3, 5, 4), seed=2)
        m = np.linspace(-0.5, 0.5, 4)
        obs = np.array([0.2, 0.4, 0.6])
        outs = []
        for _ in range(2):
            stack = sample_prior_stack(p.copy(), m, RngStream(3, 0))
            p2, stack2, met = step_observation(p.copy(), stack, m, obs, RngStream(4, 0))
            outs.append((p2, stack2, met))
        for l in range(p.L):
            np.testing.assert_array_equal(outs[0][0].theta[l], outs[1][0].theta[l])
        np.testing.assert_array_equal(outs[0][2].losses, outs[1][2].losses)
        assert outs[0][2].mse == outs[1][2].mse

    def test_frozen_mode_leaves_weights_untouched(self):
        p = make_params((3, 5, 4), seed=2)
        m = np.linspace(-0.5, 0.5, 4)
        stack = sample_prior_stack(p, m, RngStream(3, 0))
        before = params_digest(p)
        p2, stack2, _ = step_observation(
            p, stack, m, np.array([0.2, 0.4, 0.6]), RngStream(4, 0), learn=False
        )
        assert params_digest(p2) == before
        assert stack2.s is not None

    def test_divergence_reports_the_layer(self):
        p = HierarchyParams(
            n=(2, 2, 2),
            theta=[np.eye(2), np.eye(2)],
            lam=np.array([1.0, 1e9, 1.0]),
            dt=0.05, T=10.0, tau_theta=10.0,
        )
        m = np.zeros(2)
        stack = sample_prior_stack(p, m, RngStream(0, 0))
        with pytest.raises(DivergenceError) as err:
            step_observation(p, stack, m, np.array([0.5, 0.5]), RngStream(1, 0))
        assert err.value.layer is not None

    def test_multi_sample_averages_extra_prediction_stacks(self):
        # prior_samples=3 must equal learning on the tiled target against
        # the concatenated prediction samples, drawn from the same stream.
        p = make_params((3, 4), seed=1)
        m = np.linspace(0, 1, 4)
        stack = sample_prior_stack(p, m, RngStream(2, 0))
        obs = np.array([0.2, 0.4, 0.6])
        multi, _, _ = step_observation(
            p, stack, m, obs, RngStream(3, 0), prior_samples=3
        )
        replay = RngStream(3, 0)
        extras = [sample_prior_stack(p, m, replay) for _ in range(2)]
        wide_upper = np.stack([stack.s_hat[1]] + [e.s_hat[1] for e in extras])
        wide_target = np.tile(obs, (3, 1))
        expected = learn_layer(p.theta[0], wide_target, wide_upper, p.lam[0], p)
        np.testing.assert_array_equal(multi.theta[0], expected)
        single, _, _ = step_observation(p, stack, m, obs, RngStream(3, 0))
        assert not np.array_equal(multi.theta[0], single.theta[0])

    def test_co_integration_mode_runs_and_fitted_point_is_stable(self):
        p = HierarchyParams.init((2, 2), 0, lam=np.array([1.0, 1.0]), co_integrate=True)
        m = np.array([0.3, -0.2])
        stack = sample_prior_stack(p, m, RngStream(1, 0))
        obs = layer_mean(p.theta[0], stack.s_hat[1], p.slope)
        p2, _, met = step_observation(p, stack, m, obs, RngStream(2, 0))
        assert met.losses[0] == 0.0
        np.testing.assert_array_equal(p2.theta[0], p.theta[0])


class TestPredictMean:
    def test_zero_weights_decode_to_zero(self):
        p = make_params((3, 4, 5), seed=0)
        p.theta = [np.zeros_like(t) for t in p.theta]
        np.testing.assert_array_equal(predict_mean(p, np.ones(5)), np.zeros(3))

    def test_rectifier_on_negative_top(self):
        p = HierarchyParams(n=(1, 1), theta=[np.array([[2.0]])], lam=np.ones(2))
        np.testing.assert_allclose(predict_mean(p, np.array([-1.0])), [-0.02])

    def test_matches_large_precision_direct_samples(self):
        p = make_params((3, 6, 4), lam=1e8, seed=5)
        m = np.linspace(-1, 1, 4)
        stack = sample_prior_stack(p, m, RngStream(0, 0))
        np.testing.assert_allclose(stack.s_hat[0], predict_mean(p, m), atol=1e-3)

    def test_batched(self):
        p = make_params((3, 6, 4), seed=5)
        tops = np.random.default_rng(0).standard_normal((7, 4))
        out = predict_mean(p, tops)
        for b in range(7):
            np.testing.assert_allclose(out[b], predict_mean(p, tops[b]), rtol=1e-12, atol=1e-15)


class TestParamsValidation:
    def test_bad_shapes_rejected(self):
        with pytest.raises(ContractError):
            HierarchyParams(
                n=(3, 4), theta=[np.zeros((4, 3))], lam=np.array([1.0, 1.0])
            ).validate()

    def test_nonpositive_precision_rejected(self):
        with pytest.raises(ContractError):
            HierarchyParams(
                n=(3, 4), theta=[np.zeros((3, 4))], lam=np.array([1.0, 0.0])
            ).validate()

    def test_wrong_observation_width_rejected(self):
        p = make_params((3, 4), seed=0)
        stack = sample_prior_stack(p, np.zeros(4), RngStream(0, 0))
        with pytest.raises(ContractError):
            step_observation(p, stack, np.zeros(4), np.zeros(5), RngStream(0, 0))
