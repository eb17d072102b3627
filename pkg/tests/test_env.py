import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foilrl.env import (
    AirfoilEnv,
    EnvConfig,
    RESET_POOL_NAMES,
    StepReason,
    alpha_vector,
    denormalize_observation,
    load_reset_pool,
    normalize_observation,
    thickness_kernel,
)
from foilrl.errors import ContractViolation, InvalidParams, ResetError
from foilrl.geometry import default_bounds


def make_env(seed=0, **kw) -> AirfoilEnv:
    return AirfoilEnv(EnvConfig(rng_seed=seed, **kw))


class TestAlphaVector:
    def test_values_from_bounds_table(self):
        alpha = alpha_vector(EnvConfig())
        assert alpha[0] == pytest.approx(0.0275)
        assert alpha[8] == pytest.approx(0.0225)
        assert alpha[16] == pytest.approx(9.5e-5)
        assert alpha[17] == pytest.approx(0.825 / 100)

    def test_halves_when_length_doubles(self):
        a100 = alpha_vector(EnvConfig(episode_max_length=100))
        a200 = alpha_vector(EnvConfig(episode_max_length=200))
        np.testing.assert_allclose(a200, a100 / 2.0, rtol=1e-15)


class TestThicknessKernel:
    def test_identity_at_reference(self):
        for sigma in (0.0, 1.0, 15.0, 1000.0):
            assert thickness_kernel(0.12, 0.12, sigma) == 1.0

    def test_direct_evaluation(self):
        assert thickness_kernel(0.9, 1.0, 15.0) == pytest.approx(np.exp(-0.15))

    def test_sigma_zero_is_always_one(self):
        for mt in (0.01, 0.12, 0.5):
            assert thickness_kernel(mt, 0.12, 0.0) == 1.0

    def test_rejects_nonpositive_reference(self):
        with pytest.raises(InvalidParams):
            thickness_kernel(0.1, 0.0, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(0.01, 0.5),
        st.floats(0.01, 0.5),
        st.floats(0.001, 1000.0),
    )
    def test_bounded_and_peaked_at_reference(self, mt, mt0, sigma):
        lam = thickness_kernel(mt, mt0, sigma)
        # mathematically (0, 1]; extreme ratios may underflow to 0.0
        assert 0.0 <= lam <= 1.0

    def test_strictly_decreasing_in_deviation(self):
        devs = [0.0, 0.05, 0.1, 0.2, 0.4]
        lams = [thickness_kernel(1.0 + d, 1.0, 15.0) for d in devs]
        assert np.all(np.diff(lams) < 0)


class TestReset:
    def test_singleton_pool_is_deterministic(self):
        env = make_env(seed=1, reset_pool=("naca0012",))
        obs1 = env.reset()
        obs2 = env.reset()
        np.testing.assert_array_equal(obs1, obs2)
        np.testing.assert_allclose(
            denormalize_observation(obs1, env.config.bounds), env.pool["naca0012"]
        )

    def test_empty_pool_raises(self):
        with pytest.raises(ResetError):
            make_env(reset_pool=()).reset()

    def test_initial_term_and_mt_frozen(self):
        env = make_env(seed=2)
        env.reset()
        assert env.state.mt0 > 0
        assert env.state.prev_term == env.state.episode_return
        assert env.state.step_index == 0

    def test_pool_sampling_uniform(self):
        env = make_env(seed=3)
        names = sorted(env.pool)
        ref = {n: env.pool[n][0] for n in names}
        counts = dict.fromkeys(names, 0)
        n_draws = 4000
        rng = env.rng
        for _ in range(n_draws):
            # Draw through the same path reset() uses.
            counts[names[rng.integers(len(names))]] += 1
        p = 1.0 / len(names)
        sd = np.sqrt(n_draws * p * (1 - p))
        for name in names:
            assert abs(counts[name] - n_draws * p) < 4.0 * sd, name
        chi2 = sum((c - n_draws * p) ** 2 / (n_draws * p) for c in counts.values())
        # 19 dof; 99.9th percentile is about 43.8
        assert chi2 < 43.8


class TestStep:
    def test_zero_action_zero_reward(self):
        env = make_env(seed=4)
        env.reset()
        outcome = env.step(np.zeros(18))
        assert outcome.reward == 0.0
        assert not outcome.terminated
        assert outcome.reason is StepReason.RUNNING

    def test_action_clamped_at_bounds(self):
        env = make_env(seed=5)
        env.reset()
        env.state.params[0] = env.config.bounds.upper[0]
        before = env.state.params[0]
        action = np.zeros(18)
        action[0] = 1.0
        env.step(action)
        assert env.state.params[0] == before

    def test_oversized_actions_are_clamped(self):
        env = make_env(seed=6)
        obs0 = env.reset()
        start = env.state.params.copy()
        action = np.full(18, 5.0)
        env.step(action)
        moved = env.state.params - start
        np.testing.assert_allclose(
            moved[np.abs(moved) > 0], alpha_vector(env.config)[np.abs(moved) > 0], rtol=1e-12
        )

    def test_state_stays_in_bounds(self):
        env = make_env(seed=7)
        env.reset()
        rng = np.random.default_rng(0)
        for _ in range(50):
            outcome = env.step(rng.uniform(-1, 1, 18))
            assert env.config.bounds.contains(env.state.params)
            if outcome.terminated:
                env.reset()

    def test_sigma_zero_reward_is_pure_ratio_difference(self):
        env = make_env(seed=8, sigma=0.0, fidelity="high")
        env.reset()
        prev = env.state.prev_term
        outcome = env.step(np.full(18, 0.05))
        # high fidelity: kappa = 1 and sigma = 0 make the reward a plain
        # cl/cd difference
        assert outcome.reward == pytest.approx(outcome.info["ratio"] - prev, abs=1e-12)
        assert outcome.info["lambda"] == 1.0
        assert outcome.info["kappa"] == 1.0

    def test_step_after_termination_is_contract_violation(self):
        env = make_env(seed=9, episode_max_length=1)
        env.reset()
        outcome = env.step(np.zeros(18))
        assert outcome.terminated
        assert outcome.reason is StepReason.MAX_STEPS
        with pytest.raises(ContractViolation):
            env.step(np.zeros(18))

    def test_episode_length_bounded(self):
        env = make_env(seed=10, episode_max_length=15)
        env.reset()
        rng = np.random.default_rng(1)
        steps = 0
        while True:
            outcome = env.step(rng.uniform(-0.1, 0.1, 18))
            steps += 1
            if outcome.terminated:
                break
        assert steps <= 15
        if outcome.reason is StepReason.MAX_STEPS:
            assert steps == 15

    def test_failure_zeroes_episode_return(self):
        # striding hard towards crossing surfaces forces invalid geometry
        env = make_env(seed=11)
        env.reset()
        action = np.zeros(18)
        action[:8] = -1.0
        action[8:16] = 1.0
        while True:
            outcome = env.step(action)
            if outcome.terminated:
                break
        assert outcome.reason in (StepReason.INVALID_GEOMETRY, StepReason.SOLVER_FAILURE)
        assert outcome.info["episode_return"] == pytest.approx(0.0, abs=1e-9)


class TestTelescoping:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_episode_return_equals_final_term(self, seed):
        rng = np.random.default_rng(seed)
        env = make_env(seed=seed % 7, sigma=float(rng.uniform(0, 30)))
        env.reset()
        total = env.state.episode_return  # includes the initial term
        while True:
            outcome = env.step(rng.uniform(-1, 1, 18))
            total += outcome.reward
            if outcome.terminated:
                break
        if outcome.reason is StepReason.MAX_STEPS:
            final_term = (
                outcome.info["lambda"] * outcome.info["kappa"] * outcome.info["ratio"]
            )
            assert total == pytest.approx(final_term, abs=1e-9)
        else:
            assert total == pytest.approx(0.0, abs=1e-9)
        assert total == pytest.approx(env.state.episode_return, abs=1e-9)


class TestObservations:
    def test_normalization_roundtrip(self):
        bounds = default_bounds()
        rng = np.random.default_rng(2)
        vec = bounds.lower + rng.random(18) * bounds.span
        obs = normalize_observation(vec, bounds)
        assert np.all(obs >= -1.0) and np.all(obs <= 1.0)
        np.testing.assert_allclose(denormalize_observation(obs, bounds), vec, rtol=1e-12)


class TestFitCache:
    def test_cache_roundtrip(self, tmp_path):
        cache = tmp_path / "pool.json"
        fits1 = load_reset_pool(("naca0012", "naca2412"), cache_path=cache)
        assert cache.exists()
        fits2 = load_reset_pool(("naca0012", "naca2412"), cache_path=cache)
        for name in fits1:
            np.testing.assert_array_equal(fits1[name], fits2[name])

    def test_pool_names_are_the_20_reset_airfoils(self):
        assert len(RESET_POOL_NAMES) == 20
        assert RESET_POOL_NAMES[0] == "naca0006"
        assert "naca9421" in RESET_POOL_NAMES
