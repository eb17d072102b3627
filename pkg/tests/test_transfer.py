import numpy as np
import pytest

from foilrl.aero import high_fidelity_config
from foilrl.env import EnvConfig
from foilrl.errors import InvalidParams

FAST_HIGH = high_fidelity_config(panel_count=96)
from foilrl.nets import AdamState, AgentCheckpoint, adam_step, forward, mlp_init, policy_init
from foilrl.ppo import preset
from foilrl.transfer import (
    CostLedger,
    TlStrategy,
    apply_strategy,
    finetune,
    time_reduction,
)


def source_checkpoint(seed=0) -> AgentCheckpoint:
    rng = np.random.default_rng(seed)
    actor = policy_init([18, 32, 32, 18], rng)
    # make the source distinctive so copies are detectable
    for w in actor.net.weights:
        w += rng.standard_normal(w.shape) * 0.1
    actor.log_std[:] = -0.37
    critic = mlp_init([18, 32, 32, 1], rng)
    return AgentCheckpoint(
        actor, critic, None, 4096, "feedc0de", 0.0, "low",
        meta={"solver_calls": 4100, "nominal_cost_ms_per_call": 4.0},
    )


class TestApplyStrategy:
    def test_share_all_is_identity_transfer(self):
        src = source_checkpoint()
        actor, critic, mask = apply_strategy(src, TlStrategy.SHARE_ALL, np.random.default_rng(1))
        x = np.random.default_rng(2).standard_normal((5, 18))
        np.testing.assert_array_equal(forward(actor.net, x), forward(src.actor.net, x))
        np.testing.assert_array_equal(forward(critic, x), forward(src.critic, x))
        np.testing.assert_array_equal(actor.log_std, src.actor.log_std)
        assert not any(mask.actor) and not any(mask.critic)

    def test_share_all_but_last_reinitializes_head(self):
        src = source_checkpoint()
        actor, critic, mask = apply_strategy(
            src, TlStrategy.SHARE_ALL_BUT_LAST, np.random.default_rng(3)
        )
        for k in range(src.actor.net.n_layers - 1):
            np.testing.assert_array_equal(actor.net.weights[k], src.actor.net.weights[k])
        assert not np.array_equal(actor.net.weights[-1], src.actor.net.weights[-1])
        assert not np.array_equal(critic.weights[-1], src.critic.weights[-1])
        assert np.all(actor.log_std == 0.0)  # fresh head includes the log-std vector
        assert not any(mask.actor) and not any(mask.critic)

    def test_freeze_all_but_last_mask(self):
        src = source_checkpoint()
        actor, critic, mask = apply_strategy(
            src, TlStrategy.FREEZE_ALL_BUT_LAST, np.random.default_rng(4)
        )
        assert mask.actor == (True, True, False)
        assert mask.critic == (True, True, False)
        np.testing.assert_array_equal(actor.net.weights[-1], src.actor.net.weights[-1])

    def test_strategy_4_reinit_and_freeze_shared(self):
        src = source_checkpoint()
        actor, critic, mask = apply_strategy(
            src, TlStrategy.SHARE_ALL_BUT_LAST_AND_FREEZE, np.random.default_rng(5)
        )
        assert mask.actor == (True, True, False)
        for k in range(src.actor.net.n_layers - 1):
            np.testing.assert_array_equal(actor.net.weights[k], src.actor.net.weights[k])
        assert not np.array_equal(actor.net.weights[-1], src.actor.net.weights[-1])

    def test_frozen_layers_bit_stable_after_1000_steps(self):
        src = source_checkpoint()
        actor, critic, mask = apply_strategy(
            src, TlStrategy.FREEZE_ALL_BUT_LAST, np.random.default_rng(6)
        )
        tensors = actor.tensors() + critic.tensors()
        flags = mask.tensor_flags(actor, critic)
        state = AdamState.for_tensors(tensors)
        rng = np.random.default_rng(7)
        for _ in range(1000):
            grads = [rng.standard_normal(t.shape) for t in tensors]
            adam_step(tensors, grads, state, 1e-3, flags)
        for k in range(src.actor.net.n_layers - 1):
            np.testing.assert_array_equal(actor.net.weights[k], src.actor.net.weights[k])
            np.testing.assert_array_equal(critic.weights[k], src.critic.weights[k])
        assert not np.array_equal(actor.net.weights[-1], src.actor.net.weights[-1])


class TestTimeReduction:
    def test_reported_pipeline_figures(self):
        # step budgets priced at the two per-call constants
        ledger = CostLedger(26312, 4.0, 10240, 73.0)
        assert ledger.pretrain_cost_s == pytest.approx(105.248)
        assert ledger.finetune_cost_s == pytest.approx(747.52)
        tl_free = 81920 * 73.0 / 1000.0
        assert time_reduction(tl_free, ledger.total_cost_s) == pytest.approx(85.74, abs=0.1)

    def test_equal_costs_zero(self):
        assert time_reduction(100.0, 100.0) == 0.0

    def test_free_pipeline_is_full_reduction(self):
        assert time_reduction(100.0, 0.0) == 100.0

    def test_nonpositive_baseline_rejected(self):
        with pytest.raises(InvalidParams):
            time_reduction(0.0, 10.0)


class TestFinetune:
    def test_requires_high_fidelity_environment(self):
        with pytest.raises(InvalidParams):
            finetune(
                source_checkpoint(),
                TlStrategy.SHARE_ALL,
                EnvConfig(fidelity="low"),
                preset("finetune", total_timesteps=512),
                seed=0,
            )

    def test_zero_steps_returns_source_weights(self):
        src = source_checkpoint()
        result = finetune(
            src,
            TlStrategy.SHARE_ALL,
            EnvConfig(fidelity="high", solver_config=FAST_HIGH),
            preset("finetune", total_timesteps=0),
            seed=0,
        )
        x = np.random.default_rng(0).standard_normal((4, 18))
        np.testing.assert_array_equal(
            forward(result.result.checkpoint.actor.net, x), forward(src.actor.net, x)
        )
        assert result.ledger.pretrain_calls == 4100
        assert result.ledger.finetune_calls == 0

    def test_ledger_additive_and_reproducible(self):
        src = source_checkpoint()
        cfgs = dict(
            env_config=EnvConfig(fidelity="high", rng_seed=0, solver_config=FAST_HIGH),
            ppo_config=preset("finetune", total_timesteps=512, n_epochs=2),
            seed=5,
        )
        a = finetune(src, TlStrategy.SHARE_ALL, **cfgs)
        b = finetune(src, TlStrategy.SHARE_ALL, **cfgs)
        assert a.ledger.total_cost_s == b.ledger.total_cost_s
        assert a.ledger.total_cost_s == pytest.approx(
            a.ledger.pretrain_cost_s + a.ledger.finetune_cost_s
        )
