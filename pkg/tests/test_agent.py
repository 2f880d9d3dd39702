import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarmsec import nn
from swarmsec.agent import (
    Agent, AgentConfig, ReplayBuffer, bellman_target, critic_loss_and_grads, train,
)
from swarmsec.bandit import ContextualBandit
from swarmsec.diffusion import ChainNoise
from swarmsec.errors import CheckpointError, ConfigError, TrainingError


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1e-12, np.max(np.abs(a)), np.max(np.abs(b))))


def fd_params(f, params, h=1e-5):
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            fp = f()
            p[idx] = old - h
            fm = f()
            p[idx] = old
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def small_cfg(**kw):
    base = dict(hidden=8, emb_dim=4, batch_size=4, warmup=4, buffer_capacity=64, denoise_steps=2)
    base.update(kw)
    return AgentConfig(**base)


def small_agent(seed=0, obs_dim=3, act_dim=2, **kw):
    return Agent(obs_dim, act_dim, small_cfg(**kw), np.random.default_rng(seed))


def random_batch(rng, n=4, obs_dim=3, act_dim=2):
    return {"obs": rng.normal(size=(n, obs_dim)), "act": rng.uniform(-1, 1, (n, act_dim)),
            "rew": rng.normal(size=n), "next_obs": rng.normal(size=(n, obs_dim)),
            "done": (rng.random(n) < 0.3).astype(float)}


class TestConfig:
    def test_defaults(self):
        c = AgentConfig()
        assert (c.gamma, c.tau, c.policy_delay, c.denoise_steps) == (0.9, 0.005, 2, 4)
        assert (c.batch_size, c.buffer_capacity, c.episodes) == (128, 2_000_000, 8000)

    def test_aliases(self):
        c = AgentConfig.from_dict({"T": 8, "d": 3, "B": 32, "warmup": 64})
        assert (c.denoise_steps, c.policy_delay, c.batch_size) == (8, 3, 32)
        assert AgentConfig.from_dict(c.to_dict()) == c

    @pytest.mark.parametrize("bad", [{"gamma": 1.5}, {"tau": -0.1}, {"d": 0}, {"schedule": "sigmoid"},
                                     {"actor": "sac"}, {"warmup": 10}, {"emb_dim": 5}, {"bogus": 1},
                                     {"T": 4, "denoise_steps": 4}, {"lr_actor": 0.0}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            AgentConfig.from_dict(bad)


class TestReplayBuffer:
    capacity = 10_000

    def fill(self, buf, n, start=0):
        for i in range(start, start + n):
            buf.add(np.full(3, i), np.full(2, i), float(i), np.full(3, i + 1), i % 7 == 0)

    def test_lazy_growth(self):
        buf = ReplayBuffer(3, 2, self.capacity)
        assert len(buf.rew) == 1024
        self.fill(buf, 3000)
        assert len(buf) == 3000 and len(buf.rew) == 4096
        self.fill(buf, 9000, 3000)
        assert len(buf.rew) == self.capacity

    def test_ring_overwrite(self):
        buf = ReplayBuffer(3, 2, self.capacity)
        self.fill(buf, self.capacity + 250)
        assert len(buf) == self.capacity
        # the oldest 250 entries were replaced in place
        assert buf.rew[0] == self.capacity and buf.rew[249] == self.capacity + 249
        assert buf.rew[250] == 250
        assert set(buf.rew.astype(int)) == set(range(250, self.capacity + 250))

    def test_sample_contract(self):
        buf = ReplayBuffer(3, 2, self.capacity)
        self.fill(buf, 127)
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            buf.sample(rng, 128)
        self.fill(buf, 1, 127)
        b = buf.sample(rng, 128)
        assert b["obs"].shape == (128, 3) and b["act"].shape == (128, 2) and b["rew"].shape == (128,)
        # every sampled row is a stored transition, fields kept together
        np.testing.assert_array_equal(b["obs"][:, 0], b["rew"])
        np.testing.assert_array_equal(b["next_obs"][:, 0], b["rew"] + 1)
        np.testing.assert_array_equal(b["done"], (b["rew"] % 7 == 0).astype(float))

    def test_invalid_capacity(self):
        with pytest.raises(ValueError):
            ReplayBuffer(3, 2, 0)


class TestTarget:
    def test_examples(self):
        assert bellman_target(np.array([1.0]), np.array([0.0]), np.array([2.0]), np.array([3.0]), 0.9)[0] == \
            pytest.approx(2.8)
        assert bellman_target(np.array([1.5]), np.array([1.0]), np.array([2.0]), np.array([3.0]), 0.9)[0] == 1.5
        q = np.array([0.4, -2.0])
        np.testing.assert_array_equal(bellman_target(np.ones(2), np.zeros(2), q, q, 0.9), 1 + 0.9 * q)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_sandwich(self, seed):
        agent = small_agent(seed)
        rng = np.random.default_rng(seed)
        batch = random_batch(rng, 16)
        y = agent.target_q(batch, np.random.default_rng(seed + 1))
        # replay the same smoothed next actions to get both target critics
        r2 = np.random.default_rng(seed + 1)
        noise = agent.actor.draw_noise(r2, 16)
        a, _ = agent.actor.sample(agent.actor_target, batch["next_obs"], noise)
        eps = np.clip(0.2 * r2.standard_normal(a.shape), -0.5, 0.5)
        a = np.clip(a + eps, -1, 1)
        q1 = agent.q(0, batch["next_obs"], a, target=True)
        q2 = agent.q(1, batch["next_obs"], a, target=True)
        live = 0.9 * (1 - batch["done"])
        assert np.all(y <= batch["rew"] + live * np.maximum(q1, q2) + 1e-12)
        assert np.all(y >= batch["rew"] + live * np.minimum(q1, q2) - 1e-12)


class TestCriticUpdate:
    def test_zero_loss_is_fixed_point(self):
        agent = small_agent()
        batch = random_batch(np.random.default_rng(1))
        y = agent.q(0, batch["obs"], batch["act"])
        before = nn.copy_params(agent.critic_params[0])
        agent.critic_params[1] = nn.copy_params(agent.critic_params[0])
        agent.critic_opts[1] = nn.Adam(agent.critic_params[1])
        losses = agent.critic_update(batch, y)
        assert losses == (0.0, 0.0)
        for a, b in zip(agent.critic_params[0], before):
            np.testing.assert_array_equal(a, b)

    def test_gradient_finite_differences(self):
        agent = small_agent(2, actor="mlp")
        rng = np.random.default_rng(3)
        batch = random_batch(rng)
        x = np.concatenate([batch["obs"], batch["act"]], axis=1)
        y = rng.normal(size=4)
        params = agent.critic_params[0]
        _, grads = critic_loss_and_grads(agent.critic, params, x, y)
        fd = fd_params(lambda: critic_loss_and_grads(agent.critic, params, x, y)[0], params)
        for g, f in zip(grads, fd):
            assert rel_err(g, f) < 1e-4

    def test_twins_are_independent(self):
        agent = small_agent()
        agent.critic_params[1] = nn.copy_params(agent.critic_params[0])
        agent.critic_opts[1] = nn.Adam(agent.critic_params[1], lr=agent.cfg.lr_critic)
        batch = random_batch(np.random.default_rng(4))
        agent.critic_update(batch, np.ones(4))
        for a, b in zip(agent.critic_params[0], agent.critic_params[1]):
            np.testing.assert_array_equal(a, b)
        # a second critic trained toward a different target drifts apart
        x = np.concatenate([batch["obs"], batch["act"]], axis=1)
        _, g0 = critic_loss_and_grads(agent.critic, agent.critic_params[0], x, np.ones(4))
        _, g1 = critic_loss_and_grads(agent.critic, agent.critic_params[1], x, -np.ones(4))
        agent.critic_opts[0].step(agent.critic_params[0], g0)
        agent.critic_opts[1].step(agent.critic_params[1], g1)
        assert any(not np.array_equal(a, b) for a, b in zip(agent.critic_params[0], agent.critic_params[1]))

    def test_non_finite_loss(self):
        agent = small_agent()
        batch = random_batch(np.random.default_rng(5))
        with pytest.raises(TrainingError):
            agent.critic_update(batch, np.array([np.nan, 0, 0, 0]))


class TestActorUpdate:
    def test_constant_critic_gives_zero_gradient(self):
        agent = small_agent()
        for p in agent.critic_params[0]:
            p[...] = 0.0
        agent.critic_params[0][-1][...] = 3.0
        obs = np.random.default_rng(6).normal(size=(5, 3))
        loss, grads = agent.actor_loss_and_grads(obs, agent.actor.draw_noise(np.random.default_rng(7), 5))
        assert loss == pytest.approx(-3.0)
        assert all(np.all(g == 0) for g in grads)

    @pytest.mark.parametrize("actor", ["diffusion", "mlp"])
    def test_end_to_end_finite_differences(self, actor):
        agent = small_agent(8, actor=actor, denoise_steps=2, final_scale=1.0)
        rng = np.random.default_rng(9)
        obs = rng.normal(size=(5, 3))
        noise = agent.actor.draw_noise(rng, 5)
        if isinstance(noise, ChainNoise):
            noise.x_T *= 0.3  # keep the chain inside the box so the clip mask is fixed
        _, grads = agent.actor_loss_and_grads(obs, noise)
        fd = fd_params(lambda: agent.actor_loss_and_grads(obs, noise)[0], agent.actor_params)
        for g, f in zip(grads, fd):
            assert rel_err(g, f) < 1e-3

    def test_update_changes_only_actor(self):
        agent = small_agent()
        critic_before = [nn.copy_params(p) for p in agent.critic_params]
        actor_before = nn.copy_params(agent.actor_params)
        agent.actor_update(random_batch(np.random.default_rng(10)), np.random.default_rng(11))
        assert agent.actor_updates == 1
        assert any(not np.array_equal(a, b) for a, b in zip(agent.actor_params, actor_before))
        for now, then in zip(agent.critic_params, critic_before):
            for a, b in zip(now, then):
                np.testing.assert_array_equal(a, b)


class TestTrain:
    @pytest.mark.parametrize("n,warmup,d", [(20, 4, 2), (21, 4, 2), (30, 8, 3), (8, 8, 2)])
    def test_counters(self, n, warmup, d):
        cfg = small_cfg(warmup=warmup, policy_delay=d, actor="mlp")
        _, log = train(ContextualBandit(), cfg, seed=0, episodes=n)
        assert log.critic_updates == n - warmup
        assert log.actor_updates == (n - warmup) // d

    def test_delayed_updates(self):
        cfg = small_cfg(policy_delay=2)
        seen = {}

        def hook(agent, step):
            snap = (nn.copy_params(agent.actor_params), [nn.copy_params(t) for t in agent.critic_targets],
                    nn.copy_params(agent.actor_target))
            if "prev" in seen:
                prev = seen["prev"]
                actor_moved = any(not np.array_equal(a, b) for a, b in zip(snap[0], prev[0]))
                target_moved = any(not np.array_equal(a, b) for a, b in zip(snap[2], prev[2])) or any(
                    not np.array_equal(a, b) for t, u in zip(snap[1], prev[1]) for a, b in zip(t, u))
                due = step > cfg.warmup and agent.critic_updates % cfg.policy_delay == 0
                assert actor_moved == due
                assert target_moved == due
                for k in range(2):
                    for old, new, o in zip(prev[1][k], snap[1][k], agent.critic_params[k]):
                        lo, hi = np.minimum(old, o), np.maximum(old, o)
                        assert np.all(new >= lo - 1e-15) and np.all(new <= hi + 1e-15)
            seen["prev"] = snap

        train(ContextualBandit(), cfg, seed=1, episodes=16, step_hook=hook)

    def test_determinism(self):
        cfg = small_cfg()
        a1, l1 = train(ContextualBandit(), cfg, seed=5, episodes=20)
        a2, l2 = train(ContextualBandit(), cfg, seed=5, episodes=20)
        assert l1.steps == l2.steps
        for p, q in zip(a1.actor_params, a2.actor_params):
            assert p.tobytes() == q.tobytes()
        _, l3 = train(ContextualBandit(), cfg, seed=6, episodes=20)
        assert l3.steps != l1.steps

    def test_log_shape(self):
        _, log = train(ContextualBandit(), small_cfg(), seed=0, episodes=10)
        assert len(log.episodes) == 10 and len(log.steps) == 10
        assert log.wall_ms == [0.0] * 10
        np.testing.assert_allclose(log.episode_returns(), [s[2] for s in log.steps])
        _, timed = train(ContextualBandit(), small_cfg(), seed=0, episodes=3, timing=True)
        assert all(w > 0 for w in timed.wall_ms)


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        agent, _ = train(ContextualBandit(), small_cfg(), seed=0, episodes=12)
        path = tmp_path / "agent.npz"
        agent.save(path, {"config_hash": "abc"})
        back, meta = Agent.load(path)
        assert meta["config_hash"] == "abc"
        assert back.cfg == agent.cfg
        assert (back.critic_updates, back.actor_updates) == (agent.critic_updates, agent.actor_updates)
        obs = np.random.default_rng(0).normal(size=(6, 4))
        np.testing.assert_array_equal(back.act(obs), agent.act(obs))
        for g in Agent._GROUPS:
            for a, b in zip(back._group(g), agent._group(g)):
                np.testing.assert_array_equal(a, b)
        assert back.actor_opt.t == agent.actor_opt.t

    def test_corrupted(self, tmp_path):
        agent = small_agent()
        path = tmp_path / "agent.npz"
        agent.save(path, {})
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError):
            Agent.load(path)

    def test_wrong_network(self, tmp_path):
        agent = small_agent()
        arrays = agent.state_arrays()
        arrays["actor/0"] = np.zeros((2, 2))
        path = tmp_path / "agent.npz"
        nn.save_arrays(path, arrays, {"agent": agent.cfg.to_dict(), "obs_dim": 3, "act_dim": 2})
        with pytest.raises(CheckpointError):
            Agent.load(path)
