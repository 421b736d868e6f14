import hashlib

import numpy as np
import pytest

from pyrofront.dqn import (
    DQNTrainer,
    ReplayBuffer,
    load_checkpoint,
    save_checkpoint,
    select_action,
    td_train_step,
)
from pyrofront.nn import (
    Dense,
    TwoBranchQNet,
    encode_uav_vec,
    gradient_check,
    q_forward,
)
from pyrofront.seeding import rng_stream


def net_params_digest(net) -> str:
    h = hashlib.sha256()
    for p in net.parameters():
        h.update(p.tobytes())
    return h.hexdigest()


class TestForward:
    def test_output_length_nine(self):
        net = TwoBranchQNet(16, rng_stream(0, 4), reduced=True)
        q = q_forward(net, np.zeros((16, 16)), (8, 8, 100.0, None))
        assert q.shape == (9,)
        assert np.all(np.isfinite(q))

    def test_zero_weights_output_equals_bias(self):
        net = TwoBranchQNet(8, rng_stream(1, 4), reduced=True)
        for p in net.parameters():
            p[...] = 0.0
        bias = net.head.layers[-1].b
        bias[...] = np.arange(9, dtype=float)
        q = q_forward(net, np.ones((8, 8)), (1, 2, 50.0, 0.0))
        assert np.allclose(q, np.arange(9))

    def test_full_width_reaches_8x8x256_block(self):
        net = TwoBranchQNet(16, rng_stream(2, 4), reduced=False)
        conv_out = net.map_branch.layers[0].forward(np.zeros((1, 1, 16, 16)))
        conv_out = net.map_branch.layers[1].forward(conv_out)
        conv_out = net.map_branch.layers[2].forward(conv_out)
        assert conv_out.shape == (1, 256, 8, 8)
        assert net.feature_hw == 8

    def test_branch_latents_same_width(self):
        net = TwoBranchQNet(16, rng_stream(3, 4), reduced=True)
        assert net.map_branch.layers[-1].w.shape[1] == 16
        assert net.state_branch.layers[-1].w.shape[1] == 16

    def test_heading_encoding(self):
        v = encode_uav_vec(15, 0, 50.0, None, 16)
        assert v == pytest.approx([1.0, 0.0, 0.5, 0.0, 0.0])
        v2 = encode_uav_vec(0, 15, 100.0, np.pi / 2, 16)
        assert v2 == pytest.approx([0.0, 1.0, 1.0, 0.0, 1.0], abs=1e-12)


class TestGradients:
    def test_linear_single_layer_near_machine_precision(self):
        # quadratic loss through a linear layer: central differences are exact
        rng = rng_stream(5, 4)
        layer = Dense(6, 3, rng)
        x = rng.normal(size=(4, 6))
        target = rng.normal(size=(4, 3))

        def loss():
            return float(np.mean((layer.forward(x) - target) ** 2))

        base = layer.forward(x)
        dy = 2.0 * (base - target) / base.size
        layer.zero_grad()
        layer.backward(dy)
        h = 1e-4
        worst = 0.0
        for p, g in zip(layer.weights, layer.grads):
            for idx in range(p.size):
                orig = p.flat[idx]
                p.flat[idx] = orig + h
                lp = loss()
                p.flat[idx] = orig - h
                lm = loss()
                p.flat[idx] = orig
                num = (lp - lm) / (2 * h)
                worst = max(worst, abs(num - g.flat[idx]) /
                            max(abs(num), abs(g.flat[idx]), 1e-6))
        assert worst < 1e-7

    def test_two_branch_reduced_under_1e4(self):
        net = TwoBranchQNet(16, rng_stream(6, 4), reduced=True)
        err = gradient_check(net, rng_stream(6, 5), n_samples=250)
        assert err < 1e-4

    def test_small_grid_and_full_width_under_1e4(self):
        net = TwoBranchQNet(8, rng_stream(7, 4), reduced=False)
        err = gradient_check(net, rng_stream(7, 5), n_samples=120)
        assert err < 1e-4


class TestSelectAction:
    def test_eps_one_uniform_over_valid(self):
        net = TwoBranchQNet(8, rng_stream(8, 4), reduced=True)
        rng = rng_stream(8, 5)
        valid = [0, 3, 8]
        seen = set()
        for _ in range(300):
            a = select_action(net, np.zeros((8, 8)), (4, 4, 50.0, None),
                              valid, eps=1.0, rng=rng)
            assert a in valid
            seen.add(a)
        assert seen == set(valid)

    def test_eps_zero_single_valid(self):
        net = TwoBranchQNet(8, rng_stream(9, 4), reduced=True)
        a = select_action(net, np.zeros((8, 8)), (4, 4, 50.0, None),
                          [5], eps=0.0, rng=rng_stream(9, 5))
        assert a == 5

    def test_masked_argmax_ignores_global_best(self):
        net = TwoBranchQNet(8, rng_stream(10, 4), reduced=True)
        q = q_forward(net, np.ones((8, 8)), (4, 4, 50.0, None))
        best_global = int(np.argmax(q))
        valid = [a for a in range(9) if a != best_global]
        choice = select_action(net, np.ones((8, 8)), (4, 4, 50.0, None),
                               valid, eps=0.0, rng=rng_stream(10, 5))
        assert choice != best_global
        restricted = [q[a] for a in valid]
        assert q[choice] == pytest.approx(max(restricted))

    def test_constant_shift_invariance(self):
        net = TwoBranchQNet(8, rng_stream(11, 4), reduced=True)
        valid = [1, 4, 6, 8]
        pick = lambda: select_action(net, np.ones((8, 8)), (4, 4, 50.0, None),
                                     valid, eps=0.0, rng=rng_stream(11, 5))
        before = pick()
        net.head.layers[-1].b += 123.456  # shifts all 9 outputs equally
        assert pick() == before

    def test_tie_breaks_to_lowest_index(self):
        net = TwoBranchQNet(8, rng_stream(12, 4), reduced=True)
        for p in net.parameters():
            p[...] = 0.0  # all outputs 0 -> total tie
        a = select_action(net, np.zeros((8, 8)), (4, 4, 50.0, None),
                          [3, 5, 7], eps=0.0, rng=rng_stream(12, 5))
        assert a == 3


class TestReplay:
    def test_capacity_ring(self):
        buf = ReplayBuffer(capacity=5)
        for i in range(12):
            buf.push(np.full((2, 2), i), np.zeros(5), i % 9, float(i),
                     np.zeros((2, 2)), np.zeros(5), False)
        assert len(buf) == 5
        stored_rewards = {item[3] for item in buf._data}
        assert stored_rewards == {7.0, 8.0, 9.0, 10.0, 11.0}

    def test_sample_only_stored_and_hits_everything(self):
        buf = ReplayBuffer(capacity=8)
        for i in range(8):
            buf.push(np.zeros((2, 2)), np.zeros(5), 0, float(i),
                     np.zeros((2, 2)), np.zeros(5), False)
        rng = rng_stream(13, 5)
        seen = set()
        for _ in range(100):
            batch = buf.sample(4, rng)
            for r in batch["rewards"]:
                assert 0 <= r < 8
                seen.add(float(r))
        assert seen == {float(i) for i in range(8)}

    def test_sample_needs_enough(self):
        buf = ReplayBuffer(capacity=8)
        buf.push(np.zeros((2, 2)), np.zeros(5), 0, 0.0,
                 np.zeros((2, 2)), np.zeros(5), False)
        with pytest.raises(ValueError):
            buf.sample(4, rng_stream(14, 5))


def make_batch(net_n, rng, bsz=6, terminal=False, reward=0.0):
    return {
        "maps": rng.normal(size=(bsz, net_n, net_n)),
        "vecs": rng.normal(size=(bsz, 5)),
        "actions": rng.integers(0, 9, size=bsz),
        "rewards": np.full(bsz, reward),
        "next_maps": rng.normal(size=(bsz, net_n, net_n)),
        "next_vecs": rng.normal(size=(bsz, 5)),
        "dones": np.full(bsz, 1.0 if terminal else 0.0),
    }


class TestTdTraining:
    def test_terminal_targets_are_rewards(self):
        # gamma = 0 and terminal batch: loss is exactly mean (Q - r)^2
        net = TwoBranchQNet(8, rng_stream(15, 4), reduced=True)
        target = net.clone()
        rng = rng_stream(15, 5)
        batch = make_batch(8, rng, terminal=True, reward=2.5)
        q = net.forward(batch["maps"], batch["vecs"])
        sel = q[np.arange(6), batch["actions"]]
        expected_loss = float(np.mean((sel - 2.5) ** 2))
        loss = td_train_step(net, target, batch, gamma=0.0, lr=0.0)
        assert loss == pytest.approx(expected_loss, rel=1e-12)

    def test_loss_decreases_on_frozen_batch(self):
        # zero rewards, gamma 0: plain least squares toward zero
        net = TwoBranchQNet(8, rng_stream(16, 4), reduced=True)
        target = net.clone()
        batch = make_batch(8, rng_stream(16, 5), terminal=True, reward=0.0)
        losses = [td_train_step(net, target, batch, gamma=0.0, lr=1e-3)
                  for _ in range(30)]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
        assert losses[-1] < losses[0]

    def test_zero_learning_rate_freezes_params(self):
        net = TwoBranchQNet(8, rng_stream(17, 4), reduced=True)
        target = net.clone()
        digest = net_params_digest(net)
        batch = make_batch(8, rng_stream(17, 5))
        l1 = td_train_step(net, target, batch, gamma=0.9, lr=0.0)
        l2 = td_train_step(net, target, batch, gamma=0.9, lr=0.0)
        assert net_params_digest(net) == digest
        assert l1 == pytest.approx(l2)

    def test_trainer_target_sync_and_reproducibility(self):
        def run():
            net = TwoBranchQNet(8, rng_stream(18, 4), reduced=True)
            trainer = DQNTrainer(net, gamma=0.9, lr=1e-3, batch_size=4,
                                 target_sync_period=5, buffer_capacity=50,
                                 rng=rng_stream(18, 5))
            rng = rng_stream(18, 6)
            for i in range(40):
                trainer.push(rng.normal(size=(8, 8)), rng.normal(size=5),
                             int(rng.integers(0, 9)), float(rng.normal()),
                             rng.normal(size=(8, 8)), rng.normal(size=5),
                             bool(i % 7 == 0))
                trainer.train_step()
            return net_params_digest(trainer.net), net_params_digest(trainer.target)

        first, second = run(), run()
        assert first == second  # bitwise-identical parameter trajectory
        net_d, target_d = first
        assert net_d != target_d  # target lags behind between syncs


class TestCheckpoint:
    def test_roundtrip_and_determinism(self, tmp_path):
        net = TwoBranchQNet(8, rng_stream(19, 4), reduced=True)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(net, p1, config_hash="abc123")
        save_checkpoint(net, p2, config_hash="abc123")
        assert p1.read_bytes() == p2.read_bytes()
        loaded, manifest = load_checkpoint(p1)
        assert manifest["config_hash"] == "abc123"
        assert manifest["shapes"] == net.param_shapes()
        for a, b in zip(loaded.parameters(), net.parameters()):
            assert np.array_equal(a, b)
