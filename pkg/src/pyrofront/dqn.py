"""DQN machinery: uniform replay, epsilon-greedy masked action selection,
TD(0) training against a hard-synced target network, and checkpoints.

Checkpoints are a versioned binary blob: a JSON manifest (layer shapes,
config hash) followed by the raw parameter bytes, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .nn import N_ACTION_VALUES, TwoBranchQNet, q_forward

CHECKPOINT_VERSION = 1


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: list[tuple] = []
        self._pos = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, map_s, vec_s, action: int, reward: float,
             map_s2, vec_s2, done: bool) -> None:
        item = (np.asarray(map_s), np.asarray(vec_s), int(action), float(reward),
                np.asarray(map_s2), np.asarray(vec_s2), bool(done))
        if len(self._data) < self.capacity:
            self._data.append(item)
        else:
            self._data[self._pos] = item
        self._pos = (self._pos + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if len(self._data) < batch_size:
            raise ValueError("not enough transitions to sample a batch")
        idx = rng.integers(0, len(self._data), size=batch_size)
        rows = [self._data[i] for i in idx]
        return {
            "maps": np.stack([r[0] for r in rows]),
            "vecs": np.stack([r[1] for r in rows]),
            "actions": np.array([r[2] for r in rows], dtype=int),
            "rewards": np.array([r[3] for r in rows]),
            "next_maps": np.stack([r[4] for r in rows]),
            "next_vecs": np.stack([r[5] for r in rows]),
            "dones": np.array([r[6] for r in rows], dtype=float),
        }


def select_action(net: TwoBranchQNet, map_input: np.ndarray, uav_vec,
                  valid: list[int], eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the valid set; greedy ties break to the lowest
    action index, and invalid actions are never selected."""
    if not valid:
        raise ValueError("valid action set must be nonempty")
    valid = sorted(valid)
    if rng.random() < eps:
        return int(valid[rng.integers(len(valid))])
    q = q_forward(net, map_input, uav_vec)
    best = valid[0]
    for a in valid[1:]:
        if q[a] > q[best]:
            best = a
    return int(best)


def td_train_step(net: TwoBranchQNet, target_net: TwoBranchQNet, batch: dict,
                  gamma: float, lr: float, grad_clip_norm: float = 0.0) -> float:
    """One SGD step on the mean squared TD error; returns the pre-step loss.

    With grad_clip_norm > 0 the global gradient norm is clipped, which keeps
    plain SGD finite under the large burnout/KL reward magnitudes.
    """
    q_next = target_net.forward(batch["next_maps"], batch["next_vecs"])
    targets = batch["rewards"] + gamma * q_next.max(axis=1) * (1.0 - batch["dones"])

    bsz = len(batch["actions"])
    q = net.forward(batch["maps"], batch["vecs"])
    sel = q[np.arange(bsz), batch["actions"]]
    err = sel - targets
    loss = float(np.mean(err ** 2))
    if not np.isfinite(loss):
        raise FloatingPointError(
            f"non-finite TD loss (loss={loss}, |q|max={np.abs(q).max()}, "
            f"|target|max={np.abs(targets).max()})"
        )
    dq = np.zeros((bsz, N_ACTION_VALUES))
    dq[np.arange(bsz), batch["actions"]] = 2.0 * err / bsz
    net.zero_grad()
    net.backward(dq)
    if grad_clip_norm > 0:
        total = math.sqrt(sum(float(np.sum(g * g)) for g in net.gradients()))
        if total > grad_clip_norm:
            scale = grad_clip_norm / total
            for g in net.gradients():
                g *= scale
    net.sgd_step(lr)
    return loss


class DQNTrainer:
    """Owns the online/target nets, replay buffer, and the sync schedule."""

    def __init__(self, net: TwoBranchQNet, gamma: float, lr: float,
                 batch_size: int, target_sync_period: int, buffer_capacity: int,
                 rng: np.random.Generator, grad_clip_norm: float = 0.0):
        self.net = net
        self.target = net.clone()
        self.gamma = gamma
        self.lr = lr
        self.batch_size = batch_size
        self.target_sync_period = target_sync_period
        self.grad_clip_norm = grad_clip_norm
        self.buffer = ReplayBuffer(buffer_capacity)
        self.rng = rng
        self.steps = 0
        self.loss_log: list[tuple[int, float]] = []

    def push(self, *transition) -> None:
        self.buffer.push(*transition)

    def train_step(self) -> float | None:
        if len(self.buffer) < self.batch_size:
            return None
        batch = self.buffer.sample(self.batch_size, self.rng)
        loss = td_train_step(self.net, self.target, batch, self.gamma, self.lr,
                             self.grad_clip_norm)
        self.steps += 1
        self.loss_log.append((self.steps, loss))
        if self.steps % self.target_sync_period == 0:
            self.target.copy_weights_from(self.net)
        return loss


def save_checkpoint(net: TwoBranchQNet, path: str | Path,
                    config_hash: str = "") -> None:
    params = net.parameters()
    manifest = {
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "grid_size": net.grid_size,
        "reduced": net.reduced,
        "shapes": net.param_shapes(),
        "dtype": "float64",
    }
    header = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype=np.float64).tobytes())


def load_checkpoint(path: str | Path) -> tuple[TwoBranchQNet, dict]:
    with open(path, "rb") as fh:
        hlen = int.from_bytes(fh.read(8), "little")
        manifest = json.loads(fh.read(hlen).decode())
        if manifest["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest['version']}")
        net = TwoBranchQNet(manifest["grid_size"], np.random.default_rng(0),
                            reduced=manifest["reduced"])
        for p, shape in zip(net.parameters(), manifest["shapes"]):
            if list(p.shape) != shape:
                raise ValueError("checkpoint shape mismatch")
            raw = fh.read(p.size * 8)
            p[...] = np.frombuffer(raw, dtype=np.float64).reshape(shape)
    return net, manifest
