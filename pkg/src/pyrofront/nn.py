"""Minimal from-scratch neural net: conv/dense layers with backprop, the
two-branch value network, and finite-difference gradient verification.

Everything runs in float64 numpy so analytic gradients can be checked against
central differences to tight tolerances.
"""

from __future__ import annotations

import math

import numpy as np


class Layer:
    weights: list[np.ndarray]
    grads: list[np.ndarray]

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for g in self.grads:
            g.fill(0.0)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        scale = math.sqrt(2.0 / n_in)
        self.w = rng.normal(0.0, scale, size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.weights = [self.w, self.b]
        self.grads = [self.gw, self.gb]

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.gw += self._x.T @ dy
        self.gb += dy.sum(axis=0)
        return dy @ self.w.T


class ReLU(Layer):
    weights: list[np.ndarray] = []
    grads: list[np.ndarray] = []

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class Flatten(Layer):
    weights: list[np.ndarray] = []
    grads: list[np.ndarray] = []

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Conv2D(Layer):
    """3x3-style convolution on (B, C, H, W) input, im2col implementation."""

    def __init__(self, in_ch: int, out_ch: int, ksize: int, stride: int,
                 pad: int, rng: np.random.Generator):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.k, self.stride, self.pad = ksize, stride, pad
        scale = math.sqrt(2.0 / (in_ch * ksize * ksize))
        self.w = rng.normal(0.0, scale, size=(out_ch, in_ch, ksize, ksize))
        self.b = np.zeros(out_ch)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.weights = [self.w, self.b]
        self.grads = [self.gw, self.gb]

    def _out_hw(self, h: int, w: int) -> tuple[int, int]:
        k, s, p = self.k, self.stride, self.pad
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def forward(self, x):
        # batch folded into the position axis: one 2D GEMM instead of B small ones
        bsz, c, h, w = x.shape
        k, s, p = self.k, self.stride, self.pad
        oh, ow = self._out_hw(h, w)
        if p:
            xp = np.zeros((bsz, c, h + 2 * p, w + 2 * p))
            xp[:, :, p:p + h, p:p + w] = x
        else:
            xp = np.ascontiguousarray(x)
        cols = np.empty((c, k, k, bsz, oh, ow))
        for ki in range(k):
            for kj in range(k):
                cols[:, ki, kj] = xp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s].transpose(1, 0, 2, 3)
        self._cols2 = cols.reshape(c * k * k, bsz * oh * ow)  # view: C-order
        self._in_shape = (bsz, c, h, w)
        wm = self.w.reshape(self.out_ch, c * k * k)
        y2 = wm @ self._cols2 + self.b[:, None]
        return y2.reshape(self.out_ch, bsz, oh, ow).swapaxes(0, 1)

    def backward(self, dy):
        bsz, c, h, w = self._in_shape
        k, s, p = self.k, self.stride, self.pad
        oh, ow = self._out_hw(h, w)
        dy2 = dy.transpose(1, 0, 2, 3).reshape(self.out_ch, bsz * oh * ow)
        wm = self.w.reshape(self.out_ch, c * k * k)
        self.gw += (dy2 @ self._cols2.T).reshape(self.w.shape)
        self.gb += dy2.sum(axis=1)
        dcols = (wm.T @ dy2).reshape(c, k, k, bsz, oh, ow)
        dxp = np.zeros((bsz, c, h + 2 * p, w + 2 * p))
        for ki in range(k):
            for kj in range(k):
                dxp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s] += \
                    dcols[:, ki, kj].transpose(1, 0, 2, 3)
        return dxp[:, :, p:p + h, p:p + w]


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def param_layers(self):
        for layer in self.layers:
            if layer.weights:
                yield layer


UAV_VEC_DIM = 5  # x, y, battery (normalized) + heading as (cos, sin)
LATENT_DIM = 16
N_ACTION_VALUES = 9


class TwoBranchQNet:
    """Map branch (conv stack -> 16-d latent) fused with a UAV-state branch
    (three dense layers -> 16-d latent) into 9 action values.

    Full width compresses a 16x16 map to an 8x8x256 feature block before
    flattening; the reduced width keeps the same topology with thin channels.
    """

    def __init__(self, grid_size: int, rng: np.random.Generator,
                 reduced: bool = True):
        self.grid_size = grid_size
        self.reduced = reduced
        c1, c2 = (8, 16) if reduced else (64, 256)
        self.channels = (c1, c2)
        half = (grid_size + 2 - 3) // 2 + 1  # stride-2 conv output side
        self.feature_hw = half
        self.map_branch = Sequential([
            Conv2D(1, c1, ksize=3, stride=1, pad=1, rng=rng),
            ReLU(),
            Conv2D(c1, c2, ksize=3, stride=2, pad=1, rng=rng),
            ReLU(),
            Flatten(),
            Dense(c2 * half * half, LATENT_DIM, rng),
        ])
        self.state_branch = Sequential([
            Dense(UAV_VEC_DIM, 32, rng),
            ReLU(),
            Dense(32, 32, rng),
            ReLU(),
            Dense(32, LATENT_DIM, rng),
        ])
        self.head = Sequential([
            Dense(2 * LATENT_DIM, 32, rng),
            ReLU(),
            Dense(32, N_ACTION_VALUES, rng),
        ])

    # --- forward/backward -------------------------------------------------
    def forward(self, map_in: np.ndarray, vec_in: np.ndarray) -> np.ndarray:
        """map_in: (B, N, N) or (B, 1, N, N); vec_in: (B, 5). Returns (B, 9)."""
        if map_in.ndim == 3:
            map_in = map_in[:, None, :, :]
        zm = self.map_branch.forward(map_in)
        zs = self.state_branch.forward(vec_in)
        self._split = zm.shape[1]
        fused = np.concatenate([zm, zs], axis=1)
        return self.head.forward(fused)

    def backward(self, dq: np.ndarray) -> None:
        dfused = self.head.backward(dq)
        dzm, dzs = dfused[:, :self._split], dfused[:, self._split:]
        self.map_branch.backward(dzm)
        self.state_branch.backward(dzs)

    # --- parameter plumbing -------------------------------------------------
    def branches(self):
        return (self.map_branch, self.state_branch, self.head)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for br in self.branches():
            for layer in br.param_layers():
                out.extend(layer.weights)
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for br in self.branches():
            for layer in br.param_layers():
                out.extend(layer.grads)
        return out

    def zero_grad(self) -> None:
        for br in self.branches():
            br.zero_grad()

    def sgd_step(self, lr: float) -> None:
        for p, g in zip(self.parameters(), self.gradients()):
            p -= lr * g

    def copy_weights_from(self, other: "TwoBranchQNet") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src

    def clone(self) -> "TwoBranchQNet":
        twin = TwoBranchQNet(self.grid_size, np.random.default_rng(0),
                             reduced=self.reduced)
        twin.copy_weights_from(self)
        return twin

    def param_shapes(self) -> list[list[int]]:
        return [list(p.shape) for p in self.parameters()]


def encode_uav_vec(x: int, y: int, battery: float, heading: float | None,
                   grid_size: int) -> np.ndarray:
    """Normalize the raw UAV state (x, y, P, phi) into the 5-d network input;
    a heading of None (hover-neutral) encodes as a zero direction vector."""
    denom = max(1, grid_size - 1)
    hx, hy = (0.0, 0.0) if heading is None else (math.cos(heading), math.sin(heading))
    return np.array([x / denom, y / denom, battery / 100.0, hx, hy])


def q_forward(net: TwoBranchQNet, map_input: np.ndarray, uav_vec) -> np.ndarray:
    """Action values for one (map, uav) pair; uav_vec is (x, y, P, heading)."""
    x, y, battery, heading = uav_vec
    vec = encode_uav_vec(int(x), int(y), float(battery),
                         None if heading is None else float(heading),
                         net.grid_size)
    q = net.forward(np.asarray(map_input, dtype=float)[None], vec[None])
    if not np.all(np.isfinite(q)):
        raise FloatingPointError("non-finite action values")
    return q[0]


def _selected_q_loss(net: TwoBranchQNet, maps, vecs, actions, targets):
    q = net.forward(maps, vecs)
    sel = q[np.arange(len(actions)), actions]
    err = sel - targets
    return float(np.mean(err ** 2)), q, err


def gradient_check(net: TwoBranchQNet, rng: np.random.Generator,
                   n_samples: int = 200, batch: int = 4,
                   h: float = 1e-4) -> float:
    """Max relative error between backprop and central finite differences
    over `n_samples` randomly sampled parameters."""
    n = net.grid_size
    maps = rng.normal(0.0, 1.0, size=(batch, n, n))
    vecs = rng.normal(0.0, 1.0, size=(batch, UAV_VEC_DIM))
    actions = rng.integers(0, N_ACTION_VALUES, size=batch)
    targets = rng.normal(0.0, 1.0, size=batch)

    net.zero_grad()
    _, _, err = _selected_q_loss(net, maps, vecs, actions, targets)
    dq = np.zeros((batch, N_ACTION_VALUES))
    dq[np.arange(batch), actions] = 2.0 * err / batch
    net.backward(dq)

    params = net.parameters()
    grads = net.gradients()
    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    bounds = np.cumsum(sizes)
    starts = bounds - sizes
    # every tensor contributes samples, so every layer type gets checked;
    # the remainder is drawn uniformly over all parameters
    chosen: set[int] = set()
    for pi, size in enumerate(sizes):
        take = min(2, int(size))
        for off in rng.choice(size, size=take, replace=False):
            chosen.add(int(starts[pi] + off))
    while len(chosen) < min(n_samples, total):
        chosen.add(int(rng.integers(0, total)))
    flat_idx = sorted(chosen)

    worst = 0.0
    for fi in flat_idx:
        pi = int(np.searchsorted(bounds, fi, side="right"))
        off = int(fi - (bounds[pi - 1] if pi > 0 else 0))
        p = params[pi]
        orig = p.flat[off]
        p.flat[off] = orig + h
        lp, _, _ = _selected_q_loss(net, maps, vecs, actions, targets)
        p.flat[off] = orig - h
        lm, _, _ = _selected_q_loss(net, maps, vecs, actions, targets)
        p.flat[off] = orig
        numeric = (lp - lm) / (2.0 * h)
        analytic = grads[pi].flat[off]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, rel)
    return worst
