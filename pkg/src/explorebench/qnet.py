"""Small fully-connected Q-network in plain numpy.

Weights for layer ``l`` have shape ``(dims[l+1], dims[l])``.  Forward passes
accept either a single state vector or a ``(batch, dims[0])`` array; dropout
(inverted, scale ``1/(1-p)``) is applied to hidden activations only when an
rng or explicit masks are supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")
CHECKPOINT_MAGIC = "explorebench-qnet v1"
MOMENT_FLOOR = 1e-200
MOMENT_FLUSH_EVERY = 1000


@dataclass
class QNetwork:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float = 0.0
    activation: str = "relu"

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.layer_dims = [int(d) for d in self.layer_dims]
        check_shapes(self)
        # all parameters live in one vector (checkpoint order); weights/biases are views
        self.flat, self.weights, self.biases = pack(self.weights, self.biases)

    @property
    def n_actions(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "QNetwork":
        return QNetwork(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.dropout_rate,
            self.activation,
        )


def layer_views(flat, layer_dims):
    """Per-layer weight and bias views onto a flat parameter vector."""
    ws, bs, i = [], [], 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        ws.append(flat[i:i + fan_in * fan_out].reshape(fan_out, fan_in))
        i += fan_in * fan_out
        bs.append(flat[i:i + fan_out])
        i += fan_out
    return ws, bs


def pack(weights, biases):
    """Copy per-layer arrays into one flat vector; return it with views onto it."""
    flat = np.concatenate(
        [a.reshape(-1) for w, b in zip(weights, biases) for a in (w, b)]
    ).astype(np.float64)
    dims = [weights[0].shape[1]] + [w.shape[0] for w in weights]
    return (flat, *layer_views(flat, dims))


@dataclass
class ForwardCache:
    """Everything backward needs: layer inputs, pre-activations, masks."""

    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    masks: list[np.ndarray | None]
    q: np.ndarray
    layer_dims: tuple[int, ...]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float = 0.0
    flat: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.flat is None:
            self.flat, self.weights, self.biases = pack(self.weights, self.biases)

    def global_norm(self) -> float:
        return float(np.sqrt(self.flat @ self.flat))


@dataclass
class AdamState:
    """First/second moments over the flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def check_shapes(net: QNetwork) -> None:
    dims = net.layer_dims
    if len(dims) < 2 or any(int(d) <= 0 for d in dims):
        raise ValueError(f"layer_dims needs >= 2 positive entries, got {dims}")
    if len(net.weights) != len(dims) - 1 or len(net.biases) != len(dims) - 1:
        raise ValueError("parameter count does not match layer_dims")
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
            raise ValueError(
                f"layer {l}: weight {w.shape}, bias {b.shape} do not chain with {dims}"
            )


def init_network(
    layer_dims, rng: np.random.Generator, dropout_rate: float = 0.0, activation: str = "relu"
) -> QNetwork:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ValueError(f"layer_dims needs >= 2 positive entries, got {list(layer_dims)}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return QNetwork(dims, weights, biases, dropout_rate, activation)


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z, kind):
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def sample_masks(net: QNetwork, batch: int, rng: np.random.Generator) -> list[np.ndarray]:
    """One dropout mask per hidden layer, entries exactly 0 or 1/(1-p)."""
    p = net.dropout_rate
    scale = 1.0 / (1.0 - p)
    return [
        np.where(rng.random((batch, width)) >= p, scale, 0.0)
        for width in net.layer_dims[1:-1]
    ]


def forward(net: QNetwork, x, rng: np.random.Generator | None = None, masks=None):
    """Q-values for ``x`` plus the cache for :func:`backward`.

    ``rng=None`` and ``masks=None`` gives the deterministic pass.  With an rng
    a fresh mask is drawn per batch row (skipped when dropout_rate is 0).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2 or h.shape[1] != net.layer_dims[0]:
        raise ValueError(f"input shape {x.shape} does not match input width {net.layer_dims[0]}")
    if masks is None and rng is not None and net.dropout_rate > 0.0:
        masks = sample_masks(net, h.shape[0], rng)
    last = net.n_layers - 1
    inputs, preacts, used = [], [], []
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w.T
        z += b
        preacts.append(z)
        if l == last:
            h = z
            break
        h = _act(z, net.activation)
        m = None if masks is None else masks[l]
        if m is not None:
            h = h * m
        used.append(m)
    q = h[0] if single else h
    return q, ForwardCache(inputs, preacts, used, h, tuple(net.layer_dims))


def _residuals(q2d, actions, targets):
    n = q2d.shape[0]
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if actions.shape != (n,):
        actions = np.broadcast_to(actions, (n,))
    if targets.shape != (n,):
        targets = np.broadcast_to(targets, (n,))
    if np.any(actions < 0) or np.any(actions >= q2d.shape[1]):
        raise ValueError(f"action index out of range for {q2d.shape[1]} actions")
    rows = np.arange(n)
    return rows, actions, q2d[rows, actions] - targets


def loss_from_q(q, actions, targets) -> float:
    q2d = np.atleast_2d(q)
    _, _, r = _residuals(q2d, actions, targets)
    return float(np.mean(r * r))


def backward(net: QNetwork, cache: ForwardCache, actions, targets) -> Gradients:
    """Gradient of the batch-mean squared TD error on the selected actions.

    ``actions``/``targets`` may be scalars (single sample) or length-batch
    arrays.  Gradients go through the same dropout masks as the forward pass.
    """
    if tuple(net.layer_dims) != cache.layer_dims or len(cache.inputs) != net.n_layers:
        raise ValueError("cache was produced by a network of a different shape")
    q2d = cache.q
    n = q2d.shape[0]
    rows, acts, r = _residuals(q2d, actions, targets)
    dz = np.zeros_like(q2d)
    dz[rows, acts] = 2.0 * r / n
    flat = np.empty_like(net.flat)
    gw, gb = layer_views(flat, net.layer_dims)
    for l in range(net.n_layers - 1, -1, -1):
        np.matmul(dz.T, cache.inputs[l], out=gw[l])
        np.sum(dz, axis=0, out=gb[l])
        if l == 0:
            break
        dz = dz @ net.weights[l]
        m = cache.masks[l - 1]
        if m is not None:
            dz *= m
        z = cache.preacts[l - 1]
        if net.activation == "relu":
            dz *= z > 0.0
        else:
            dz *= _act_grad(z, net.activation)
    return Gradients(gw, gb, float(np.mean(r * r)), flat)


def finite_difference_gradient(net: QNetwork, x, actions, targets, h=1e-5, masks=None) -> Gradients:
    """Central-difference estimate of every parameter gradient (test oracle)."""
    if h <= 0:
        raise ValueError("h must be positive")
    probe = net.copy()

    def loss():
        q, _ = forward(probe, x, masks=masks)
        return loss_from_q(q, actions, targets)

    out_w, out_b = [], []
    for params, out in ((probe.weights, out_w), (probe.biases, out_b)):
        for p in params:
            g = np.zeros_like(p)
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss()
                flat[i] = orig - h
                down = loss()
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * h)
            out.append(g)
    return Gradients(out_w, out_b, loss())


def relative_error(a, b, floor=1e-8):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def max_relative_error(g1: Gradients, g2: Gradients) -> float:
    return max(
        float(np.max(relative_error(a, b)))
        for a, b in zip(g1.weights + g1.biases, g2.weights + g2.biases)
    )


def init_adam(net: QNetwork, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(np.zeros_like(net.flat), np.zeros_like(net.flat), 0, lr, beta1, beta2, eps)


def clip_gradients(grads: Gradients, max_norm: float) -> Gradients:
    norm = grads.global_norm()
    if norm <= max_norm:
        return grads
    s = max_norm / norm
    return Gradients([g * s for g in grads.weights], [g * s for g in grads.biases], grads.loss)


def apply_update(net: QNetwork, grads: Gradients, state: AdamState):
    """One Adam step, in place.  Returns ``(net, state)`` for chaining."""
    for g, p in zip(grads.weights + grads.biases, net.weights + net.biases):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
    if state.m.shape != net.flat.shape:
        raise ValueError("optimizer state does not match network size")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    g = grads.flat
    m, v = state.m, state.v
    tmp = np.multiply(g, 1.0 - b1)
    m *= b1
    m += tmp
    np.multiply(g, g, out=tmp)
    tmp *= 1.0 - b2
    v *= b2
    v += tmp
    np.multiply(v, 1.0 / (1.0 - b2**t), out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += state.eps
    np.divide(m, tmp, out=tmp)
    tmp *= state.lr / (1.0 - b1**t)
    net.flat -= tmp
    if t % MOMENT_FLUSH_EVERY == 0:
        # moments of dead units decay into subnormals, which make every later
        # step many times slower; below 1e-200 they cannot move a parameter
        m[np.abs(m) < MOMENT_FLOOR] = 0.0
        v[v < MOMENT_FLOOR] = 0.0
    check_shapes(net)
    return net, state


def copy_parameters(src: QNetwork, dst: QNetwork) -> None:
    if src.layer_dims != dst.layer_dims:
        raise ValueError(f"cannot copy {src.layer_dims} into {dst.layer_dims}")
    np.copyto(dst.flat, src.flat)


# Checkpoint format (UTF-8 text, one item per line):
#   explorebench-qnet v1
#   activation <name>
#   layer_dims <d0> <d1> ...
#   dropout_rate <repr float>
#   then for each layer: weights row-major, then biases, one repr float per line
def save_network(net: QNetwork, path) -> None:
    lines = [
        CHECKPOINT_MAGIC,
        f"activation {net.activation}",
        "layer_dims " + " ".join(str(d) for d in net.layer_dims),
        f"dropout_rate {net.dropout_rate!r}",
    ]
    for w, b in zip(net.weights, net.biases):
        lines.extend(repr(float(v)) for v in w.reshape(-1))
        lines.extend(repr(float(v)) for v in b)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_network(path) -> QNetwork:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a qnet checkpoint")
    activation = lines[1].split()[1]
    dims = [int(t) for t in lines[2].split()[1:]]
    rate = float(lines[3].split()[1])
    values = iter(float(s) for s in lines[4:])
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(np.array([next(values) for _ in range(fan_in * fan_out)]).reshape(fan_out, fan_in))
        biases.append(np.array([next(values) for _ in range(fan_out)]))
    if next(values, None) is not None:
        raise ValueError(f"{path}: trailing parameters")
    return QNetwork(dims, weights, biases, rate, activation)
