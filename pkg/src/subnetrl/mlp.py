"""Minimal dense network with explicit backpropagation on a flat parameter vector.

All policies and critics in this package are small MLPs whose weights live in a
single ordered float64 vector. The flat layout is what gets exchanged during
federated aggregation and written to checkpoint files, so it is fixed by the
network spec: for each layer, W (fan_out x fan_in, row-major) followed by b
(fan_out).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh")
OUTPUT_HEADS = ("linear", "softmax")

_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected network.

    layer_sizes includes the input and output widths, e.g. (4, 64, 64, 4).
    """

    layer_sizes: tuple
    activation: str = "relu"
    output_head: str = "linear"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("need at least input and output layers")
        if any(s < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_head not in OUTPUT_HEADS:
            raise ValueError(f"unknown output head {self.output_head!r}")
        # precomputed flat-vector slicing, hot path for forward/backward
        slices = []
        offset = 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            slices.append((offset, fan_in, fan_out))
            offset += (fan_in + 1) * fan_out
        object.__setattr__(self, "_slices", tuple(slices))
        object.__setattr__(self, "_num_params", offset)

    @property
    def num_params(self) -> int:
        return self._num_params

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]


def init_params(spec: MlpSpec, seed: int) -> np.ndarray:
    """He-uniform (relu) or Glorot-uniform (tanh) weights, zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        if spec.activation == "relu":
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        chunks.append(w.ravel())
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unflatten(params: np.ndarray, spec: MlpSpec):
    """Split the flat vector into [(W, b), ...] views (no copies)."""
    if params.shape != (spec.num_params,):
        raise ValueError(
            f"parameter vector has length {params.shape}, spec needs {spec.num_params}"
        )
    layers = []
    for offset, fan_in, fan_out in spec._slices:
        w = params[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in)
        b = params[offset + fan_in * fan_out : offset + (fan_in + 1) * fan_out]
        layers.append((w, b))
    return layers


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(float)
    return 1.0 - np.tanh(z) ** 2


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward_cached(params, spec, x):
    """Forward pass returning (output, cache) so a backward pass can reuse it."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"input width {x.shape[1]} != spec input {spec.input_dim}")
    layers = unflatten(params, spec)
    pre = []  # pre-activations per layer
    act = [x]  # post-activations, act[0] is the input
    a = x
    for li, (w, b) in enumerate(layers):
        z = a @ w.T + b
        pre.append(z)
        if li < len(layers) - 1:
            a = _activate(z, spec.activation)
        elif spec.output_head == "softmax":
            a = _softmax(z)
        else:
            a = z
        act.append(a)
    return a, (pre, act, squeeze)


def forward(params: np.ndarray, spec: MlpSpec, x) -> np.ndarray:
    """Feed-forward pass; accepts a single input vector or a (batch, in) array."""
    out, (_, _, squeeze) = forward_cached(params, spec, x)
    return out[0] if squeeze else out


def backward_cached(params: np.ndarray, spec: MlpSpec, cache, upstream_grad) -> np.ndarray:
    """Backward pass from a forward_cached cache; see backward()."""
    pre, act, squeeze = cache
    out = act[-1]
    g = np.asarray(upstream_grad, dtype=float)
    if squeeze:
        g = g[None, :]
    if g.shape != out.shape:
        raise ValueError(f"upstream grad shape {g.shape} != output shape {out.shape}")

    layers = unflatten(params, spec)
    grad = np.zeros_like(params)
    grad_layers = unflatten(grad, spec)

    if spec.output_head == "softmax":
        p = out
        delta = p * (g - (g * p).sum(axis=1, keepdims=True))
    else:
        delta = g
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        gw, gb = grad_layers[li]
        gw += delta.T @ act[li]
        gb += delta.sum(axis=0)
        if li > 0:
            delta = (delta @ w) * _activate_grad(pre[li - 1], spec.activation)
    return grad


def backward(params: np.ndarray, spec: MlpSpec, x, upstream_grad) -> np.ndarray:
    """Gradient of sum_b upstream_b . output_b with respect to the flat params.

    For a scalar loss L, pass upstream_grad = dL/d(output) and this returns
    dL/d(params) exactly (summed over the batch).
    """
    _, cache = forward_cached(params, spec, x)
    return backward_cached(params, spec, cache, upstream_grad)


@dataclass
class AdamState:
    """Optimizer state; method='sgd' falls back to a plain gradient step."""

    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    method: str = "adam"
    step_count: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    def _ensure(self, n):
        if self.m is None:
            self.m = np.zeros(n)
            self.v = np.zeros(n)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState):
    """One optimizer step; returns (new_params, state)."""
    if params.shape != grad.shape:
        raise ValueError("params and grad must have the same shape")
    if state.method == "sgd":
        return params - state.learning_rate * grad, state
    state._ensure(params.shape[0])
    state.step_count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    m_hat = state.m / (1.0 - state.beta1**state.step_count)
    v_hat = state.v / (1.0 - state.beta2**state.step_count)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps_adam)
    return new_params, state


def polyak_update(target: np.ndarray, online: np.ndarray, tau: float) -> np.ndarray:
    """target' = (1 - tau) * target + tau * online."""
    if target.shape != online.shape:
        raise ValueError("target/online length mismatch")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    return (1.0 - tau) * target + tau * online


def save_weights(path, spec: MlpSpec, params: np.ndarray) -> None:
    """Checkpoint format: version byte, activation id, head id, layer count
    (uint32 LE), layer sizes (uint32 LE each), then float64 LE weights."""
    if params.shape != (spec.num_params,):
        raise ValueError("parameter vector does not match spec")
    header = struct.pack(
        "<BBBI",
        _FORMAT_VERSION,
        ACTIVATIONS.index(spec.activation),
        OUTPUT_HEADS.index(spec.output_head),
        len(spec.layer_sizes),
    )
    header += struct.pack(f"<{len(spec.layer_sizes)}I", *spec.layer_sizes)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.asarray(params, dtype="<f8").tobytes())


def load_weights(path):
    """Inverse of save_weights; returns (spec, params)."""
    with open(path, "rb") as f:
        version, act_id, head_id, n_layers = struct.unpack("<BBBI", f.read(7))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = struct.unpack(f"<{n_layers}I", f.read(4 * n_layers))
        spec = MlpSpec(sizes, ACTIVATIONS[act_id], OUTPUT_HEADS[head_id])
        params = np.frombuffer(f.read(), dtype="<f8").astype(float)
    if params.shape != (spec.num_params,):
        raise ValueError("checkpoint payload does not match its header")
    return spec, params
