"""
Single-layer ConvLSTM stabiliser with manual forward and backward passes.

The cell reads the backbone heatmaps ``o_t`` together with the previous hidden
state, and emits ``s_t = o_t + out_proj(h_t)``. The output projection starts at
zero, so an untrained model reproduces the backbone exactly and fine-tuning
starts from the backbone's own predictions.

Gate order inside the stacked gate tensors is (input, forget, output,
candidate). No peephole connections are used. Convolutions are zero padded
and keep the ``H x W`` grid.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import hadamard
from scipy.special import expit

from apps.errors import ShapeMismatchError, StaleCacheError

PARAMETER_ORDER = ("gate_weight", "gate_bias", "out_weight", "out_bias")
N_GATES = 4
FORGET_BIAS = 1.0
INIT_NOISE = 0.1
INPUT_GAIN = 2.0
OUTPUT_GAIN = 2.0
FAST_FORGET_GAIN = 3.0
SLOW_FORGET_GAIN = 1.0
CANDIDATE_GAIN = 1.0


def landmark_codes(input_channels: int, hidden_channels: int) -> np.ndarray:
    """
    ``(C_h, K)`` sign matrix: channel ``c`` reads landmark ``j`` with sign ``codes[c, j]``.

    Channels ``2r`` and ``2r + 1`` share row ``r`` of a Sylvester Hadamard
    matrix with its constant column dropped, so every column sums to zero over
    a full group of rows. The columns are mutually orthogonal when the group
    spans every row of the table, for example ``K = 5, C_h = 16``.
    """
    group = (hidden_channels + 1) // 2
    order = 1 << int(np.ceil(np.log2(max(group, input_channels + 1, 1))))
    table = hadamard(order)
    return table[np.arange(hidden_channels) // 2, 1:input_channels + 1].astype(np.float64)


@dataclass(frozen=True)
class ConvLSTMState:
    """Hidden and cell state, each ``(C_h, H, W)``."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_channels: int, height: int, width: int) -> "ConvLSTMState":
        shape = (hidden_channels, height, width)
        return cls(h=np.zeros(shape), c=np.zeros(shape))


class ConvLSTMModel:
    """
    Parameters of the stabiliser.

    Attributes:
        input_channels (int): Landmark count K.
        hidden_channels (int): Hidden channel count C_h.
        kernel_size (int): Odd gate kernel size.
        params (Dict[str, np.ndarray]): ``gate_weight (4C_h, K+C_h, k, k)``,
            ``gate_bias (4C_h,)``, ``out_weight (K, C_h)``, ``out_bias (K,)``.
        version (int): Bumped on every parameter update; forward caches record it.
    """

    def __init__(self, input_channels: int, hidden_channels: int, kernel_size: int,
                 params: Dict[str, np.ndarray]):
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be a positive odd integer, got {kernel_size}")
        self.input_channels = input_channels
        self.hidden_channels = hidden_channels
        self.kernel_size = kernel_size
        expected = self.parameter_shapes()
        for name in PARAMETER_ORDER:
            if name not in params or params[name].shape != expected[name]:
                got = None if name not in params else params[name].shape
                raise ShapeMismatchError(f"Parameter {name} must have shape {expected[name]}, got {got}")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in PARAMETER_ORDER}
        self.version = 0

    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        k, ch, size = self.input_channels, self.hidden_channels, self.kernel_size
        return {
            "gate_weight": (N_GATES * ch, k + ch, size, size),
            "gate_bias": (N_GATES * ch,),
            "out_weight": (k, ch),
            "out_bias": (k,),
        }

    @classmethod
    def initialize(cls, input_channels: int, hidden_channels: int = 16, kernel_size: int = 3,
                   seed: int = 0) -> "ConvLSTMModel":
        """
        Fresh model with landmark-coded gates, forget bias +1 and a zero output projection.

        Even hidden channels are slow traces that keep a running memory of the
        landmark blobs, odd channels are fast traces that follow the current
        frame. Each channel reads landmark ``j`` through the centre tap with the
        sign ``landmark_codes()[c, j]``; codes of different landmarks are
        orthogonal within each trace group when it spans the code table, so a
        projection onto one landmark's
        code cancels every other landmark. A small seeded normal component is
        added to all gate weights.
        """
        rng = np.random.default_rng(seed)
        k, ch = input_channels, hidden_channels
        fan_in = (k + ch) * kernel_size ** 2
        gate_weight = rng.normal(0.0, INIT_NOISE / np.sqrt(fan_in),
                                 size=(N_GATES * ch, k + ch, kernel_size, kernel_size))
        centre = kernel_size // 2
        codes = landmark_codes(k, ch)
        fast = np.arange(ch) % 2 == 1
        taps = gate_weight[:, :k, centre, centre]
        taps[:ch] += np.where(fast, INPUT_GAIN, 0.0)[:, None]
        taps[ch:2 * ch] += np.where(fast, -FAST_FORGET_GAIN, SLOW_FORGET_GAIN)[:, None]
        taps[2 * ch:3 * ch] += OUTPUT_GAIN
        taps[3 * ch:] += CANDIDATE_GAIN * codes
        gate_bias = np.zeros(N_GATES * ch)
        gate_bias[ch:2 * ch] = FORGET_BIAS
        params = {
            "gate_weight": gate_weight,
            "gate_bias": gate_bias,
            "out_weight": np.zeros((k, ch)),
            "out_bias": np.zeros(k),
        }
        return cls(k, ch, kernel_size, params)

    def copy(self) -> "ConvLSTMModel":
        return ConvLSTMModel(self.input_channels, self.hidden_channels, self.kernel_size,
                             {name: value.copy() for name, value in self.params.items()})

    def set_params(self, params: Dict[str, np.ndarray]) -> None:
        """Replace the parameters (same shapes) and invalidate outstanding caches."""
        for name in PARAMETER_ORDER:
            if params[name].shape != self.params[name].shape:
                raise ShapeMismatchError(f"Parameter {name} must keep shape {self.params[name].shape}")
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in PARAMETER_ORDER}
        self.version += 1

    def zero_state(self, height: int, width: int) -> ConvLSTMState:
        return ConvLSTMState.zeros(self.hidden_channels, height, width)


@dataclass
class ConvLSTMCache:
    """Intermediates of one forward step, consumed by ``cell_backward``."""

    model: ConvLSTMModel
    version: int
    patches: np.ndarray
    c_prev: np.ndarray
    gates: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    tanh_c: np.ndarray
    h: np.ndarray


def _conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-padded 'same' convolution; returns the output and the im2col patches."""
    pad = weight.shape[-1] // 2
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    # patches[i, r, c, a, b] = padded[i, r + a, c + b]
    patches = sliding_window_view(padded, weight.shape[-2:], axis=(1, 2))
    out = np.tensordot(weight, patches, axes=([1, 2, 3], [0, 3, 4]))
    return out + bias[:, None, None], patches


def _conv_backward(grad_out: np.ndarray, weight: np.ndarray, patches: np.ndarray,
                   in_shape: Tuple[int, int, int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of ``_conv_forward`` w.r.t. weight, bias and input."""
    size = weight.shape[-1]
    pad = size // 2
    _, height, width = in_shape
    grad_weight = np.tensordot(grad_out, patches, axes=([1, 2], [1, 2]))
    grad_bias = grad_out.sum(axis=(1, 2))
    grad_patches = np.tensordot(weight, grad_out, axes=([0], [0]))  # (C_in, k, k, H, W)
    grad_padded = np.zeros((in_shape[0], height + 2 * pad, width + 2 * pad))
    for a in range(size):
        for b in range(size):
            grad_padded[:, a:a + height, b:b + width] += grad_patches[:, a, b]
    return grad_weight, grad_bias, grad_padded[:, pad:pad + height, pad:pad + width]


def cell_forward(model: ConvLSTMModel, state_prev: ConvLSTMState,
                 o_t: np.ndarray) -> Tuple[ConvLSTMState, np.ndarray, ConvLSTMCache]:
    """
    One ConvLSTM step.

    Args:
        model (ConvLSTMModel): Stabiliser parameters.
        state_prev (ConvLSTMState): ``(h_{t-1}, c_{t-1})``.
        o_t (np.ndarray): Backbone heatmaps ``(K, H, W)``.

    Returns:
        Tuple[ConvLSTMState, np.ndarray, ConvLSTMCache]: new state, stabilised
        heatmaps ``s_t`` and the cache for the backward pass.
    """
    o_t = np.asarray(o_t, dtype=np.float64)
    if o_t.ndim != 3 or o_t.shape[0] != model.input_channels:
        raise ShapeMismatchError(f"Expected ({model.input_channels}, H, W) heatmaps, got {o_t.shape}")
    state_shape = (model.hidden_channels,) + o_t.shape[1:]
    if state_prev.h.shape != state_shape or state_prev.c.shape != state_shape:
        raise ShapeMismatchError(f"State shape {state_prev.h.shape} does not match {state_shape}")

    params = model.params
    ch = model.hidden_channels
    x = np.concatenate([o_t, state_prev.h], axis=0)
    z, patches = _conv_forward(x, params["gate_weight"], params["gate_bias"])
    i = expit(z[:ch])
    f = expit(z[ch:2 * ch])
    o = expit(z[2 * ch:3 * ch])
    g = np.tanh(z[3 * ch:])
    c = f * state_prev.c + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    s_t = o_t + np.tensordot(params["out_weight"], h, axes=([1], [0])) + params["out_bias"][:, None, None]

    cache = ConvLSTMCache(model=model, version=model.version, patches=patches, c_prev=state_prev.c,
                          gates=(i, f, o, g), tanh_c=tanh_c, h=h)
    return ConvLSTMState(h=h, c=c), s_t, cache


def cell_backward(cache: ConvLSTMCache, grad_s_t: np.ndarray,
                  grad_state_next: Optional[ConvLSTMState] = None
                  ) -> Tuple[Dict[str, np.ndarray], ConvLSTMState, np.ndarray]:
    """
    Reverse-mode gradients of one step.

    Args:
        cache (ConvLSTMCache): Cache of the matching forward step.
        grad_s_t (np.ndarray): dL/ds_t, ``(K, H, W)``.
        grad_state_next (ConvLSTMState): dL/dh_t and dL/dc_t flowing back from
            later steps; ``None`` for the last step.

    Returns:
        Tuple: parameter gradients, dL/d(h_{t-1}, c_{t-1}) and dL/do_t.

    Raises:
        StaleCacheError: If the model changed since the forward step.
    """
    model = cache.model
    if cache.version != model.version:
        raise StaleCacheError(f"Cache from model version {cache.version}, model is at version {model.version}")
    if grad_s_t.shape != (model.input_channels,) + cache.h.shape[1:]:
        raise ShapeMismatchError(f"grad_s_t shape {grad_s_t.shape} does not match the cached step")
    params = model.params
    k = model.input_channels
    i, f, o, g = cache.gates
    tanh_c = cache.tanh_c
    if grad_state_next is None:
        grad_state_next = ConvLSTMState.zeros(model.hidden_channels, *cache.h.shape[1:])

    grad_out_weight = np.tensordot(grad_s_t, cache.h, axes=([1, 2], [1, 2]))
    grad_out_bias = grad_s_t.sum(axis=(1, 2))
    dh = np.tensordot(params["out_weight"], grad_s_t, axes=([0], [0])) + grad_state_next.h
    dc = dh * o * (1.0 - tanh_c ** 2) + grad_state_next.c

    dz = np.concatenate([
        dc * g * i * (1.0 - i),
        dc * cache.c_prev * f * (1.0 - f),
        dh * tanh_c * o * (1.0 - o),
        dc * i * (1.0 - g ** 2),
    ])
    in_shape = (k + model.hidden_channels,) + cache.h.shape[1:]
    grad_gate_weight, grad_gate_bias, dx = _conv_backward(dz, params["gate_weight"], cache.patches, in_shape)

    grads = {
        "gate_weight": grad_gate_weight,
        "gate_bias": grad_gate_bias,
        "out_weight": grad_out_weight,
        "out_bias": grad_out_bias,
    }
    grad_state_prev = ConvLSTMState(h=dx[k:], c=dc * f)
    grad_o_t = grad_s_t + dx[:k]
    return grads, grad_state_prev, grad_o_t


def forward_sequence(model: ConvLSTMModel, frames: Sequence[np.ndarray]) -> Tuple[np.ndarray, List[ConvLSTMCache]]:
    """Run the cell over frames from a zero state, keeping every cache."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[0] == 0:
        raise ShapeMismatchError(f"Expected a non-empty (T, K, H, W) sequence, got shape {frames.shape}")
    state = model.zero_state(*frames.shape[2:])
    outputs = np.empty_like(frames)
    caches = []
    for t, o_t in enumerate(frames):
        state, outputs[t], cache = cell_forward(model, state, o_t)
        caches.append(cache)
    return outputs, caches


def run_sequence(model: ConvLSTMModel, frames: Sequence[np.ndarray]) -> np.ndarray:
    """
    Stabilise a sequence of backbone heatmaps, starting from a zero state.

    Args:
        model (ConvLSTMModel): Stabiliser.
        frames (Sequence[np.ndarray]): ``(T, K, H, W)`` backbone heatmaps.

    Returns:
        np.ndarray: ``(T, K, H, W)`` stabilised heatmaps.
    """
    outputs, _ = forward_sequence(model, frames)
    return outputs


def backward_sequence(caches: Sequence[ConvLSTMCache], grad_outputs: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Backpropagation through time over a whole sequence.

    Args:
        caches (Sequence[ConvLSTMCache]): Caches from ``forward_sequence``.
        grad_outputs (np.ndarray): dL/ds_t for every frame, ``(T, K, H, W)``.

    Returns:
        Dict[str, np.ndarray]: Accumulated parameter gradients.
    """
    if len(caches) != len(grad_outputs):
        raise ShapeMismatchError(f"{len(caches)} caches for {len(grad_outputs)} output gradients")
    total = {name: np.zeros_like(value) for name, value in caches[0].model.params.items()}
    grad_state = None
    for cache, grad_s in zip(reversed(caches), grad_outputs[::-1]):
        grads, grad_state, _ = cell_backward(cache, grad_s, grad_state)
        for name in total:
            total[name] += grads[name]
    return total
