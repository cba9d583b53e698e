"""Temporal convolution extractor with hand-written reverse-mode gradients, and AdamW.

The extractor maps a complex ``N x (2*dd+1)`` window to a length-``N`` signal.
Real and imaginary parts of every column become input channels; a stack of
same-padded 1-D convolutions with a pointwise nonlinearity feeds a 1x1
linear head. Everything runs in float64 on numpy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from radar_aplanc.dsp import TimeSeries
from radar_aplanc.errors import ArgumentError, TrainingError

log = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "identity")


@dataclass
class ExtractorParams:
    """Conv layers ``weights[l]`` of shape ``(c_out, c_in, kernel)`` then a 1x1 head.

    The last entry of ``weights`` is the head with shape ``(1, c_hidden, 1)``;
    the activation is applied after every layer except the head.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ArgumentError(f"activation must be one of {ACTIVATIONS}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ArgumentError("weights and biases must be non-empty and paired")
        c = self.weights[0].shape[1]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 3 or w.shape[1] != c or w.shape[2] % 2 == 0 or b.shape != (w.shape[0],):
                raise ArgumentError(f"inconsistent layer shapes {w.shape} / {b.shape}")
            c = w.shape[0]
        if c != 1:
            raise ArgumentError("final layer must produce one channel")

    @property
    def in_channels(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        """Flat parameter list in a fixed order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays: list[np.ndarray], activation: str = "tanh") -> "ExtractorParams":
        return cls(list(arrays[0::2]), list(arrays[1::2]), activation)

    def copy(self) -> "ExtractorParams":
        return ExtractorParams.from_arrays([a.copy() for a in self.arrays()], self.activation)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_extractor(
    rng: np.random.Generator,
    half_width: int = 2,
    hidden: int = 16,
    n_layers: int = 3,
    kernel: int = 15,
    activation: str = "tanh",
) -> ExtractorParams:
    """Glorot-uniform weights, zero biases."""
    c_in = 2 * (2 * half_width + 1)
    weights, biases = [], []
    shapes = [(hidden, c_in, kernel)] + [(hidden, hidden, kernel)] * (n_layers - 1) + [(1, hidden, 1)]
    if n_layers == 0:
        shapes = [(1, c_in, kernel)]
    for c_out, c, k in shapes:
        lim = math.sqrt(6.0 / (c * k + c_out * k))
        weights.append(rng.uniform(-lim, lim, size=(c_out, c, k)))
        biases.append(np.zeros(c_out))
    return ExtractorParams(weights, biases, activation)


REFERENCE_LAG_S = 0.05


def reference_window(data: np.ndarray, rate_hz: float, lag_s: float = REFERENCE_LAG_S) -> np.ndarray:
    """Multiply every column by the conjugate of the centre column ``lag`` chirps earlier.

    Static phase offsets cancel and the imaginary part of the centre column
    becomes ``sin`` of the phase advance over the lag, which is linear in chest
    velocity. No unwrapping is involved, so there is no low-SNR threshold.
    """
    lag = max(1, int(round(lag_s * rate_hz)))
    centre = data[:, data.shape[1] // 2]
    ref = np.concatenate([np.repeat(centre[:1], min(lag, len(centre))), centre[:-lag]])
    return data * np.conj(ref)[:, None]


def window_features(w) -> np.ndarray:
    """``(2*width, N)`` real/imag channels of the referenced window, unit RMS magnitude.

    A bare ``N x width`` array is taken to be sampled at 120 chirps/s.
    """
    if isinstance(w, np.ndarray):
        data, rate = w, 120.0
    else:
        data, rate = w.data, w.chirp_rate_hz
    data = reference_window(data, rate)
    scale = np.sqrt(np.mean(data.real**2 + data.imag**2))
    if scale > 0:
        data = data / scale
    return np.ascontiguousarray(np.concatenate([data.real.T, data.imag.T], axis=0))


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else z


def _conv(h: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded cross-correlation; returns ``(z, patches)`` with tap-major patch rows."""
    c_out, c_in, k = w.shape
    n = h.shape[1]
    pad = k // 2
    hp = np.pad(h, ((0, 0), (pad, pad))) if pad else h
    patches = np.concatenate([hp[:, j : j + n] for j in range(k)], axis=0)
    w2 = w.transpose(0, 2, 1).reshape(c_out, k * c_in)
    return w2 @ patches + b[:, None], patches


def _forward(params: ExtractorParams, x: np.ndarray):
    if x.ndim != 2 or x.shape[0] != params.in_channels:
        raise ArgumentError(
            f"input has {x.shape[0] if x.ndim == 2 else x.shape} channels, "
            f"extractor expects {params.in_channels}"
        )
    cache = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z, patches = _conv(h, w, b)
        h = z if i == last else _act(z, params.activation)
        cache.append((patches, h))
    return h[0], cache


def _backward(params: ExtractorParams, cache, upstream: np.ndarray) -> list[np.ndarray]:
    grads: list[np.ndarray] = []
    g = np.asarray(upstream, dtype=np.float64)[None, :]
    last = len(params.weights) - 1
    for i in range(last, -1, -1):
        w = params.weights[i]
        c_out, c_in, k = w.shape
        patches, h = cache[i]
        dz = g if i == last else (g * (1.0 - h * h) if params.activation == "tanh" else g)
        n = dz.shape[1]
        gw = (dz @ patches.T).reshape(c_out, k, c_in).transpose(0, 2, 1)
        grads = [np.ascontiguousarray(gw), dz.sum(axis=1)] + grads
        if i == 0:
            break
        dpatches = w.transpose(0, 2, 1).reshape(c_out, k * c_in).T @ dz
        pad = k // 2
        dhp = np.zeros((c_in, n + 2 * pad))
        for j in range(k):
            dhp[:, j : j + n] += dpatches[j * c_in : (j + 1) * c_in]
        g = dhp[:, pad : pad + n]
    return grads


def forward_array(params: ExtractorParams, x: np.ndarray) -> np.ndarray:
    return _forward(params, x)[0]


def forward(params: ExtractorParams, w) -> TimeSeries:
    return TimeSeries(forward_array(params, window_features(w)), w.chirp_rate_hz)


def backward(params: ExtractorParams, w, upstream) -> list[np.ndarray]:
    """Gradient of ``sum(upstream * forward(params, w))`` in :meth:`ExtractorParams.arrays` order."""
    x = np.asarray(w, dtype=np.float64) if isinstance(w, np.ndarray) else window_features(w)
    _, cache = _forward(params, x)
    up = upstream.samples if isinstance(upstream, TimeSeries) else upstream
    return _backward(params, cache, up)


def forward_backward_fn(params: ExtractorParams, x: np.ndarray):
    """Forward once and return ``(output, vjp)``; ``vjp(g)`` gives parameter gradients."""
    out, cache = _forward(params, x)
    return out, lambda g: _backward(params, cache, g)


@dataclass
class OptimizerState:
    lr: float = 1e-4
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adamw_step(state: OptimizerState, params: ExtractorParams, grads: list[np.ndarray]) -> ExtractorParams:
    """In-place decoupled-weight-decay Adam update; returns ``params``.

    Non-finite gradients raise :class:`TrainingError` and leave both the
    parameters and the optimizer state untouched.
    """
    arrays = params.arrays()
    if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
        raise ArgumentError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(g)) for g in grads):
        log.warning("rejecting AdamW step %d: non-finite gradient", state.step + 1)
        raise TrainingError("non-finite gradient")
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    b1, b2 = state.betas
    state.step += 1
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        a -= state.lr * ((m / c1) / (np.sqrt(v / c2) + state.eps) + state.weight_decay * a)
    return params
