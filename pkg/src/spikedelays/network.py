"""Dense spike-response layers with per-neuron axonal delays.

A layer turns incoming spike counts into a response signal (causal
convolution with the response kernel), drives membrane potentials through
its weight matrix, thresholds them into outgoing spikes while its own past
spikes feed back through the refractory kernel, and finally shifts each
neuron's spike train right by that neuron's axonal delay.

Two forward flavours exist:

* spiking (default): hard threshold ``u >= theta_u``, refractory feedback
  active, delays rounded to whole steps. This is the trained model.
* relaxed: the threshold becomes a sigmoid of configurable width, the
  refractory feedback is dropped, and delays interpolate linearly between
  adjacent steps. The relaxed network is differentiable everywhere, which
  is what makes finite-difference verification of the backward pass
  possible; it is not used for classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .events import SpikeTensor
from .kernels import KernelConfig, causal_conv, refractory_kernel, response_kernel


@dataclass
class LayerParams:
    """Trainable state of one layer: weights, biases and axonal delays (ms).

    ``d`` is kept even when ``has_delay`` is off so shapes stay uniform,
    but it is then excluded from the trainable set and never applied.
    """

    W: np.ndarray  # (N_out, N_in)
    b: np.ndarray  # (N_out,)
    d: np.ndarray  # (N_out,), >= 0
    has_delay: bool = False

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    @property
    def n_in(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture: sizes N_0..N_L, per-layer delay flags, neuron kernels."""

    layer_sizes: tuple[int, ...]
    delay_on_layer: tuple[bool, ...]
    kernel: KernelConfig = field(default_factory=KernelConfig)
    initial_delay_cap: float = 64.0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        object.__setattr__(self, "delay_on_layer", tuple(bool(f) for f in self.delay_on_layer))
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if len(self.delay_on_layer) != self.num_layers:
            raise ValueError("delay_on_layer must have one flag per layer")
        if self.delay_on_layer[-1]:
            raise ValueError("the output layer does not carry axonal delays")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.initial_delay_cap < 0:
            raise ValueError("initial_delay_cap must be >= 0")

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def delay_layers(self) -> tuple[int, ...]:
        """Indices of layers whose neurons carry trainable delays."""
        return tuple(l for l, on in enumerate(self.delay_on_layer) if on)


@dataclass
class Network:
    config: NetworkConfig
    layers: list[LayerParams]


@dataclass
class ForwardTrace:
    """Everything the backward pass needs from one forward run.

    All arrays are batched (B, N, T). ``a[l]`` is the response signal the
    layer consumed, i.e. the response kernel convolved with the (delayed)
    spikes of the previous stage.
    """

    x: np.ndarray                 # network input counts (B, C, T)
    a: list[np.ndarray]           # per layer, (B, N_in, T)
    u: list[np.ndarray]           # per layer, (B, N_out, T)
    s: list[np.ndarray]           # per layer, (B, N_out, T)
    s_d: list[np.ndarray]         # per layer, (B, N_out, T); == s when no delay
    relaxed_width: float | None = None
    interpolate_delays: bool = False
    retained: bool = True


def init_network(
    cfg: NetworkConfig,
    seed: int = 0,
    weight_scale: float = 4.0,
    dtype=np.float32,
) -> Network:
    """Fresh network: W ~ U[-w0, w0] with w0 = weight_scale*theta_u/sqrt(N_in),
    biases and delays zero. Threshold-proportional w0 keeps the initial
    firing rate away from zero regardless of theta_u."""
    rng = np.random.default_rng(seed)
    layers = []
    for l in range(cfg.num_layers):
        n_in, n_out = cfg.layer_sizes[l], cfg.layer_sizes[l + 1]
        w0 = weight_scale * cfg.kernel.theta_u / np.sqrt(n_in)
        layers.append(
            LayerParams(
                W=rng.uniform(-w0, w0, size=(n_out, n_in)).astype(dtype),
                b=np.zeros(n_out, dtype=dtype),
                d=np.zeros(n_out, dtype=dtype),
                has_delay=cfg.delay_on_layer[l],
            )
        )
    return Network(config=cfg, layers=layers)


def clip_delays(d: np.ndarray, theta_d: float) -> np.ndarray:
    """Clamp delays into [0, theta_d]: d <- max(0, min(d, theta_d))."""
    return np.maximum(0.0, np.minimum(d, theta_d)).astype(d.dtype, copy=False)


def _shift_rows(s: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Shift each neuron row right by its integer step count, zero-filling."""
    out = np.zeros_like(s)
    T = s.shape[-1]
    for k in np.unique(steps):
        idx = np.nonzero(steps == k)[0]
        if k == 0:
            out[..., idx, :] = s[..., idx, :]
        elif k < T:
            out[..., idx, k:] = s[..., idx, : T - k]
        # k >= T shifts everything past the horizon; row stays zero
    return out


def axonal_delay_forward(
    s: np.ndarray, d: np.ndarray, dt_ms: float, interpolate: bool = False
) -> np.ndarray:
    """Delay neuron i's spike train by d[i] ms (rows are axis -2).

    Spiking mode rounds d/dt to the nearest step (ties to even); spikes
    shifted at or past the horizon are dropped. With ``interpolate`` the
    fractional part splits each spike linearly across the two neighbouring
    steps, making the output continuous in d.
    """
    d = np.asarray(d)
    if np.any(d < 0):
        raise ValueError("delays must be non-negative")
    if not interpolate:
        steps = np.round(np.asarray(d, dtype=np.float64) / dt_ms).astype(np.int64)
        return _shift_rows(s, steps)
    frac_steps = np.asarray(d, dtype=np.float64) / dt_ms
    k0 = np.floor(frac_steps).astype(np.int64)
    frac = (frac_steps - k0).astype(s.dtype)
    lo = _shift_rows(s, k0)
    hi = _shift_rows(s, k0 + 1)
    w = frac[..., :, None]
    return (1 - w) * lo + w * hi


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _spiking_potentials(drive: np.ndarray, nu: np.ndarray, theta_u: float):
    """Roll potentials forward in time with refractory feedback.

    nu[0] == 0, so the potential at step t only sees spikes from steps
    < t and the threshold test is well defined step by step.
    """
    B, N, T = drive.shape
    K = nu.shape[0]
    u = np.empty_like(drive)
    s = np.zeros_like(drive)
    refr = np.zeros_like(drive)
    nu = nu.astype(drive.dtype)
    for t in range(T):
        u[:, :, t] = drive[:, :, t] + refr[:, :, t]
        fired = u[:, :, t] >= theta_u
        if fired.any():
            s[:, :, t] = fired
            kmax = min(K - 1, T - 1 - t)
            if kmax >= 1:
                refr[:, :, t + 1 : t + 1 + kmax] += (
                    fired[:, :, None] * nu[1 : 1 + kmax]
                )
    return u, s


def srm_forward(
    params: LayerParams,
    input_spikes: np.ndarray,
    cfg: KernelConfig,
    relaxed_width: float | None = None,
):
    """One layer's forward pass from raw input spikes: (u, s).

    ``input_spikes`` is (N_in, T) or (B, N_in, T); outputs match. The
    input is first convolved with the response kernel, so this is the
    whole-layer map, not just the potential update.
    """
    x = np.asarray(input_spikes)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != params.n_in:
        raise ShapeMismatch(
            f"expected input channels {params.n_in}, got shape {x.shape}"
        )
    a = causal_conv(x.astype(params.W.dtype, copy=False), response_kernel(cfg).astype(params.W.dtype))
    u, s = _layer_from_response(params, a, cfg, relaxed_width)
    if squeeze:
        return u[0], s[0]
    return u, s


def _layer_from_response(
    params: LayerParams,
    a: np.ndarray,
    cfg: KernelConfig,
    relaxed_width: float | None,
):
    if a.shape[1] != params.n_in:
        raise ShapeMismatch(
            f"layer expects {params.n_in} input lines, response has {a.shape[1]}"
        )
    drive = np.matmul(params.W[None, :, :], a) + params.b[None, :, None]
    if relaxed_width is None:
        nu = refractory_kernel(cfg)
        return _spiking_potentials(drive, nu, cfg.theta_u)
    u = drive
    s = _sigmoid((u - cfg.theta_u) / relaxed_width)
    return u, s


def network_forward(
    net: Network,
    input_spikes,
    retain: bool = True,
    relaxed_width: float | None = None,
    interpolate_delays: bool = False,
):
    """Run the whole stack; returns (ForwardTrace, per-class spike counts).

    ``input_spikes`` is a SpikeTensor, an (C, T) matrix or a batched
    (B, C, T) array. Counts come back as (classes,) or (B, classes) to
    match. Hidden layers flagged with delays have their spike trains
    shifted before feeding the next layer; the output layer's spikes are
    summed over time per class.
    """
    if isinstance(input_spikes, SpikeTensor):
        x = input_spikes.values
    else:
        x = np.asarray(input_spikes)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    cfg = net.config.kernel
    if x.ndim != 3 or x.shape[1] != net.config.layer_sizes[0]:
        raise ShapeMismatch(
            f"expected {net.config.layer_sizes[0]} input channels, got shape {x.shape}"
        )
    dtype = net.layers[0].W.dtype
    eps = response_kernel(cfg).astype(dtype)
    feed = x.astype(dtype, copy=False)
    a_list, u_list, s_list, sd_list = [], [], [], []
    for params in net.layers:
        a = causal_conv(feed, eps)
        u, s = _layer_from_response(params, a, cfg, relaxed_width)
        if params.has_delay:
            s_d = axonal_delay_forward(
                s, params.d, cfg.dt_ms, interpolate=interpolate_delays
            )
        else:
            s_d = s
        a_list.append(a)
        u_list.append(u)
        s_list.append(s)
        sd_list.append(s_d)
        feed = s_d
    counts = s_list[-1].sum(axis=-1)
    trace = ForwardTrace(
        x=x,
        a=a_list if retain else [],
        u=u_list if retain else [],
        s=s_list if retain else [],
        s_d=sd_list if retain else [],
        relaxed_width=relaxed_width,
        interpolate_delays=interpolate_delays,
        retained=retain,
    )
    if squeeze:
        return trace, counts[0]
    return trace, counts


def count_params(cfg: NetworkConfig) -> int:
    """Trainable parameter count: weights + biases + per-neuron delays."""
    total = 0
    for l in range(cfg.num_layers):
        n_in, n_out = cfg.layer_sizes[l], cfg.layer_sizes[l + 1]
        total += n_out * n_in + n_out
        if cfg.delay_on_layer[l]:
            total += n_out
    return total
