"""Backpropagation through time, loss functions and Adam updates.

The backward pass mirrors the layered forward exactly, with two
deliberate approximations in spiking mode:

* the hard threshold backpropagates through an exponential surrogate
  centred on the firing threshold;
* the refractory feedback is treated as a constant (no gradient flows
  through a neuron's own spike history).

Delay gradients use the temporal derivative of the delayed response as
the downstream layer consumed it: pushing a delay up by ``h`` shifts that
response right by ``h``, so d(loss)/d(delay) = -sum_t g(t) * da/dt.
In relaxed mode (sigmoid spikes, interpolated delays, no refractory) the
same code path is the exact gradient of the forward for weights and
biases, which is what the finite-difference suite verifies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TraceMissing
from .kernels import response_kernel
from .network import ForwardTrace, Network, clip_delays, network_forward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class SurrogateConfig:
    """Backward stand-in for the spike threshold.

    ``width`` is in membrane-potential units; ``mode`` selects the hard
    spiking forward (surrogate backward) or the relaxed differentiable
    forward used by gradient verification.
    """

    width: float = 5.0
    mode: str = "spiking"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("surrogate width must be positive")
        if self.mode not in ("spiking", "relaxed"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class LossConfig:
    """Spike-count objective. count_mse pulls the true class toward
    ``target_true`` output spikes and every other class toward
    ``target_false``; count_softmax_ce is cross-entropy on the counts."""

    kind: str = "count_mse"
    target_true: float = 30.0
    target_false: float = 5.0

    def __post_init__(self):
        if self.kind not in ("count_mse", "count_softmax_ce"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not self.target_true > self.target_false >= 0:
            raise ValueError("need target_true > target_false >= 0")


@dataclass
class LayerGrads:
    dW: np.ndarray
    db: np.ndarray
    dd: np.ndarray | None  # None when the layer carries no delays


@dataclass
class Gradients:
    layers: list[LayerGrads]

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            [
                LayerGrads(
                    g.dW * factor,
                    g.db * factor,
                    None if g.dd is None else g.dd * factor,
                )
                for g in self.layers
            ]
        )


def surrogate_derivative(u, cfg: SurrogateConfig, theta_u: float):
    """Exponential spike-escape derivative: peaks at 1/(2*width) on the
    threshold and decays symmetrically on both sides."""
    u = np.asarray(u)
    return np.exp(-np.abs(u - theta_u) / cfg.width) / (2.0 * cfg.width)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(counts: np.ndarray, label: int, cfg: LossConfig):
    """Per-sample loss and its exact derivative w.r.t. the count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if not 0 <= label < counts.shape[-1]:
        raise ValueError(f"label {label} out of range")
    if cfg.kind == "count_mse":
        target = np.full_like(counts, cfg.target_false)
        target[label] = cfg.target_true
        diff = counts - target
        return float(np.sum(diff * diff)), 2.0 * diff
    p = _softmax(counts)
    grad = p.copy()
    grad[label] -= 1.0
    return float(-np.log(p[label])), grad


def _causal_corr(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of causal_conv: out[..., t] = sum_k kernel[k] * g[..., t+k]."""
    T = g.shape[-1]
    K = kernel.shape[0]
    rows = g.reshape(-1, T)
    out = np.empty_like(rows)
    flipped = kernel[::-1]
    for i in range(rows.shape[0]):
        out[i] = np.convolve(rows[i], flipped)[K - 1 : K - 1 + T]
    return out.reshape(g.shape)


def _shift_rows_left(g: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Adjoint of the right-shift: row i moves left by steps[i]."""
    out = np.zeros_like(g)
    T = g.shape[-1]
    for k in np.unique(steps):
        idx = np.nonzero(steps == k)[0]
        if k == 0:
            out[..., idx, :] = g[..., idx, :]
        elif k < T:
            out[..., idx, : T - k] = g[..., idx, k:]
    return out


def _delay_adjoint(g: np.ndarray, d: np.ndarray, dt_ms: float, interpolate: bool):
    if not interpolate:
        steps = np.round(np.asarray(d, dtype=np.float64) / dt_ms).astype(np.int64)
        return _shift_rows_left(g, steps)
    frac_steps = np.asarray(d, dtype=np.float64) / dt_ms
    k0 = np.floor(frac_steps).astype(np.int64)
    frac = (frac_steps - k0).astype(g.dtype)
    w = frac[..., :, None]
    return (1 - w) * _shift_rows_left(g, k0) + w * _shift_rows_left(g, k0 + 1)


def backward(
    trace: ForwardTrace,
    net: Network,
    dloss_dcounts: np.ndarray,
    cfg: SurrogateConfig,
) -> Gradients:
    """Reverse sweep over layers; returns gradients summed over the batch.

    ``dloss_dcounts`` is (classes,) or (B, classes) matching the traced
    batch. Raises TraceMissing when the forward ran with retain=False.
    """
    if not trace.retained or not trace.u:
        raise TraceMissing("forward pass did not retain intermediate signals")
    if (cfg.mode == "relaxed") != (trace.relaxed_width is not None):
        raise ValueError("surrogate mode does not match how the trace was produced")

    g_counts = np.asarray(dloss_dcounts, dtype=np.float64)
    if g_counts.ndim == 1:
        g_counts = g_counts[None]
    B = trace.x.shape[0]
    n_classes = net.config.layer_sizes[-1]
    if g_counts.shape != (B, n_classes):
        raise ShapeMismatch(
            f"dloss_dcounts shape {g_counts.shape} != ({B}, {n_classes})"
        )

    kcfg = net.config.kernel
    eps = response_kernel(kcfg)
    L = net.config.num_layers
    grads: list[LayerGrads | None] = [None] * L
    pending_dd: dict[int, np.ndarray] = {}

    # output-layer counts are a plain sum over time
    gs = np.broadcast_to(g_counts[:, :, None], trace.s[-1].shape).astype(np.float64)

    for l in range(L - 1, -1, -1):
        params = net.layers[l]
        a = trace.a[l]
        if trace.relaxed_width is not None:
            s = trace.s[l]
            dsdu = s * (1.0 - s) / trace.relaxed_width
        else:
            dsdu = surrogate_derivative(trace.u[l], cfg, kcfg.theta_u)
        gu = gs * dsdu
        dW = np.einsum("bit,bjt->ij", gu, a.astype(np.float64, copy=False))
        db = gu.sum(axis=(0, 2))
        grads[l] = LayerGrads(dW=dW, db=db, dd=pending_dd.pop(l, None))

        if l == 0:
            break
        # sensitivity to this layer's consumed response, per input line
        ga = np.matmul(params.W.T[None, :, :].astype(np.float64), gu)
        prev = net.layers[l - 1]
        if prev.has_delay:
            # np.gradient: central differences inside, one-sided at the ends
            adot = np.gradient(a.astype(np.float64, copy=False), kcfg.dt_ms, axis=-1)
            pending_dd[l - 1] = -(ga * adot).sum(axis=(0, 2))
        g_sd = _causal_corr(ga, eps)
        if prev.has_delay:
            gs = _delay_adjoint(g_sd, prev.d, kcfg.dt_ms, trace.interpolate_delays)
        else:
            gs = g_sd

    assert all(g is not None for g in grads)
    return Gradients(layers=grads)  # type: ignore[arg-type]


def init_adam_state(net: Network) -> dict:
    """Zeroed first/second moment accumulators plus the step counter."""
    state = {"step": 0, "m": {}, "v": {}}
    for l, p in enumerate(net.layers):
        for name, arr in (("W", p.W), ("b", p.b), ("d", p.d)):
            if name == "d" and not p.has_delay:
                continue
            key = f"{l}.{name}"
            state["m"][key] = np.zeros_like(arr)
            state["v"][key] = np.zeros_like(arr)
    return state


def adam_step(
    net: Network,
    grads: Gradients,
    state: dict,
    lr: float = 0.1,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
    delay_lr: float | None = None,
    caps: dict[int, float] | None = None,
) -> Network:
    """One in-place Adam update on every trainable tensor.

    Delays use ``delay_lr`` when given (falling back to ``lr``) and are
    clipped into [0, theta_d] right after their update, using each delay
    layer's current cap from ``caps`` (layer index -> cap).
    """
    state["step"] += 1
    t = state["step"]
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    if delay_lr is None:
        delay_lr = lr
    for l, (p, g) in enumerate(zip(net.layers, grads.layers)):
        updates = [("W", p.W, g.dW, lr), ("b", p.b, g.db, lr)]
        if p.has_delay:
            if g.dd is None:
                raise ValueError(f"layer {l} has delays but no delay gradient")
            updates.append(("d", p.d, g.dd, delay_lr))
        for name, arr, grad, rate in updates:
            key = f"{l}.{name}"
            m = state["m"][key]
            v = state["v"][key]
            grad = grad.astype(arr.dtype, copy=False)
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            arr -= (rate * (m / bc1) / (np.sqrt(v / bc2) + eps)).astype(
                arr.dtype, copy=False
            )
        if p.has_delay:
            cap = None if caps is None else caps.get(l)
            if cap is not None:
                p.d[:] = clip_delays(p.d, cap)
            else:
                p.d[:] = np.maximum(p.d, 0.0)
    return net


def batch_loss_and_grad(counts: np.ndarray, labels: np.ndarray, cfg: LossConfig):
    """Mean loss over a batch plus d(mean loss)/d(counts), shape (B, classes)."""
    counts = np.atleast_2d(np.asarray(counts, dtype=np.float64))
    labels = np.atleast_1d(labels)
    B = counts.shape[0]
    grad = np.empty_like(counts)
    total = 0.0
    for i in range(B):
        loss_i, grad[i] = loss_and_grad(counts[i], int(labels[i]), cfg)
        total += loss_i
    return total / B, grad / B


def train_steps(
    net: Network,
    batches,
    n_steps: int,
    adam_state: dict,
    lr: float = 0.1,
    delay_lr: float | None = None,
    loss_cfg: LossConfig = LossConfig(),
    surrogate_cfg: SurrogateConfig = SurrogateConfig(),
    caps: dict[int, float] | None = None,
    on_step=None,
):
    """Run exactly ``n_steps`` minibatch updates, clipping after each one.

    ``batches`` is any iterator of (values[B,C,T], labels[B]). Returns
    (mean loss, mean accuracy) over the steps taken. ``on_step`` is called
    as on_step(step_index, loss, accuracy) after each update.
    """
    relaxed = surrogate_cfg.mode == "relaxed"
    loss_sum = 0.0
    acc_sum = 0.0
    for step in range(n_steps):
        values, labels = next(batches)
        trace, counts = network_forward(
            net,
            values,
            retain=True,
            relaxed_width=surrogate_cfg.width if relaxed else None,
            interpolate_delays=relaxed,
        )
        loss, dcounts = batch_loss_and_grad(counts, labels, loss_cfg)
        grads = backward(trace, net, dcounts, surrogate_cfg)
        adam_step(
            net, grads, adam_state, lr=lr, delay_lr=delay_lr, caps=caps
        )
        acc = float(np.mean(np.argmax(counts, axis=-1) == labels))
        loss_sum += loss
        acc_sum += acc
        if on_step is not None:
            on_step(step, loss, acc)
    if n_steps == 0:
        return 0.0, 0.0
    return loss_sum / n_steps, acc_sum / n_steps
