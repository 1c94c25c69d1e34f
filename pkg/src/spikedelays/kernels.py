"""Post-synaptic response and refractory kernels, and causal convolution.

Both kernels are alpha functions sampled on the simulation grid:

    response(t)   =  (t / tau_s) * exp(1 - t / tau_s)          for t >= 0
    refractory(t) = -2 * theta_u * (t / tau_r) * exp(1 - t / tau_r)

The response kernel peaks at exactly 1 when t = tau_s; the refractory
kernel bottoms out at -2*theta_u when t = tau_r. Both are zero at t = 0,
so a spike never interacts with the potential of its own time step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Kernel tail is dropped once it falls below this fraction of the peak.
TRUNCATION_EPS = 1e-3
# Hard cap on kernel length, in multiples of the slower time constant.
TRUNCATION_MAX_TAUS = 8.0


def _alpha_truncation(tau: float, dt_ms: float) -> int:
    """Samples needed before (t/tau)*exp(1-t/tau) decays below TRUNCATION_EPS."""
    cap = max(1, math.ceil(TRUNCATION_MAX_TAUS * tau / dt_ms))
    k = math.ceil(tau / dt_ms) + 1  # start past the peak
    while k < cap:
        t = k * dt_ms / tau
        if t * math.exp(1.0 - t) < TRUNCATION_EPS:
            return k
        k += 1
    return cap


def default_truncation(tau_s: float, tau_r: float, dt_ms: float) -> int:
    """Kernel length covering both kernels' tails at the default cutoff."""
    return max(_alpha_truncation(tau_s, dt_ms), _alpha_truncation(tau_r, dt_ms))


@dataclass(frozen=True)
class KernelConfig:
    """Neuron time constants, firing threshold and simulation grid.

    ``truncation`` is the sampled kernel length in steps; when left at 0 it
    is derived from the time constants via :func:`default_truncation`.
    """

    tau_s: float = 1.0
    tau_r: float = 1.0
    theta_u: float = 10.0
    dt_ms: float = 1.0
    truncation: int = field(default=0)

    def __post_init__(self):
        if self.tau_s <= 0 or self.tau_r <= 0:
            raise ValueError("time constants must be positive")
        if self.theta_u <= 0:
            raise ValueError("theta_u must be positive")
        if self.dt_ms <= 0:
            raise ValueError("dt_ms must be positive")
        if self.truncation == 0:
            object.__setattr__(
                self, "truncation",
                default_truncation(self.tau_s, self.tau_r, self.dt_ms),
            )
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")


def response_kernel(cfg: KernelConfig) -> np.ndarray:
    """Sampled response kernel, shape (truncation,). response_kernel[0] == 0."""
    t = np.arange(cfg.truncation, dtype=np.float64) * cfg.dt_ms / cfg.tau_s
    return t * np.exp(1.0 - t)


def refractory_kernel(cfg: KernelConfig) -> np.ndarray:
    """Sampled refractory kernel, shape (truncation,). Non-positive everywhere."""
    t = np.arange(cfg.truncation, dtype=np.float64) * cfg.dt_ms / cfg.tau_r
    return -2.0 * cfg.theta_u * t * np.exp(1.0 - t)


def causal_conv(signal: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Causal 1-D convolution of each row of ``signal`` with ``kernel``.

    out[..., t] = sum_{k=0}^{min(t, K-1)} kernel[k] * signal[..., t-k]

    ``signal`` may be (C, T) or any higher-rank array whose last axis is
    time; the output has the same shape. Output at time t never depends
    on signal values after t.
    """
    signal = np.asarray(signal)
    kernel = np.asarray(kernel)
    if kernel.ndim != 1 or kernel.size < 1:
        raise ValueError("kernel must be a non-empty 1-D array")
    T = signal.shape[-1]
    rows = signal.reshape(-1, T)
    out = np.empty_like(rows, dtype=np.result_type(rows.dtype, kernel.dtype))
    for i in range(rows.shape[0]):
        out[i] = np.convolve(rows[i], kernel)[:T]
    return out.reshape(signal.shape)
