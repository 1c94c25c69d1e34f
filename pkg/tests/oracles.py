"""Independent reference implementations the test suite checks against.

Everything here is written straight-line in plain Python (lists, scalar
loops, math.exp) on purpose: these functions share no code with the
package, so agreement between the two is meaningful evidence.
"""

import math


def alpha_kernel(tau, dt, length):
    return [(k * dt / tau) * math.exp(1.0 - k * dt / tau) for k in range(length)]


def conv_reference(signal, kernel):
    """Double-loop causal convolution; signal is a list of rows."""
    T = len(signal[0])
    K = len(kernel)
    out = []
    for row in signal:
        out_row = []
        for t in range(T):
            acc = 0.0
            for k in range(0, min(t, K - 1) + 1):
                acc += kernel[k] * row[t - k]
            out_row.append(acc)
        out.append(out_row)
    return out


def srm_layer_reference(W, b, a, nu, theta_u):
    """Scalar simulation of one layer from its response signal.

    Returns (u, s) as lists of rows. The refractory sum ranges over the
    neuron's own past spikes only; nu[0] is zero so the current step
    never feeds back into itself.
    """
    n_out = len(W)
    T = len(a[0])
    K = len(nu)
    u = [[0.0] * T for _ in range(n_out)]
    s = [[0.0] * T for _ in range(n_out)]
    for i in range(n_out):
        spike_times = []
        for t in range(T):
            drive = b[i]
            for j in range(len(a)):
                drive += W[i][j] * a[j][t]
            refr = 0.0
            for tp in spike_times:
                if 0 < t - tp < K:
                    refr += nu[t - tp]
            u[i][t] = drive + refr
            if u[i][t] >= theta_u:
                s[i][t] = 1.0
                spike_times.append(t)
    return u, s


def delay_shift_reference(s, d_steps):
    """Integer right-shift of each row, zero-filled, horizon-truncated."""
    T = len(s[0])
    out = [[0.0] * T for _ in s]
    for i, row in enumerate(s):
        k = d_steps[i]
        for t in range(T):
            if t + k < T:
                out[i][t + k] = row[t]
    return out


def network_forward_reference(layers, x, tau_s, tau_r, theta_u, dt, kernel_len):
    """Whole-stack scalar forward. ``layers`` holds dicts with keys
    W (list of rows), b, d_steps (integer delays in steps) and has_delay.
    Returns (list of per-layer (u, s), class counts)."""
    eps = alpha_kernel(tau_s, dt, kernel_len)
    nu = [-2.0 * theta_u * v for v in alpha_kernel(tau_r, dt, kernel_len)]
    feed = x
    recorded = []
    for layer in layers:
        a = conv_reference(feed, eps)
        u, s = srm_layer_reference(layer["W"], layer["b"], a, nu, theta_u)
        recorded.append((u, s))
        if layer["has_delay"]:
            feed = delay_shift_reference(s, layer["d_steps"])
        else:
            feed = s
    counts = [sum(row) for row in recorded[-1][1]]
    return recorded, counts


def adaptive_cap_reference(initial_cap, m, alpha_theta, total, histogram_fn,
                           train_round_fn, hard_ceiling, include_anchor_minus_m=False):
    """Straight-line transcription of the adaptive cap loop for ONE layer.

    ``histogram_fn()`` returns the current list of bin counts;
    ``train_round_fn(cap)`` advances the mock training by Tsteps under
    ``cap``. Returns the sequence of caps after each grow decision.
    Raises RuntimeError at the hard ceiling.
    """
    theta_d = initial_cap
    caps = []
    while True:
        counts = histogram_fn()
        occupied = [i for i, c in enumerate(counts) if c]
        n = occupied[-1] if occupied else 0
        lo = max(0, n - m + (0 if include_anchor_minus_m else 1))
        alpha = sum(counts[lo : n + 1]) / total
        if alpha <= alpha_theta:
            return theta_d, caps
        theta_d += 1
        caps.append(theta_d)
        if theta_d > hard_ceiling:
            raise RuntimeError("hard ceiling")
        train_round_fn(theta_d)
