"""Adaptive per-layer delay caps driven by the live delay distribution.

After pre-training, each delay layer is inspected through a histogram of
its rounded delays. While the fraction of neurons sitting in the top
``m`` occupied bins exceeds the cap fraction, the layer's cap is raised
by one and training resumes for ``Tsteps`` updates before the next
decision; once the fraction falls to or below the cap fraction the cap
freezes. Layers decide independently but train together.

The anchor bin for each decision is re-derived from the live histogram
(the highest occupied bin), so the window follows wherever the delay
mass actually is. Clipping guarantees that bin never exceeds the cap.
A hard ceiling turns the degenerate never-stopping case (e.g. frozen
delays piled at zero) into an explicit NonConvergence error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence
from .network import Network

PHASE_PRETRAINING = "pretraining"
PHASE_GROWING = "growing"
PHASE_STOPPED = "stopped"

DECISION_GROW = "grow"
DECISION_STOP = "stop"


@dataclass
class DelayHistogram:
    """Neuron counts per integer delay bin (bin = delay rounded half-even)."""

    counts: np.ndarray
    total: int

    def max_occupied(self) -> int:
        """Index of the highest non-empty bin (0 for an all-empty layer)."""
        nz = np.nonzero(self.counts)[0]
        return int(nz[-1]) if nz.size else 0


@dataclass(frozen=True)
class SchedulerConfig:
    m: int = 2                 # sliding-window size, in delay bins
    alpha_theta: float = 0.05  # cap fraction the window must exceed to grow
    Tsteps: int = 150          # training steps between decisions
    pretrain_epochs: int = 40
    initial_cap: float = 64.0
    # Fidelity switch: also count bin n-m, widening the window to m+1 bins.
    window_includes_anchor_minus_m: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("window size m must be >= 1")
        if not 0.0 < self.alpha_theta <= 1.0:
            raise ValueError("alpha_theta must be in (0, 1]")
        if self.Tsteps < 1:
            raise ValueError("Tsteps must be >= 1")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")
        if self.initial_cap < 0:
            raise ValueError("initial_cap must be >= 0")


@dataclass
class SchedulerState:
    theta_d: float
    n: int = 0
    phase: str = PHASE_PRETRAINING


@dataclass
class ScheduleDecision:
    layer: int
    alpha: float
    theta_d: float
    decision: str


@dataclass
class ScheduleResult:
    caps: dict[int, float]            # layer index -> final theta_d
    delays: dict[int, np.ndarray]     # layer index -> delay vector snapshot
    decisions: list[ScheduleDecision] = field(default_factory=list)
    rounds: int = 0


def delay_histogram(d: np.ndarray) -> DelayHistogram:
    """Histogram of delays over integer bins; ties round to even."""
    d = np.asarray(d, dtype=np.float64)
    if d.size and d.min() < 0:
        raise ValueError("delays must be non-negative")
    bins = np.round(d).astype(np.int64)
    counts = np.bincount(bins) if bins.size else np.zeros(1, dtype=np.int64)
    return DelayHistogram(counts=counts.astype(np.int64), total=int(d.size))


def window_fraction(
    hist: DelayHistogram, n: int, m: int, include_anchor_minus_m: bool = False
) -> float:
    """Fraction of neurons in the window of m bins ending at anchor n.

    Bins outside the histogram count as empty; the window is clipped at
    bin 0. With ``include_anchor_minus_m`` the window widens to m+1 bins.
    """
    if n < 0:
        raise ValueError("anchor must be >= 0")
    if m < 1:
        raise ValueError("window size must be >= 1")
    if hist.total == 0:
        return 0.0
    lo = max(0, n - m + (0 if include_anchor_minus_m else 1))
    hi = min(n, len(hist.counts) - 1)
    if hi < lo:
        return 0.0
    return float(hist.counts[lo : hi + 1].sum()) / float(hist.total)


def scheduler_decide(
    state: SchedulerState, hist: DelayHistogram, cfg: SchedulerConfig
) -> ScheduleDecision:
    """One grow-or-stop decision for a layer in the growing phase.

    Growing bumps the cap and the anchor by one; stopping freezes the
    cap and ends the layer's schedule.
    """
    if state.phase != PHASE_GROWING:
        raise ValueError(f"cannot decide in phase {state.phase!r}")
    alpha = window_fraction(
        hist, state.n, cfg.m, cfg.window_includes_anchor_minus_m
    )
    if alpha > cfg.alpha_theta:
        state.theta_d += 1.0
        state.n += 1
        return ScheduleDecision(-1, alpha, state.theta_d, DECISION_GROW)
    state.phase = PHASE_STOPPED
    return ScheduleDecision(-1, alpha, state.theta_d, DECISION_STOP)


def init_states(net: Network, cfg_by_layer: dict[int, SchedulerConfig]) -> dict[int, SchedulerState]:
    return {
        l: SchedulerState(theta_d=float(cfg_by_layer[l].initial_cap))
        for l in net.config.delay_layers
    }


def _as_cfg_map(net: Network, cfg) -> dict[int, SchedulerConfig]:
    if isinstance(cfg, SchedulerConfig):
        return {l: cfg for l in net.config.delay_layers}
    return dict(cfg)


def run_schedule(
    net: Network,
    train_fn,
    cfg,
    hard_ceiling: float,
    states: dict[int, SchedulerState] | None = None,
    pretrain_fn=None,
    on_decision=None,
) -> ScheduleResult:
    """Drive the full two-stage schedule over all delay layers of ``net``.

    ``cfg`` is one SchedulerConfig for every layer or a mapping
    {layer index -> SchedulerConfig}. ``pretrain_fn(caps)`` runs the
    pre-training stage under the given caps; ``train_fn(caps)`` runs
    Tsteps of training. Either may mutate the network's delays. Raises
    NonConvergence once any cap exceeds ``hard_ceiling``.
    """
    cfg_map = _as_cfg_map(net, cfg)
    if not cfg_map:
        raise ValueError("network has no delay layers to schedule")
    if states is None:
        states = init_states(net, cfg_map)

    caps = {l: states[l].theta_d for l in states}
    if any(st.phase == PHASE_PRETRAINING for st in states.values()):
        if pretrain_fn is not None:
            pretrain_fn(caps)
        for l, st in states.items():
            st.n = delay_histogram(net.layers[l].d).max_occupied()
            st.phase = PHASE_GROWING

    result = ScheduleResult(caps={}, delays={})
    while True:
        grew = False
        for l, st in states.items():
            if st.phase != PHASE_GROWING:
                continue
            hist = delay_histogram(net.layers[l].d)
            # anchor follows the live mass; clipping keeps it <= theta_d
            st.n = hist.max_occupied()
            decision = scheduler_decide(st, hist, cfg_map[l])
            decision.layer = l
            result.decisions.append(decision)
            if on_decision is not None:
                on_decision(decision)
            if decision.decision == DECISION_GROW:
                grew = True
        caps = {l: states[l].theta_d for l in states}
        if not grew:
            break
        if any(st.theta_d > hard_ceiling for st in states.values()):
            raise NonConvergence(
                f"delay cap exceeded hard ceiling {hard_ceiling}; "
                "delay mass never cleared the window"
            )
        result.rounds += 1
        train_fn(caps)

    result.caps = {l: st.theta_d for l, st in states.items()}
    result.delays = {l: net.layers[l].d.copy() for l in states}
    return result
