"""Desk-scale scenarios behind the acceptance suite.

Each builder returns a ready-to-run ScenarioSpec, so tests, the README and
ad-hoc exploration all exercise the same settings.
"""

from __future__ import annotations

from dataclasses import replace

from .analysis import backward_queue_delay, reverse_decay_factor
from .model import (
    CrossTraffic,
    Discipline,
    FlowConfig,
    LinkConfig,
    LinkSide,
    Protocol,
    RedConfig,
    Remedy,
    RemedyParams,
    ScenarioSpec,
)

ALPHA = 200.0
CAPACITY = 10000.0
SAMPLE = 0.05

# --- homogeneous equilibrium ----------------------------------------------

HOMOGENEOUS_PROPS = (0.04, 0.06, 0.08, 0.1)


def homogeneous(props=HOMOGENEOUS_PROPS, alpha: float = ALPHA, capacity: float = CAPACITY, duration: float = 60.0) -> ScenarioSpec:
    flows = tuple(FlowConfig(id=i, fwd_prop=p / 2, bwd_prop=p / 2, alpha=alpha) for i, p in enumerate(props))
    return ScenarioSpec(
        flows=flows,
        fwd_link=LinkConfig(capacity, 20000.0),
        duration=duration,
        step=min(0.002, min(props) / 10),
        sample_every=SAMPLE,
    )


# --- reverse-path congestion ----------------------------------------------

REVERSE_Q_F = 0.05
REVERSE_BWD_CAPACITY = 10000.0
# k = 0 means no propagation delay at all; the engine needs some, so the
# probed flow gets this much, small against q_f.
REVERSE_MIN_PROP = 0.004


def reverse_path(k: float, rho: float, remedy=None, ecn: bool = False, duration=None) -> ScenarioSpec:
    """Flow 1 sees a reverse queue worth a share ``rho`` of its RTT, with d = k*q_f.

    Flow 0 shares only the forward link; it fixes the forward queuing delay at
    q_f by holding alpha packets there at rate alpha/q_f. The forward capacity
    is sized so that the predicted equilibrium fills the link exactly. Cross
    traffic saturates the reverse link so its queue sits at its buffer, which
    is chosen to give the wanted q_b.
    """
    q_f = REVERSE_Q_F
    d = k * q_f if k > 0 else REVERSE_MIN_PROP
    q_b = backward_queue_delay(q_f, k, rho)
    c_f = ALPHA / q_f * (1.0 + reverse_decay_factor(k, rho))
    c_b = REVERSE_BWD_CAPACITY
    if ecn:
        bwd = LinkConfig(c_b, q_b * c_b, Discipline.RED, RedConfig(0.5 * q_b, 2.0 * q_b))
    else:
        bwd = LinkConfig(c_b, q_b * c_b)
    if duration is None:
        # Longer delays converge more slowly once the remedies undo the decay.
        duration = 40.0 if k == 0 else 120.0
    rem = frozenset() if remedy is None else frozenset({remedy})
    anchor = FlowConfig(id=0, fwd_prop=0.025, bwd_prop=0.025, alpha=ALPHA, reverse_bottleneck=False)
    probe = FlowConfig(id=1, fwd_prop=d / 2, bwd_prop=d / 2, alpha=ALPHA, remedies=rem)
    return ScenarioSpec(
        flows=(anchor, probe),
        fwd_link=LinkConfig(c_f, 1e6),
        bwd_link=bwd,
        cross_traffic=(CrossTraffic(LinkSide.BWD, 1.5 * c_b, on_time=1.0),),
        duration=duration,
        step=min(0.002, d / 10),
        sample_every=SAMPLE,
        measure_window=(0.75 * duration, duration),
    )


# --- persistent congestion ------------------------------------------------

def pause_newcomer(d: float, n: int = 8, arrival: float = 15.0, duration: float = 120.0) -> ScenarioSpec:
    """n flows start together; one more arrives later and pauses once settled."""
    flows = [FlowConfig(id=i, fwd_prop=d / 2, bwd_prop=d / 2, alpha=ALPHA) for i in range(n)]
    flows.append(
        FlowConfig(
            id=n,
            fwd_prop=d / 2,
            bwd_prop=d / 2,
            alpha=ALPHA,
            start_time=arrival,
            remedies=frozenset({Remedy.PC_PAUSE}),
        )
    )
    return ScenarioSpec(
        flows=tuple(flows),
        fwd_link=LinkConfig(CAPACITY, 50000.0),
        duration=duration,
        step=min(0.002, d / 10),
        sample_every=0.1,
    )


ARRIVAL_SPACING = 12.0


def consecutive_arrivals(
    d: float,
    estimate: bool = False,
    oracle: bool = False,
    n: int = 8,
    spacing: float = ARRIVAL_SPACING,
) -> ScenarioSpec:
    """n flows arriving one after another, optionally with error estimation."""
    rem = frozenset({Remedy.PC_ERROR_ESTIMATION}) if (estimate or oracle) else frozenset()
    params = RemedyParams(ee_oracle=oracle)
    flows = tuple(
        FlowConfig(id=i, fwd_prop=d / 2, bwd_prop=d / 2, alpha=ALPHA, start_time=i * spacing, remedies=rem, params=params)
        for i in range(n)
    )
    duration = (n - 1) * spacing + 30.0
    return ScenarioSpec(
        flows=flows,
        fwd_link=LinkConfig(CAPACITY, 20000.0),
        duration=duration,
        step=min(0.002, d / 10),
        sample_every=SAMPLE,
        measure_window=(duration - 20.0, duration),
    )


# --- inter-protocol fairness ----------------------------------------------

RENO_CAPACITY = 1000.0
RENO_PROP = 0.2
RENO_ALPHA = 20.0


def reno_vs_fast(
    buffer: float,
    alpha: float = RENO_ALPHA,
    adapt: bool = False,
    params: RemedyParams = RemedyParams(),
    duration: float = 120.0,
) -> ScenarioSpec:
    """One Reno flow and one FAST flow on a link of ``buffer`` packets."""
    d = RENO_PROP
    reno = FlowConfig(id=0, fwd_prop=d / 2, bwd_prop=d / 2, protocol=Protocol.RENO, w0=RENO_CAPACITY * d)
    rem = frozenset({Remedy.ALPHA_ADAPT}) if adapt else frozenset()
    fast = FlowConfig(id=1, fwd_prop=d / 2, bwd_prop=d / 2, alpha=alpha, remedies=rem, params=params)
    return ScenarioSpec(
        flows=(reno, fast),
        fwd_link=LinkConfig(RENO_CAPACITY, buffer),
        duration=duration,
        step=0.002,
        sample_every=SAMPLE,
        measure_window=(duration / 4, duration),
    )


# Slow enough to stay stable against Reno's sawtooth, fast enough to settle
# within two simulated minutes.
ADAPT_PARAMS = RemedyParams(adapt_eta=0.05, adapt_period_rtts=10.0, adapt_memory=0.5)


def alpha_adaptation(buffer: float = 100.0, alpha: float = RENO_ALPHA, adapt: bool = True) -> ScenarioSpec:
    spec = reno_vs_fast(buffer, alpha, adapt=adapt, params=ADAPT_PARAMS)
    return replace(spec, measure_window=(60.0, 120.0))


def lossless_adaptation(alpha: float = ALPHA, duration: float = 30.0) -> ScenarioSpec:
    """Two FAST flows with adaptation on and a buffer too large to overflow."""
    params = RemedyParams(adapt_period_rtts=5.0)
    flows = tuple(
        FlowConfig(id=i, fwd_prop=0.05, bwd_prop=0.05, alpha=alpha, remedies=frozenset({Remedy.ALPHA_ADAPT}), params=params)
        for i in range(2)
    )
    return ScenarioSpec(flows=flows, fwd_link=LinkConfig(CAPACITY, 1e6), duration=duration, step=0.002, sample_every=SAMPLE)
