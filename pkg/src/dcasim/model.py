"""Scenario description types and their validation.

Units throughout: rates in packets/second, delays in seconds, windows and
backlogs in packets. Fractional packets are fine, this is a fluid model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import ValidationError, Violation


class Protocol(Enum):
    FAST = "fast"
    RENO = "reno"
    VEGAS = "vegas"


class Remedy(Enum):
    REVERSE_PARTIAL = "reverse_partial"
    REVERSE_EXACT = "reverse_exact"
    REVERSE_ECN_TRACK = "reverse_ecn_track"
    PC_PAUSE = "pc_pause"
    PC_ERROR_ESTIMATION = "pc_error_estimation"
    ALPHA_ADAPT = "alpha_adapt"


class Discipline(Enum):
    DROP_TAIL = "drop_tail"
    RED = "red"


class LinkSide(Enum):
    FWD = "fwd"
    BWD = "bwd"


@dataclass(frozen=True)
class RemedyParams:
    """Tuning knobs for the per-flow remedies. Only read when the remedy is on."""

    settle_tolerance: float = 0.01
    settle_updates: int = 5
    pause_cap: float = math.inf
    probe_burst: Optional[float] = None  # None -> alpha / 4
    probe_fraction: float = 0.1  # burst length as a fraction of the RTT
    ee_oracle: bool = False
    adapt_eta: float = 0.1
    adapt_period_rtts: float = 100.0
    adapt_memory: float = 0.1
    alpha_min: float = 2.0
    alpha_max: float = 1e4


@dataclass(frozen=True)
class FlowConfig:
    id: int
    fwd_prop: float
    bwd_prop: float
    protocol: Protocol = Protocol.FAST
    alpha: float = 200.0
    gamma: float = 0.5
    w0: float = 2.0
    # None means once per RTT, otherwise a fixed period in seconds.
    update_interval: Optional[float] = None
    start_time: float = 0.0
    remedies: frozenset = frozenset()
    mu: float = 1.0
    vegas_alpha: float = 1.0
    vegas_beta: float = 3.0
    # False routes the ACKs around the reverse bottleneck.
    reverse_bottleneck: bool = True
    params: RemedyParams = field(default_factory=RemedyParams)

    @property
    def prop_delay(self) -> float:
        return self.fwd_prop + self.bwd_prop

    @property
    def alpha_effective(self) -> float:
        return self.mu * self.alpha


@dataclass(frozen=True)
class RenoConfig:
    kappa: float = 2.0
    beta_exponent: float = 2.0
    additive_increase: float = 1.0
    multiplicative_decrease: float = 0.5


@dataclass(frozen=True)
class RedConfig:
    min_th: float
    max_th: float
    avg_weight: float = 0.002


@dataclass(frozen=True)
class LinkConfig:
    capacity: float
    buffer: float
    discipline: Discipline = Discipline.DROP_TAIL
    red: Optional[RedConfig] = None


UNLOADED_LINK = LinkConfig(capacity=1e9, buffer=1e9)


@dataclass(frozen=True)
class CrossTraffic:
    target: LinkSide
    rate: float
    on_time: float = 0.0
    off_time: float = math.inf


@dataclass(frozen=True)
class ScenarioSpec:
    flows: tuple
    fwd_link: LinkConfig
    duration: float
    step: float
    bwd_link: LinkConfig = UNLOADED_LINK
    reno: RenoConfig = RenoConfig()
    cross_traffic: tuple = ()
    sample_every: Optional[float] = None  # None -> every step
    measure_window: Optional[tuple] = None  # None -> second half of the run
    seed: int = 0
    ack_ratio: float = 0.05
    red_random: bool = False

    @property
    def sample_period(self) -> float:
        return self.step if self.sample_every is None else self.sample_every

    @property
    def window(self) -> tuple:
        if self.measure_window is None:
            return (self.duration / 2.0, self.duration)
        return tuple(self.measure_window)


# Absolute slack for comparisons between user-supplied decimal values.
_EPS = 1e-12


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_link(name: str, link: LinkConfig, out: list) -> None:
    if not (_finite(link.capacity) and link.capacity > 0):
        out.append(Violation(f"{name}.capacity", "> 0"))
    if not (_finite(link.buffer) and link.buffer > 0):
        out.append(Violation(f"{name}.buffer", "> 0"))
    is_red = link.discipline is Discipline.RED
    if is_red != (link.red is not None):
        out.append(Violation(f"{name}.discipline", "RED iff red thresholds present"))
    if link.red is not None:
        red = link.red
        if not (_finite(red.min_th) and _finite(red.max_th) and 0 <= red.min_th < red.max_th):
            out.append(Violation(f"{name}.red", "0 <= min_th < max_th"))
        if not (_finite(red.avg_weight) and 0 < red.avg_weight <= 1):
            out.append(Violation(f"{name}.red.avg_weight", "in (0,1]"))


def _check_flow(i: int, f: FlowConfig, out: list) -> None:
    p = f"flows[{i}]"
    if not (_finite(f.gamma) and 0 < f.gamma <= 1):
        out.append(Violation("gamma", "in (0,1]"))
    if not (_finite(f.alpha) and f.alpha > 0):
        out.append(Violation("alpha", "> 0"))
    if not (_finite(f.mu) and f.mu > 0):
        out.append(Violation("mu", "> 0"))
    if not (_finite(f.w0) and f.w0 >= 1):
        out.append(Violation("w0", ">= 1"))
    if not (_finite(f.fwd_prop) and _finite(f.bwd_prop) and f.fwd_prop >= 0 and f.bwd_prop >= 0):
        out.append(Violation(f"{p}.prop_delay", "finite and >= 0"))
    elif f.fwd_prop + f.bwd_prop <= 0:
        out.append(Violation(f"{p}.prop_delay", "fwd_prop + bwd_prop > 0"))
    if not (_finite(f.start_time) and f.start_time >= 0):
        out.append(Violation(f"{p}.start_time", "finite and >= 0"))
    if f.update_interval is not None and not (_finite(f.update_interval) and f.update_interval > 0):
        out.append(Violation(f"{p}.update_interval", "per-RTT or > 0 seconds"))
    if Remedy.REVERSE_PARTIAL in f.remedies and Remedy.REVERSE_EXACT in f.remedies:
        out.append(Violation(f"{p}.remedies", "REVERSE_PARTIAL and REVERSE_EXACT are exclusive"))
    if f.protocol is Protocol.VEGAS and not (0 <= f.vegas_alpha <= f.vegas_beta):
        out.append(Violation(f"{p}.vegas_band", "0 <= alpha_v <= beta_v"))
    if f.remedies and f.protocol is not Protocol.FAST:
        out.append(Violation(f"{p}.remedies", "remedies apply to FAST flows only"))
    rp = f.params
    if not (0 < rp.settle_tolerance < 1 and rp.settle_updates >= 1):
        out.append(Violation(f"{p}.settle", "tolerance in (0,1), updates >= 1"))
    if not rp.pause_cap > 0:
        out.append(Violation(f"{p}.pause_cap", "> 0"))
    if rp.probe_burst is not None and not rp.probe_burst > 0:
        out.append(Violation(f"{p}.probe_burst", "> 0"))
    if not 0 < rp.probe_fraction <= 1:
        out.append(Violation(f"{p}.probe_fraction", "in (0,1]"))
    if not (0 < rp.adapt_eta <= 1 and 0 < rp.adapt_memory <= 1 and rp.adapt_period_rtts > 0):
        out.append(Violation(f"{p}.adapt", "eta, memory in (0,1]; period > 0"))
    if not 0 < rp.alpha_min <= rp.alpha_max:
        out.append(Violation(f"{p}.alpha_clamp", "0 < alpha_min <= alpha_max"))


def check_scenario(spec: ScenarioSpec) -> list:
    """Return every violated invariant of ``spec`` (empty when valid)."""
    out: list = []
    if not spec.flows:
        out.append(Violation("flows", "at least one flow"))
    for i, f in enumerate(spec.flows):
        _check_flow(i, f, out)
    ids = [f.id for f in spec.flows]
    if len(set(ids)) != len(ids):
        out.append(Violation("flows.id", "unique"))
    _check_link("fwd_link", spec.fwd_link, out)
    _check_link("bwd_link", spec.bwd_link, out)

    reno = spec.reno
    if not (reno.kappa > 0 and reno.beta_exponent > 0 and reno.additive_increase > 0):
        out.append(Violation("reno", "kappa, beta, increase > 0"))
    if not 0 < reno.multiplicative_decrease < 1:
        out.append(Violation("reno.multiplicative_decrease", "in (0,1)"))

    for j, c in enumerate(spec.cross_traffic):
        if not (_finite(c.rate) and c.rate >= 0 and c.on_time >= 0 and c.off_time >= c.on_time):
            out.append(Violation(f"cross[{j}]", "rate >= 0, 0 <= on <= off"))

    if not (_finite(spec.duration) and spec.duration >= 0):
        out.append(Violation("duration", "finite and >= 0"))
    if not (_finite(spec.step) and spec.step > 0):
        out.append(Violation("step", "> 0"))
    else:
        props = [f.prop_delay for f in spec.flows if _finite(f.prop_delay) and f.prop_delay > 0]
        if props and spec.step > min(props) / 10.0 + _EPS:
            out.append(Violation("step", "<= min propagation delay / 10"))
        if spec.sample_every is not None and not spec.sample_every >= spec.step - _EPS:
            out.append(Violation("sample_every", ">= step"))
    if spec.measure_window is not None:
        lo, hi = spec.measure_window
        if not (0 <= lo <= hi <= spec.duration + _EPS):
            out.append(Violation("measure_window", "within [0, duration]"))
    if not (isinstance(spec.seed, int) and 0 <= spec.seed < 2**64):
        out.append(Violation("seed", "64-bit unsigned integer"))
    if not 0 <= spec.ack_ratio <= 1:
        out.append(Violation("ack_ratio", "in [0,1]"))

    for i, f in enumerate(spec.flows):
        if Remedy.REVERSE_ECN_TRACK in f.remedies:
            if spec.bwd_link.discipline is not Discipline.RED:
                out.append(Violation(f"flows[{i}].remedies", "ECN tracking needs RED on the reverse link"))
            if spec.fwd_link.discipline is Discipline.RED:
                out.append(Violation(f"flows[{i}].remedies", "ECN tracking is unreliable with RED on the forward link"))
    return out


def validate_scenario(spec: ScenarioSpec) -> ScenarioSpec:
    """Return ``spec`` unchanged if it is valid, else raise ValidationError."""
    errors = check_scenario(spec)
    if errors:
        raise ValidationError(errors)
    return spec


@dataclass(frozen=True)
class FlowSample:
    w: float
    x: float
    d_hat: float
    r_hat: float
    q_hat: float


@dataclass(frozen=True)
class TraceRecord:
    """All observables at one sampling instant; one CSV row."""

    t: float
    flows: tuple
    fwd_backlog: float
    bwd_backlog: float
    fwd_loss_rate: float
    ecn_mark_prob: float
