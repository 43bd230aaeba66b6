"""Fixes for reverse-path congestion, persistent congestion and inter-protocol
unfairness.

The stateless corrections are plain functions. The three remedies that need
to act over time (pause, error estimation, alpha adaptation) are small state
machines owned by one simulated flow; the engine calls their hooks and reads
back what they want the flow to do.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import NegativeCorrectedRtt, ProbeLoss, QueueDrained, UnreliableSignal
from .model import Discipline, LinkConfig, RemedyParams

log = logging.getLogger(__name__)


# --- reverse-path congestion ---------------------------------------------

class ReverseMode(Enum):
    PARTIAL_SUBTRACT = "partial_subtract"
    EXACT_PROP_ADD = "exact_prop_add"
    ECN_TRACK = "ecn_track"


@dataclass
class ReverseCompState:
    mode: ReverseMode
    q_b_hat: float = 0.0
    ecn_baseline: float = 0.0


def reverse_partial_fix(r_hat: float, q_b_hat: float) -> float:
    """Subtract the backward queuing delay from the RTT: r' = r_hat - q_b_hat."""
    r_prime = r_hat - q_b_hat
    if r_prime < 0:
        raise NegativeCorrectedRtt(f"r_hat={r_hat} - q_b_hat={q_b_hat} < 0")
    return r_prime


def reverse_exact_fix(d_hat: float, q_b_hat: float) -> float:
    """Count the backward queuing delay as propagation delay: d' = d_hat + q_b_hat."""
    if q_b_hat < 0:
        raise ValueError("q_b_hat must be >= 0")
    return d_hat + q_b_hat


def ecn_queue_delay(mark_prob: float, bwd_link: LinkConfig) -> float:
    """Invert the RED marking law to the backward queuing delay it implies."""
    red = bwd_link.red
    if red is None:
        raise UnreliableSignal("reverse link does not run RED")
    p = min(max(mark_prob, 0.0), 1.0)
    return red.min_th + p * (red.max_th - red.min_th)


def reverse_ecn_track(
    mark_prob: float,
    state: ReverseCompState,
    bwd_link: LinkConfig,
    fwd_link: Optional[LinkConfig] = None,
) -> float:
    """Update ``state.q_b_hat`` from the observed reverse-link marking rate."""
    if fwd_link is not None and fwd_link.discipline is Discipline.RED:
        raise UnreliableSignal("forward path also marks; reverse delay cannot be isolated")
    state.q_b_hat = ecn_queue_delay(mark_prob, bwd_link)
    return state.q_b_hat


# --- persistent congestion: closed forms ---------------------------------

def pause_feasibility_bound(n: int, alpha: float, C: float) -> float:
    """Smallest propagation delay for which a one-RTT pause of a newcomer lets
    the backlog of n older flows drain."""
    if n < 1 or C <= 0:
        raise ValueError("need n >= 1 and C > 0")
    return n * alpha * math.sqrt(1.0 + 4.0 * n) / (2.0 * C)


def estimate_flow_count(c_hat: float, q_settled: float, alpha: float, rate: Optional[float] = None) -> int:
    """Number of older flows from the probe capacity and the apparent delay.

    A newcomer that took the older flows' backlog n*alpha/C as propagation
    delay settles at an apparent queuing delay u*alpha/C, where u solves
    u^2 - u - n = 0. So n = u(u - 1) with u = c_hat*q_settled/alpha.

    With the newcomer's own ``rate`` the count only needs the aggregate
    window balance, not per-flow fairness:
    n = (c_hat*q - alpha)*c_hat / (alpha*rate). Both agree at equilibrium.
    """
    u = c_hat * q_settled / alpha
    if rate is None or rate <= 0:
        return max(0, round(u * (u - 1.0)))
    return max(0, round((u - 1.0) * c_hat / rate))


def corrected_propagation_delay(d_hat: float, alpha: float, n_hat: int, c_hat: float, floor: float = 0.0) -> float:
    """d' = d_hat - alpha*n_hat/c_hat, kept in [floor, d_hat]."""
    if n_hat <= 0:
        return d_hat
    return min(d_hat, max(floor, d_hat - alpha * n_hat / c_hat))


def is_settled(values, tolerance: float, updates: int) -> bool:
    """True once the last ``updates`` update-to-update changes stay within tolerance."""
    if len(values) < updates + 1:
        return False
    tail = values[-(updates + 1):]
    hi = max(tail)
    return hi > 0 and (hi - min(tail)) / hi < tolerance


# How far the flow's own queued packets x*q_hat may be from alpha before a
# remedy acts. Keeps it from firing during the initial ramp.
BACKLOG_TOLERANCE = 0.1
# Length of the pre-probe trend baseline, in probe bursts.
TREND_SPAN = 2


def flow_settled(flow, params: RemedyParams, alpha: float) -> bool:
    """Settled means a steady RTT and the flow's own backlog close to alpha.

    Rates are not used: after an arrival they keep redistributing among
    flows long after the queue has stopped moving.
    """
    if not is_settled(flow.update_rtts, params.settle_tolerance, params.settle_updates):
        return False
    st = flow.state
    return abs(st.x * st.q_hat / alpha - 1.0) <= BACKLOG_TOLERANCE


class Phase(Enum):
    SETTLING = "settling"
    PROBING = "probing"
    PAUSED = "paused"
    CORRECTED = "corrected"
    FAILED = "failed"


class PauseRemedy:
    """Pause a settled flow for about one RTT so the queue can drain and the
    flow can sample the true propagation delay when it resumes."""

    def __init__(self, params: RemedyParams, alpha: float):
        self.params = params
        self.alpha = alpha
        self.phase = Phase.SETTLING
        self.resume_at: Optional[float] = None
        self.d_hat_before: Optional[float] = None

    @property
    def paused(self) -> bool:
        return self.phase is Phase.PAUSED

    def on_update(self, flow, t: float) -> Optional[dict]:
        if self.phase is not Phase.SETTLING:
            return None
        p = self.params
        if not flow_settled(flow, p, self.alpha):
            return None
        length = min(flow.state.r_hat, p.pause_cap)
        self.phase = Phase.PAUSED
        self.resume_at = t + length
        self.d_hat_before = flow.state.d_hat
        return {"event": "pause", "length": length, "d_hat": flow.state.d_hat}

    def poll(self, t: float) -> Optional[dict]:
        if self.phase is Phase.PAUSED and t >= self.resume_at - 1e-12:
            self.phase = Phase.CORRECTED
            return {"event": "resume"}
        return None


@dataclass
class PersistentCongestionState:
    phase: Phase = Phase.SETTLING
    n_hat: Optional[int] = None
    C_hat: Optional[float] = None
    epsilon_hat: float = 0.0
    probe_burst: float = 0.0
    d_prime: Optional[float] = None
    q_settled: float = 0.0
    attempts: int = 0


class ErrorEstimationRemedy:
    """Estimate how much queuing delay a newcomer mistook for propagation delay
    and subtract it.

    Once settled, the flow sends ``probe_burst`` extra packets within a small
    fraction of an RTT. Comparing the RTT of the last packet sent before the
    burst with the first packet sent after it gives the queue growth, hence
    the capacity. The flow count follows from the settled apparent delay.
    """

    MAX_ATTEMPTS = 4

    def __init__(self, params: RemedyParams, alpha: float, step: float, oracle: Optional[tuple] = None):
        self.params = params
        self.rate_settled = 0.0
        self.alpha = alpha
        self.step = step
        self.oracle = oracle
        burst = params.probe_burst if params.probe_burst is not None else alpha / 4.0
        self.state = PersistentCongestionState(probe_burst=burst)
        self.burst_start = 0
        self.burst_steps = 0
        self.extra_rate = 0.0
        self._base_sample: Optional[float] = None
        self._trend_sample: Optional[float] = None
        self.probe_sent = 0.0

    @property
    def phase(self) -> Phase:
        return self.state.phase

    @property
    def freezes_window(self) -> bool:
        return self.state.phase is Phase.PROBING

    def on_update(self, flow, t: float, k: int) -> Optional[dict]:
        st = self.state
        if st.phase is not Phase.SETTLING:
            return None
        p = self.params
        if not flow_settled(flow, p, self.alpha):
            return None
        st.q_settled = flow.state.r_hat - flow.state.d_hat
        self.rate_settled = flow.state.x
        if self.oracle is not None:
            n, C = self.oracle
            return self._correct(flow, n, C)
        st.phase = Phase.PROBING
        st.attempts += 1
        # Hold the window for one RTT first so the last window change has
        # reached the queue before the burst.
        self.burst_start = k + max(1, round(flow.state.r_hat / self.step))
        self.burst_steps = max(1, round(p.probe_fraction * flow.state.r_hat / self.step))
        self.extra_rate = st.probe_burst / (self.burst_steps * self.step)
        self._base_sample = None
        self._trend_sample = None
        self.probe_sent = 0.0
        return {"event": "probe", "burst": st.probe_burst, "steps": self.burst_steps}

    def probe_rate(self, k: int) -> float:
        if self.state.phase is Phase.PROBING and self.burst_start <= k < self.burst_start + self.burst_steps:
            self.probe_sent += self.extra_rate * self.step
            return self.extra_rate
        return 0.0

    @property
    def window_extra(self) -> float:
        """Probe packets the sender must not claw back before the measurement."""
        return self.probe_sent if self.state.phase is Phase.PROBING else 0.0

    def on_sample(self, flow, sample: float, send_step: int) -> Optional[dict]:
        st = self.state
        if st.phase is not Phase.PROBING:
            return None
        # Two pre-burst samples give the background trend of the queue, which
        # is removed from the rise seen after the burst.
        if send_step == self.burst_start - 1 - TREND_SPAN * self.burst_steps:
            self._trend_sample = sample
            return None
        if send_step == self.burst_start - 1:
            self._base_sample = sample
            return None
        if send_step < self.burst_start + self.burst_steps or self._base_sample is None:
            return None
        try:
            dq = sample - self._base_sample
            if self._trend_sample is not None:
                slope = (self._base_sample - self._trend_sample) / (TREND_SPAN * self.burst_steps)
                dq -= slope * (send_step - self.burst_start + 1)
            if dq <= 0:
                raise QueueDrained(f"queue delay change {dq} <= 0 during probe")
        except QueueDrained as exc:
            return self._retry(flow, exc, shrink=False)
        c_hat = st.probe_burst / dq
        n_hat = estimate_flow_count(c_hat, st.q_settled, self.alpha, self.rate_settled)
        return self._correct(flow, n_hat, c_hat)

    def on_loss(self, flow) -> Optional[dict]:
        if self.state.phase is not Phase.PROBING:
            return None
        return self._retry(flow, ProbeLoss("probe burst overflowed the buffer"), shrink=True)

    def _retry(self, flow, exc: Exception, shrink: bool) -> dict:
        st = self.state
        log.info("flow %s: %s", flow.cfg.id, exc)
        if shrink:
            st.probe_burst /= 2.0
        flow.update_rates.clear()
        flow.update_rtts.clear()
        st.phase = Phase.SETTLING if st.attempts < self.MAX_ATTEMPTS else Phase.FAILED
        return {"event": "probe_abort", "code": getattr(exc, "code", "ERROR")}

    def _correct(self, flow, n_hat: int, c_hat: float) -> dict:
        st = self.state
        st.n_hat = n_hat
        st.C_hat = c_hat
        st.epsilon_hat = self.alpha * n_hat / c_hat
        d_old = flow.state.d_hat
        st.d_prime = corrected_propagation_delay(d_old, self.alpha, n_hat, c_hat, floor=self.step)
        flow.state.d_hat = st.d_prime
        st.phase = Phase.CORRECTED
        return {"event": "correct", "n_hat": n_hat, "C_hat": c_hat, "d_hat": d_old, "d_prime": st.d_prime}


# --- inter-protocol fairness ---------------------------------------------

@dataclass
class AlphaAdaptState:
    lambda_hat: float = 0.0
    q_hat_long: float = 0.0
    alpha_target: float = 1.0
    periods: int = 0


def alpha_adapt(
    state: AlphaAdaptState,
    q_long: float,
    lambda_long: float,
    eta: float = 0.1,
    alpha_min: float = 2.0,
    alpha_max: float = 1e4,
) -> float:
    """Move alpha a fraction eta towards q_long/lambda_long; frozen without losses."""
    if lambda_long <= 0:
        return state.alpha_target
    target = q_long / lambda_long
    alpha = state.alpha_target + eta * (target - state.alpha_target)
    state.alpha_target = min(alpha_max, max(alpha_min, alpha))
    return state.alpha_target


class AlphaAdapter:
    """Slow-timescale alpha adaptation driven by the flow's long-run loss rate."""

    def __init__(self, params: RemedyParams, alpha: float):
        self.params = params
        self.state = AlphaAdaptState(alpha_target=alpha)
        self.period_end: Optional[float] = None
        self._sent = 0.0
        self._lost = 0.0
        self._q_area = 0.0
        self._elapsed = 0.0
        self.history: list = []

    def accumulate(self, sent: float, q_hat: float, dt: float) -> None:
        self._sent += sent
        self._q_area += q_hat * dt
        self._elapsed += dt

    def on_loss(self, mass: float) -> None:
        self._lost += mass

    def poll(self, flow, t: float) -> Optional[dict]:
        if self.period_end is None:
            self.period_end = t + self.params.adapt_period_rtts * flow.state.r_hat
            return None
        if t < self.period_end or self._elapsed <= 0 or self._sent <= 0:
            return None
        st = self.state
        p = self.params
        lam = self._lost / self._sent
        q = self._q_area / self._elapsed
        if st.periods == 0:
            st.lambda_hat, st.q_hat_long = lam, q
        else:
            m = p.adapt_memory
            st.lambda_hat += m * (lam - st.lambda_hat)
            st.q_hat_long += m * (q - st.q_hat_long)
        st.periods += 1
        before = st.alpha_target
        alpha = alpha_adapt(st, st.q_hat_long, st.lambda_hat, p.adapt_eta, p.alpha_min, p.alpha_max)
        if st.lambda_hat <= 0:
            log.debug("flow %s: no losses, alpha held at %g", flow.cfg.id, alpha)
        flow.state.alpha_effective = alpha
        self._sent = self._lost = self._q_area = self._elapsed = 0.0
        self.period_end = t + p.adapt_period_rtts * flow.state.r_hat
        rec = {"event": "alpha", "alpha": alpha, "before": before, "lambda": st.lambda_hat, "q": st.q_hat_long}
        self.history.append((t, alpha, st.lambda_hat, st.q_hat_long))
        return rec
