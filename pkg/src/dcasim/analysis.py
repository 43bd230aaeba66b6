"""Closed-form oracles for delay-based congestion control and trace metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import Degenerate, EmptyWindow, NonPositiveRate
from .model import Protocol, ScenarioSpec
from .remedies import pause_feasibility_bound  # noqa: F401  (re-exported for curves)


@dataclass(frozen=True)
class AnalysisParams:
    k: float = 0.0
    rho: float = 0.0
    mu: float = 1.0
    B: float = 0.0
    k_pkts: float = 0.0

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must be in [0,1), got {self.rho}")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")


# --- reverse-path congestion ---------------------------------------------

def backward_queue_delay(q_f: float, k: float, rho: float) -> float:
    """Reverse queuing delay q_b that makes q_b / r equal rho, with d = k*q_f."""
    if not 0 <= rho < 1:
        raise ValueError(f"rho must be in [0,1), got {rho}")
    return (k + 1.0) * rho * q_f / (1.0 - rho)


def reverse_decay_factor(k: float, rho: float) -> float:
    if not 0 <= rho < 1:
        raise ValueError(f"rho must be in [0,1), got {rho}")
    return (1.0 - rho) / (1.0 + k * rho)


def reverse_decay_curve(alpha: float, q_f: float, k: float, rho_grid: Sequence[float]) -> list:
    """Equilibrium FAST rate against the backward share rho of the RTT.

    Returns ``(rho, x_star)`` pairs with x* = (alpha/q_f)(1-rho)/(1+k*rho).
    """
    if q_f <= 0:
        raise ValueError("q_f must be > 0")
    return [(rho, alpha / q_f * reverse_decay_factor(k, rho)) for rho in rho_grid]


def partial_fix_rate(alpha: float, q_f: float, q_b: float, r: float) -> float:
    """Equilibrium rate when the backward delay is subtracted from the RTT."""
    return alpha / q_f * (1.0 - q_b / r)


# --- persistent congestion -----------------------------------------------

def persistent_overestimate_backlog(alpha: float, C: float, r_star: float, d: float, d_hat: float) -> tuple:
    """Queue length l = C(r* - d) of a single flow with d_hat >= d, and l - alpha."""
    if d_hat < d:
        raise ValueError("d_hat must be >= d")
    if r_star <= d_hat:
        raise ValueError("r_star must exceed d_hat")
    l = C * (r_star - d)
    return l, l - alpha


def overestimate_excess(C: float, d: float, d_hat: float) -> float:
    """Extra packets a single flow buffers because d_hat exceeds d: C(d_hat - d)."""
    return C * (d_hat - d)


def estimation_error(n: int, alpha: float, C: float) -> float:
    """Queuing delay epsilon = alpha*n/C left by n older flows holding alpha each."""
    return alpha * n / C


def newcomer_rate_ratio(n: int) -> float:
    """Rate of one late FAST flow over the rate of one of n correctly calibrated
    older flows, when the late flow mistook the older backlog for propagation delay.

    With u = (1 + sqrt(1+4n))/2 the late flow's apparent queuing delay is
    u*alpha/C while the real one is (n+u)*alpha/C.
    """
    u = (1.0 + math.sqrt(1.0 + 4.0 * n)) / 2.0
    return (n + u) / u


def consecutive_arrival_rates(n: int, alpha: float, C: float, tol: float = 1e-12) -> list:
    """Equilibrium rates of n FAST flows that arrive one by one, each after the
    previous equilibrium settled, and keep the queuing delay seen on arrival as
    part of their propagation delay estimate.

    Solved by bisection on the common queuing delay at each arrival.
    """
    errors = [0.0]
    q = alpha / C
    for _ in range(1, n):
        errors.append(q)
        lo = max(errors) + tol
        hi = lo + (len(errors) + 1) * alpha / C * 10.0
        while sum(alpha / (hi - e) for e in errors) > C:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if sum(alpha / (mid - e) for e in errors) > C:
                lo = mid
            else:
                hi = mid
        q = 0.5 * (lo + hi)
    return [alpha / (q - e) for e in errors]


# --- inter-protocol fairness ---------------------------------------------

def reno_fast_share_bound(B: float, k_pkts: float) -> float:
    """Reno-to-DCA throughput ratio (B - k)/(2k) when the DCA flow keeps k packets queued."""
    if not 0 < k_pkts < B:
        raise Degenerate(f"need 0 < k < B, got k={k_pkts}, B={B}")
    return (B - k_pkts) / (2.0 * k_pkts)


def reno_vegas_share_band(B: float, alpha_v: float, beta_v: float) -> tuple:
    """Share bounds for a Vegas flow whose backlog lies between alpha_v and beta_v."""
    return reno_fast_share_bound(B, alpha_v), reno_fast_share_bound(B, beta_v)


def fast_utility(x: float, alpha: float) -> float:
    if x <= 0:
        raise NonPositiveRate(f"utility undefined for rate {x}")
    return alpha * math.log(x)


def scaled_alpha(mu: float, alpha: float) -> float:
    """alpha' such that U(x; alpha') = mu * U(x; alpha)."""
    return mu * alpha


def loss_based_marginal_utility(w: float, kappa: float, beta: float) -> float:
    return kappa / w**beta


def adapted_alpha(q_star: float, lambda_star: float) -> float:
    """Fixed point of loss-driven alpha adaptation. Undefined without losses."""
    if lambda_star <= 0:
        raise ZeroDivisionError("alpha adaptation has no fixed point without losses")
    return q_star / lambda_star


# --- trace metrics -------------------------------------------------------

def jain_index(rates: Sequence[float]) -> float:
    n = len(rates)
    if n == 0:
        raise EmptyWindow("no rates")
    sq = sum(r * r for r in rates)
    if sq == 0:
        return 1.0
    return sum(rates) ** 2 / (n * sq)


@dataclass(frozen=True)
class FairnessReport:
    per_flow_mean_rate: tuple
    jain_index: float
    last_to_first_ratio: float
    reno_to_fast_ratio: Optional[float]
    fwd_mean_backlog: float
    bwd_mean_backlog: float

    @property
    def mean_backlogs(self) -> dict:
        return {"fwd": self.fwd_mean_backlog, "bwd": self.bwd_mean_backlog}


def _safe_ratio(num: float, den: float) -> float:
    if den == 0:
        return math.inf if num > 0 else 1.0
    return num / den


def fairness_report(trace: Sequence, spec: ScenarioSpec, window: Optional[tuple] = None) -> FairnessReport:
    """Average the trace over the measurement window and derive fairness metrics."""
    lo, hi = spec.window if window is None else window
    eps = spec.step * 1e-6
    rows = [rec for rec in trace if lo - eps <= rec.t <= hi + eps]
    if not rows or hi < lo:
        raise EmptyWindow(f"no samples in [{lo}, {hi}]")
    n = len(spec.flows)
    m = len(rows)
    rates = tuple(sum(rec.flows[i].x for rec in rows) / m for i in range(n))
    fwd = sum(rec.fwd_backlog for rec in rows) / m
    bwd = sum(rec.bwd_backlog for rec in rows) / m

    starts = [f.start_time for f in spec.flows]
    first = starts.index(min(starts))
    last = n - 1 - starts[::-1].index(max(starts))
    ltf = _safe_ratio(rates[last], rates[first])

    reno = [rates[i] for i, f in enumerate(spec.flows) if f.protocol is Protocol.RENO]
    dca = [rates[i] for i, f in enumerate(spec.flows) if f.protocol is not Protocol.RENO]
    rtf = None
    if reno and dca:
        rtf = _safe_ratio(sum(reno) / len(reno), sum(dca) / len(dca))

    return FairnessReport(
        per_flow_mean_rate=rates,
        jain_index=jain_index(rates),
        last_to_first_ratio=ltf,
        reno_to_fast_ratio=rtf,
        fwd_mean_backlog=fwd,
        bwd_mean_backlog=bwd,
    )
