"""Window laws for the simulated controllers and FAST's equilibrium closed forms.

All functions here are pure: they take plain numbers (or a FlowState) and
return new values without touching engine state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonPositiveRtt, ZeroQueueDelay
from .model import FlowConfig, RenoConfig

MIN_WINDOW = 1.0


@dataclass
class FlowState:
    """Dynamic per-flow quantities as seen by the sender."""

    w: float
    d_hat: float
    r_hat: float
    alpha_effective: float
    mode: str = "normal"

    @property
    def q_hat(self) -> float:
        return self.r_hat - self.d_hat

    @property
    def x(self) -> float:
        return self.w / self.r_hat if self.r_hat > 0 else 0.0


def fast_window(w: float, d_hat: float, r_hat: float, alpha: float, gamma: float) -> float:
    """One FAST window update: w <- gamma*(d_hat*w/r_hat + alpha) + (1-gamma)*w."""
    if r_hat <= 0 or d_hat <= 0:
        raise NonPositiveRtt(f"need r_hat >= d_hat > 0, got r_hat={r_hat}, d_hat={d_hat}")
    w_new = gamma * (d_hat * w / r_hat + alpha) + (1.0 - gamma) * w
    return max(MIN_WINDOW, w_new)


def fast_update(state: FlowState, cfg: FlowConfig) -> float:
    return fast_window(state.w, state.d_hat, state.r_hat, state.alpha_effective, cfg.gamma)


def fast_flow_derivative(q: float, x: float, alpha: float, gamma: float) -> float:
    """Continuous-time window drift gamma*alpha*(1 - q*x/alpha), in packets/s."""
    return gamma * alpha * (1.0 - q * x / alpha)


def fast_equilibrium_rate(alpha: float, q_star: float, resolution: float = 0.0) -> float:
    """Throughput alpha/q* of a FAST flow whose queuing delay settles at q*.

    ``resolution`` is the smallest measurable queuing delay (e.g. the engine
    step); anything at or below it is treated as unmeasurable.
    """
    if q_star <= 0 or q_star <= resolution:
        raise ZeroQueueDelay(f"queuing delay {q_star} too small to define an equilibrium")
    return alpha / q_star


def equilibrium_backlog(n: int, alpha: float) -> float:
    """Total bottleneck backlog held by n homogeneous FAST flows."""
    if n < 1 or alpha <= 0:
        raise ValueError("need n >= 1 and alpha > 0")
    return n * alpha


def fast_fixed_point_window(alpha: float, d_hat: float, q_hat: float) -> float:
    """Window at which fast_window stops moving when q_hat is held fixed."""
    return alpha * (d_hat + q_hat) / q_hat


def reno_update(
    state: FlowState,
    cfg: RenoConfig,
    loss_event: bool,
    rtt_fraction: float = 1.0,
) -> float:
    """AIMD step. ``rtt_fraction`` scales the additive increase for partial RTTs."""
    if loss_event:
        return max(MIN_WINDOW, state.w * cfg.multiplicative_decrease)
    return max(MIN_WINDOW, state.w + cfg.additive_increase * rtt_fraction)


def vegas_diff(w: float, d_hat: float, r_hat: float) -> float:
    """Packets the flow keeps buffered: (w/d_hat - w/r_hat) * d_hat."""
    if r_hat <= 0 or d_hat <= 0:
        raise NonPositiveRtt(f"need r_hat >= d_hat > 0, got r_hat={r_hat}, d_hat={d_hat}")
    return (w / d_hat - w / r_hat) * d_hat


def vegas_update(state: FlowState, band: tuple) -> float:
    """Vegas dead-band controller, applied once per RTT."""
    alpha_v, beta_v = band
    diff = vegas_diff(state.w, state.d_hat, state.r_hat)
    if diff < alpha_v:
        return state.w + 1.0
    if diff > beta_v:
        return max(MIN_WINDOW, state.w - 1.0)
    return state.w
