"""Fixed-step fluid simulation of a dumbbell with one forward and one reverse
bottleneck.

Each step of length ``dt`` the engine

1. activates flows whose start time has come;
2. lets every active flow read the RTT sample that reaches it now, react to
   loss/mark notifications, run its controller and remedies, and send;
3. integrates both queues over the step.

Senders are window based. What a flow sends in a step replaces the data
acknowledged or reported lost in that step, plus a paced share of any gap
between its window and the data in flight. The forward queue is FIFO and
keeps the per-flow mix of what it holds, so each flow's ACKs return at the
rate its own packets leave the bottleneck.

Propagation is modelled with integer-step lags. Data sent at step k reaches
the forward queue after ``fwd_prop/2``; the state of the forward queue it
finds there is echoed back to the sender after a further ``fwd_prop/2 +
bwd_prop``. The reverse queue sits half-way along the return path. An RTT
sample therefore reads both queues along its causal path.
"""

from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .analysis import FairnessReport, fairness_report
from .errors import NegativeCorrectedRtt
from .model import (
    Discipline,
    FlowConfig,
    FlowSample,
    LinkConfig,
    LinkSide,
    Protocol,
    Remedy,
    ScenarioSpec,
    TraceRecord,
    validate_scenario,
)
from .protocols import FlowState, fast_window, reno_update, vegas_update
from .remedies import (
    AlphaAdapter,
    ErrorEstimationRemedy,
    PauseRemedy,
    ReverseCompState,
    ReverseMode,
    ecn_queue_delay,
    reverse_exact_fix,
    reverse_partial_fix,
)

log = logging.getLogger(__name__)

RTT_SMOOTHING = 0.5
# Window gaps are closed over this fraction of the RTT.
PACING = 0.25
# Time constant of the ACK clock filter, as a fraction of the RTT.
CLOCK_SMOOTHING = 1.0


def red_mark_probability(avg_backlog: float, link: LinkConfig) -> float:
    """RED marking probability for an average backlog, thresholds in seconds."""
    red = link.red
    if red is None:
        return 0.0
    excess = avg_backlog / link.capacity - red.min_th
    if excess <= 0:
        return 0.0
    return min(1.0, excess / (red.max_th - red.min_th))


@dataclass
class LinkState:
    cfg: LinkConfig
    backlog: float = 0.0
    avg_backlog: float = 0.0
    cum_arrivals: float = 0.0
    cum_delivered: float = 0.0
    cum_losses: float = 0.0
    mark_prob: float = 0.0

    def advance(self, inflow: float, dt: float) -> tuple:
        """Integrate one step of arrivals at ``inflow`` pkt/s. Returns (delivered, lost)."""
        cap = self.cfg.capacity * dt
        arrived = inflow * dt
        b = self.backlog + arrived - cap
        lost = 0.0
        if b < 0.0:
            delivered = self.backlog + arrived
            b = 0.0
        else:
            delivered = cap
            if b > self.cfg.buffer:
                lost = b - self.cfg.buffer
                b = self.cfg.buffer
        self.backlog = b
        self.cum_arrivals += arrived
        self.cum_delivered += delivered
        self.cum_losses += lost
        red = self.cfg.red
        if red is not None:
            self.avg_backlog += red.avg_weight * (b - self.avg_backlog)
            self.mark_prob = red_mark_probability(self.avg_backlog, self.cfg)
        return delivered, lost


class FifoLinkState(LinkState):
    """A link that also tracks which source each queued packet came from."""

    def __init__(self, cfg: LinkConfig):
        super().__init__(cfg)
        self.cohorts: deque = deque()

    def advance_mix(self, amounts: list, dt: float) -> tuple:
        """Like ``advance`` but with per-source arrivals in packets.

        Returns (delivered, lost, per-source delivered).
        """
        arrived = sum(amounts)
        delivered, lost = self.advance(arrived / dt, dt)
        if arrived > 0.0:
            keep = 1.0 - lost / arrived
            self.cohorts.append([arrived - lost, [a * keep for a in amounts]])
        out = [0.0] * len(amounts)
        need = delivered
        cohorts = self.cohorts
        while need > 0.0 and cohorts:
            head = cohorts[0]
            size, mix = head
            if size <= need:
                for i, a in enumerate(mix):
                    out[i] += a
                need -= size
                cohorts.popleft()
            else:
                frac = need / size
                for i, a in enumerate(mix):
                    part = a * frac
                    out[i] += part
                    mix[i] = a - part
                head[0] = size - need
                need = 0.0
        return delivered, lost, out


@dataclass(frozen=True)
class LinkCounters:
    t: float
    arrivals: float
    delivered: float
    losses: float
    backlog: float


class FlowRuntime:
    """Engine-side bookkeeping for one flow. The controller view is ``state``."""

    def __init__(self, cfg: FlowConfig, index: int, spec: ScenarioSpec):
        dt = spec.step
        self.cfg = cfg
        self.index = index
        self.start_step = round(cfg.start_time / dt)
        self.fwd_lag = round(cfg.fwd_prop / 2.0 / dt)
        self.echo_lag = round((cfg.fwd_prop / 2.0 + cfg.bwd_prop) / dt)
        self.bwd_lag = round(cfg.bwd_prop / 2.0 / dt)
        # Bottleneck departure to reverse queue.
        self.mid_lag = self.echo_lag - self.bwd_lag
        self.rtt_lag = self.fwd_lag + self.echo_lag
        self.prop = cfg.fwd_prop + cfg.bwd_prop
        self.uses_bwd = cfg.reverse_bottleneck
        self.is_reno = cfg.protocol is Protocol.RENO
        self.state: Optional[FlowState] = None
        self.d_base = 0.0
        self.q_b_smoothed = 0.0
        self.x = 0.0
        self.x_hist: list = []
        self.next_update = 0.0
        self.update_rates: list = []
        self.update_rtts: list = []
        self.pending: deque = deque()
        self.mark_mass = 0.0
        self.last_reaction = -1e18
        self.sent = 0.0
        self.inflight = 0.0
        self.clock = 0.0
        self.returned = 0.0
        self.to_reverse: deque = deque()
        self.acks: dict = {}
        self.lost = 0.0

        rem = cfg.remedies
        self.reverse: Optional[ReverseCompState] = None
        if Remedy.REVERSE_PARTIAL in rem:
            self.reverse = ReverseCompState(ReverseMode.PARTIAL_SUBTRACT)
        elif Remedy.REVERSE_EXACT in rem:
            self.reverse = ReverseCompState(ReverseMode.EXACT_PROP_ADD)
        elif Remedy.REVERSE_ECN_TRACK in rem:
            self.reverse = ReverseCompState(ReverseMode.ECN_TRACK)
        self.pause = PauseRemedy(cfg.params, cfg.alpha_effective) if Remedy.PC_PAUSE in rem else None
        self.ee: Optional[ErrorEstimationRemedy] = None
        if Remedy.PC_ERROR_ESTIMATION in rem:
            oracle = None
            if cfg.params.ee_oracle:
                older = sum(1 for f in spec.flows if f.start_time < cfg.start_time)
                oracle = (older, spec.fwd_link.capacity)
            self.ee = ErrorEstimationRemedy(cfg.params, cfg.alpha_effective, dt, oracle)
        self.adapt = AlphaAdapter(cfg.params, cfg.alpha_effective) if Remedy.ALPHA_ADAPT in rem else None

    @property
    def active(self) -> bool:
        return self.state is not None

    @property
    def tracks_forward_base(self) -> bool:
        # With a direct estimate of the backward delay the base is the
        # minimum of the forward-only part of the RTT.
        return self.reverse is not None and self.reverse.mode is not ReverseMode.ECN_TRACK

    def controller_delays(self) -> tuple:
        """(d, r) fed to the window law after reverse-path corrections."""
        st = self.state
        d, r = st.d_hat, st.r_hat
        rev = self.reverse
        if rev is None:
            return d, r
        if rev.mode is ReverseMode.EXACT_PROP_ADD:
            return min(r, reverse_exact_fix(d, rev.q_b_hat)), r
        if rev.mode is ReverseMode.PARTIAL_SUBTRACT:
            return d, max(d, reverse_partial_fix(r, rev.q_b_hat))
        try:
            r_corr = reverse_partial_fix(r, rev.q_b_hat)
        except NegativeCorrectedRtt:
            r_corr = d
        return d, max(d, r_corr)

    def sample(self) -> FlowSample:
        st = self.state
        if st is None:
            return FlowSample(0.0, 0.0, 0.0, 0.0, 0.0)
        d, _ = self.controller_delays()
        return FlowSample(st.w, self.x, d, st.r_hat, st.r_hat - d)


@dataclass
class RunResult:
    spec: ScenarioSpec
    trace: list
    counters: dict
    events: list
    flows: list
    report: Optional[FairnessReport] = None


class Engine:
    def __init__(self, spec: ScenarioSpec, validate: bool = True):
        if validate:
            validate_scenario(spec)
        self.spec = spec
        self.dt = spec.step
        self.n_steps = round(spec.duration / spec.step)
        self.sample_steps = max(1, round(spec.sample_period / spec.step))
        self.k = 0
        self.rng = random.Random(spec.seed)
        self.fwd = FifoLinkState(spec.fwd_link)
        self.bwd = LinkState(spec.bwd_link)
        self.flows = [FlowRuntime(f, i, spec) for i, f in enumerate(spec.flows)]
        self.qf_hist: list = []
        self.qb_hist: list = []
        self.pb_hist: list = []
        self.trace: list = []
        self.counters: dict = {"fwd": [], "bwd": []}
        self.events: list = []
        self._sample_arrivals = 0.0
        self._sample_losses = 0.0
        self._cross = [
            (c.target, c.rate, round(c.on_time / self.dt), c.off_time / self.dt)
            for c in spec.cross_traffic
        ]

    @property
    def t(self) -> float:
        return self.k * self.dt

    def _event(self, flow: FlowRuntime, info: Optional[dict]) -> None:
        if info is not None:
            info = dict(info, t=self.t, flow=flow.cfg.id)
            self.events.append(info)
            log.debug("%s", info)

    def _cross_rate(self, side: LinkSide) -> float:
        if not self._cross:
            return 0.0
        k = self.k
        return sum(rate for tgt, rate, on, off in self._cross if tgt is side and on <= k < off)

    def _marks(self, p: float, mass: float) -> float:
        if not self.spec.red_random or p <= 0.0 or mass <= 0.0:
            return p * mass
        draws = max(1, min(64, round(mass)))
        hits = sum(1 for _ in range(draws) if self.rng.random() < p)
        return mass * hits / draws

    # -- flow side --------------------------------------------------------

    def measure_rtt(self, f: FlowRuntime) -> Optional[tuple]:
        """RTT sample reaching flow ``f`` now, or None if no data is in flight.

        Returns ``(sample, q_b component, reverse mark probability, send step)``.
        """
        k = self.k
        send = k - f.rtt_lag
        if send < f.start_step or f.x_hist[send] <= 0.0:
            return None
        s = f.prop + self.qf_hist[k - f.echo_lag]
        qb = 0.0
        pb = 0.0
        if f.uses_bwd:
            qb = self.qb_hist[k - f.bwd_lag]
            pb = self.pb_hist[k - f.bwd_lag]
            s += qb
        return s, qb, pb, send

    def path_rtt(self, f: FlowRuntime) -> float:
        """Round-trip time a packet sent now would experience."""
        r = f.prop + self.qf_hist[self.k]
        if f.uses_bwd:
            r += self.qb_hist[self.k]
        return r

    def _activate(self, f: FlowRuntime) -> None:
        # The handshake sees the queues as they are now.
        r0 = self.path_rtt(f)
        f.state = FlowState(w=f.cfg.w0, d_hat=r0, r_hat=r0, alpha_effective=f.cfg.alpha_effective)
        f.d_base = r0
        f.next_update = self.t + self._interval(f)
        self._event(f, {"event": "start", "d_hat": r0})

    def _interval(self, f: FlowRuntime) -> float:
        iv = f.cfg.update_interval
        return f.state.r_hat if iv is None else iv

    def _observe(self, f: FlowRuntime, k: int, t: float) -> None:
        st = f.state
        send = k - f.rtt_lag
        if send >= f.start_step and f.x_hist[send] > 0.0:
            s = f.prop + self.qf_hist[k - f.echo_lag]
            qb = 0.0
            if f.uses_bwd:
                qb = self.qb_hist[k - f.bwd_lag]
                s += qb
            st.r_hat += RTT_SMOOTHING * (s - st.r_hat)
            rev = f.reverse
            if rev is not None:
                if rev.mode is ReverseMode.ECN_TRACK:
                    pb = self.pb_hist[k - f.bwd_lag] if f.uses_bwd else 0.0
                    rev.q_b_hat = ecn_queue_delay(pb, self.spec.bwd_link)
                else:
                    rev.q_b_hat += RTT_SMOOTHING * (qb - rev.q_b_hat)
                    f.q_b_smoothed = rev.q_b_hat
                base = s - qb if f.tracks_forward_base else s
            else:
                base = s
            if base < st.d_hat:
                st.d_hat = base
            if f.ee is not None:
                self._event(f, f.ee.on_sample(f, s, send))

        pend = f.pending
        signal = 0.0
        while pend and pend[0][0] <= k:
            signal += pend.popleft()[1]
        f.returned = f.acks.pop(k, 0.0) + signal if f.acks else signal
        if signal > 0.0:
            f.lost += signal
            if f.adapt is not None:
                f.adapt.on_loss(signal)
            if f.ee is not None:
                self._event(f, f.ee.on_loss(f))
            if f.is_reno and t - f.last_reaction >= st.r_hat:
                st.w = reno_update(st, self.spec.reno, loss_event=True)
                f.last_reaction = t
        if f.mark_mass >= 1.0:
            f.mark_mass -= 1.0
            if f.is_reno and t - f.last_reaction >= st.r_hat:
                st.w = reno_update(st, self.spec.reno, loss_event=True)
                f.last_reaction = t

    def _control(self, f: FlowRuntime, k: int, t: float) -> None:
        st = f.state
        cfg = f.cfg
        if f.is_reno:
            if f.last_reaction != t:
                st.w = reno_update(st, self.spec.reno, loss_event=False, rtt_fraction=self.dt / st.r_hat)
            return
        paused = f.pause is not None and f.pause.paused
        frozen = f.ee is not None and f.ee.freezes_window
        if not (paused or frozen):
            if cfg.protocol is Protocol.FAST:
                d, r = f.controller_delays()
                st.w = fast_window(st.w, d, r, st.alpha_effective, cfg.gamma)
            else:
                st.w = vegas_update(st, (cfg.vegas_alpha, cfg.vegas_beta))
            f.update_rates.append(st.w / st.r_hat)
            f.update_rtts.append(st.r_hat)
            if len(f.update_rates) > 64:
                del f.update_rates[:-32]
                del f.update_rtts[:-32]
            if f.pause is not None:
                self._event(f, f.pause.on_update(f, t))
            if f.ee is not None:
                self._event(f, f.ee.on_update(f, t, k))
        f.next_update = t + self._interval(f)

    def _send(self, f: FlowRuntime, k: int, t: float) -> float:
        """Packets flow ``f`` puts on the wire in this step."""
        st = f.state
        if f.pause is not None:
            info = f.pause.poll(t)
            if info is not None:
                self._event(f, info)
                f.next_update = t + self._interval(f)
            if f.pause.paused:
                return 0.0
        dt = self.dt
        r = st.r_hat
        gain = dt / (PACING * r)
        if gain > 1.0:
            gain = 1.0
        smooth = dt / (CLOCK_SMOOTHING * r)
        if smooth > 1.0:
            smooth = 1.0
        target = st.w
        extra = 0.0
        if f.ee is not None:
            extra = f.ee.probe_rate(k) * dt
            target += f.ee.window_extra - extra
        # Smoothing the ACK clock keeps burst patterns from circulating forever;
        # the window term still holds the data in flight at the window.
        f.clock += smooth * (f.returned - f.clock)
        amount = f.clock + (target - f.inflight) * gain
        if amount < 0.0:
            amount = 0.0
        return amount + extra

    # -- main loop --------------------------------------------------------

    def _record(self) -> None:
        fwd_rate = self._sample_losses / self._sample_arrivals if self._sample_arrivals > 0 else 0.0
        self._sample_arrivals = self._sample_losses = 0.0
        rec = TraceRecord(
            t=self.t,
            flows=tuple(f.sample() for f in self.flows),
            fwd_backlog=self.fwd.backlog,
            bwd_backlog=self.bwd.backlog,
            fwd_loss_rate=fwd_rate,
            ecn_mark_prob=self.bwd.mark_prob,
        )
        self.trace.append(rec)
        for name, link in (("fwd", self.fwd), ("bwd", self.bwd)):
            self.counters[name].append(
                LinkCounters(self.t, link.cum_arrivals, link.cum_delivered, link.cum_losses, link.backlog)
            )

    def _flows_phase(self) -> None:
        k = self.k
        t = k * self.dt
        self.qf_hist.append(self.fwd.backlog / self.fwd.cfg.capacity)
        self.qb_hist.append(self.bwd.backlog / self.bwd.cfg.capacity)
        self.pb_hist.append(self.bwd.mark_prob)
        dt = self.dt
        for f in self.flows:
            if f.state is None:
                if k != f.start_step:
                    f.x_hist.append(0.0)
                    continue
                self._activate(f)
            self._observe(f, k, t)
            if f.is_reno or t >= f.next_update - 1e-12:
                self._control(f, k, t)
            amount = self._send(f, k, t)
            x = amount / dt
            f.x = x
            f.x_hist.append(x)
            f.sent += amount
            f.inflight += amount - f.returned
            if f.adapt is not None:
                f.adapt.accumulate(amount, f.state.r_hat - f.state.d_hat, dt)
                self._event(f, f.adapt.poll(f, t))

    def _links_phase(self) -> None:
        k = self.k
        dt = self.dt
        amounts = []
        for f in self.flows:
            src = k - f.fwd_lag
            amounts.append(f.x_hist[src] * dt if src >= 0 else 0.0)
        amounts.append(self._cross_rate(LinkSide.FWD) * dt)
        arrived = sum(amounts)
        p_f = self.fwd.mark_prob
        delivered, lost, out = self.fwd.advance_mix(amounts, dt)
        self._sample_arrivals += arrived
        self._sample_losses += lost
        if arrived > 0.0:
            if lost > 0.0:
                for f, a in zip(self.flows, amounts):
                    if a > 0.0:
                        f.pending.append((k + f.echo_lag, lost * a / arrived))
            if p_f > 0.0:
                for f, a in zip(self.flows, amounts):
                    if a > 0.0:
                        f.mark_mass += self._marks(p_f, a)

        # ACKs of data leaving the bottleneck now reach the reverse queue
        # mid_lag steps later and the sender after the reverse queue delay.
        q_b_steps = round(self.bwd.backlog / self.bwd.cfg.capacity / dt)
        ack_load = 0.0
        for f, out_i in zip(self.flows, out):
            pipe = f.to_reverse
            if out_i > 0.0:
                pipe.append((k + f.mid_lag, out_i))
            if not pipe or pipe[0][0] > k:
                continue
            if f.uses_bwd:
                due = k + q_b_steps + f.bwd_lag
            else:
                due = k + f.bwd_lag
            if due <= k:
                due = k + 1
            amount = 0.0
            while pipe and pipe[0][0] <= k:
                amount += pipe.popleft()[1]
            if f.uses_bwd:
                ack_load += amount
            acks = f.acks
            acks[due] = acks.get(due, 0.0) + amount
        ack_in = self.spec.ack_ratio * ack_load / dt
        self.bwd.advance(ack_in + self._cross_rate(LinkSide.BWD), dt)

    def step(self) -> None:
        """Advance the simulation by one step."""
        self._flows_phase()
        if self.k % self.sample_steps == 0:
            self._record()
        self._links_phase()
        self.k += 1

    def finish(self) -> None:
        """Record the closing sample at t = duration when it falls on the grid."""
        if self.n_steps > 0 and self.n_steps % self.sample_steps == 0:
            self._flows_phase()
            self._record()

    def run(self) -> RunResult:
        while self.k < self.n_steps:
            self.step()
        self.finish()
        report = None
        if self.trace:
            try:
                report = fairness_report(self.trace, self.spec)
            except ValueError:
                report = None
        return RunResult(self.spec, self.trace, self.counters, self.events, self.flows, report)


def run(spec: ScenarioSpec) -> RunResult:
    return Engine(spec).run()
