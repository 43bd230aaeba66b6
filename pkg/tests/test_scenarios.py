"""Engine runs that cross-check remedies and closed forms outside the acceptance list."""

import pytest

from dcasim.engine import Engine, run
from dcasim.experiments import ALPHA, REVERSE_Q_F, reverse_path
from dcasim.model import FlowConfig, LinkConfig, Protocol, Remedy, ScenarioSpec


def test_ecn_tracking_matches_partial_fix():
    spec = reverse_path(1, 0.3, Remedy.REVERSE_ECN_TRACK, ecn=True)
    res = run(spec)
    rep = res.report
    q_f = rep.fwd_mean_backlog / spec.fwd_link.capacity
    q_b = rep.bwd_mean_backlog / spec.bwd_link.capacity
    r = REVERSE_Q_F + q_f + q_b
    assert res.trace[-1].ecn_mark_prob > 0
    assert rep.per_flow_mean_rate[1] == pytest.approx(ALPHA / q_f * (1 - q_b / r), rel=0.05)


def test_pause_is_noop_on_empty_network():
    f = FlowConfig(id=0, fwd_prop=0.05, bwd_prop=0.05, alpha=100, remedies=frozenset({Remedy.PC_PAUSE}))
    spec = ScenarioSpec(flows=(f,), fwd_link=LinkConfig(5000, 1e5), duration=20, step=0.002)
    res = run(spec)
    assert [e["event"] for e in res.events if e["event"] in ("pause", "resume")] == ["pause", "resume"]
    assert res.flows[0].state.d_hat == pytest.approx(0.1, abs=1e-12)


class PinnedEngine(Engine):
    """Engine whose first flow keeps a fixed propagation-delay estimate."""

    pinned = 0.0

    def _observe(self, f, k, t):
        super()._observe(f, k, t)
        if f.index == 0:
            f.state.d_hat = self.pinned


def test_forced_overestimate_buffers_extra():
    d, C, alpha = 0.1, 10000.0, 200.0
    f = FlowConfig(id=0, fwd_prop=d / 2, bwd_prop=d / 2, alpha=alpha)
    spec = ScenarioSpec(flows=(f,), fwd_link=LinkConfig(C, 1e5), duration=40, step=0.002, sample_every=0.05)
    eng = PinnedEngine(spec)
    eng.pinned = d + 0.02
    res = eng.run()
    # extra C*(d_hat - d) = 200 packets on top of alpha
    assert res.report.fwd_mean_backlog == pytest.approx(alpha + 200, rel=0.05)


def test_vegas_keeps_backlog_in_band():
    f = FlowConfig(id=0, fwd_prop=0.05, bwd_prop=0.05, protocol=Protocol.VEGAS, vegas_alpha=1, vegas_beta=3, w0=90)
    spec = ScenarioSpec(flows=(f,), fwd_link=LinkConfig(1000, 1000), duration=60, step=0.002, sample_every=0.05)
    rep = run(spec).report
    assert 1 - 0.5 <= rep.fwd_mean_backlog <= 3 + 0.5
    assert rep.per_flow_mean_rate[0] == pytest.approx(1000, rel=0.02)


def test_fixed_update_interval_reaches_same_equilibrium():
    f = FlowConfig(id=0, fwd_prop=0.05, bwd_prop=0.05, alpha=100, update_interval=0.2)
    spec = ScenarioSpec(flows=(f,), fwd_link=LinkConfig(5000, 1e5), duration=60, step=0.002, sample_every=0.05)
    assert run(spec).report.fwd_mean_backlog == pytest.approx(100, rel=0.05)
