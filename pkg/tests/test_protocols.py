import math

import pytest

from dcasim.errors import NonPositiveRtt, ZeroQueueDelay
from dcasim.model import FlowConfig, RenoConfig
from dcasim.protocols import (
    FlowState,
    equilibrium_backlog,
    fast_equilibrium_rate,
    fast_fixed_point_window,
    fast_flow_derivative,
    fast_update,
    fast_window,
    reno_update,
    vegas_diff,
    vegas_update,
)


class TestFastWindow:
    def test_empty_queue_adds_alpha(self):
        assert fast_window(50, 0.1, 0.1, 20, 1.0) == 70

    def test_fixed_point(self):
        # q*x = 0.025 * 800 = 20 = alpha
        assert fast_window(100, 0.100, 0.125, 20, 0.5) == pytest.approx(100)

    def test_hand_evaluation(self):
        expected = 0.5 * (100 * 0.100 / 0.150 + 20) + 50
        assert fast_window(100, 0.100, 0.150, 20, 0.5) == pytest.approx(expected)
        assert expected == pytest.approx(93.3333333, rel=1e-8)

    def test_window_floor(self):
        assert fast_window(1.0, 0.001, 10.0, 0.0001, 1.0) == 1.0

    @pytest.mark.parametrize("d, r", [(0.0, 0.1), (0.1, 0.0), (-1, 0.2)])
    def test_rejects_nonpositive_delays(self, d, r):
        with pytest.raises(NonPositiveRtt):
            fast_window(10, d, r, 20, 0.5)

    def test_fast_update_uses_effective_alpha(self):
        cfg = FlowConfig(id=0, fwd_prop=0.05, bwd_prop=0.05, alpha=20, mu=3, gamma=1.0)
        st = FlowState(w=50, d_hat=0.1, r_hat=0.1, alpha_effective=cfg.alpha_effective)
        assert fast_update(st, cfg) == 110

    def test_fixed_point_window_is_stationary(self):
        w = fast_fixed_point_window(20, 0.1, 0.025)
        assert fast_window(w, 0.1, 0.125, 20, 0.5) == pytest.approx(w)


class TestFlowDerivative:
    def test_zero_at_equilibrium(self):
        assert fast_flow_derivative(0.05, 400, 20, 0.5) == 0

    def test_max_growth_on_empty_queue(self):
        assert fast_flow_derivative(0.0, 800, 20, 0.5) == 10

    def test_hand_evaluation(self):
        assert fast_flow_derivative(0.05, 800, 20, 0.5) == pytest.approx(-10)


class TestEquilibrium:
    @pytest.mark.parametrize("alpha, q, x", [(200, 0.010, 20000), (20, 0.001, 20000)])
    def test_rate(self, alpha, q, x):
        assert fast_equilibrium_rate(alpha, q) == pytest.approx(x)

    @pytest.mark.parametrize("q", [0.0, -0.1, 0.0005])
    def test_rate_needs_measurable_queue(self, q):
        with pytest.raises(ZeroQueueDelay):
            fast_equilibrium_rate(200, q, resolution=0.001)

    @pytest.mark.parametrize("n, alpha, b", [(1, 200, 200), (8, 200, 1600), (4, 50, 200)])
    def test_backlog(self, n, alpha, b):
        assert equilibrium_backlog(n, alpha) == b


class TestReno:
    cfg = RenoConfig()

    def state(self, w):
        return FlowState(w=w, d_hat=0.1, r_hat=0.1, alpha_effective=0)

    def test_halving(self):
        assert reno_update(self.state(64), self.cfg, True) == 32

    def test_increase(self):
        assert reno_update(self.state(64), self.cfg, False) == 65

    def test_floor(self):
        assert reno_update(self.state(1), self.cfg, True) == 1

    def test_partial_rtt(self):
        assert reno_update(self.state(64), self.cfg, False, rtt_fraction=0.25) == 64.25


class TestVegas:
    def test_diff(self):
        # x_expected - x_actual = 100/0.1 - 100/0.2 = 500 pkt/s, times d = 50 pkt
        assert vegas_diff(100, 0.1, 0.2) == pytest.approx(50)

    def test_dead_band(self):
        w = 100
        r = 0.1 * w / (w - 2)  # diff = 2
        st = FlowState(w=w, d_hat=0.1, r_hat=r, alpha_effective=0)
        assert vegas_update(st, (1, 3)) == w

    def test_under_buffered(self):
        st = FlowState(w=10, d_hat=0.1, r_hat=0.1, alpha_effective=0)
        assert vegas_update(st, (1, 3)) == 11

    def test_over_buffered(self):
        w = 100
        r = 0.1 * w / (w - 4)  # diff = 4
        st = FlowState(w=w, d_hat=0.1, r_hat=r, alpha_effective=0)
        assert vegas_diff(w, 0.1, r) == pytest.approx(4)
        assert vegas_update(st, (1, 3)) == w - 1


def test_flow_state_views():
    st = FlowState(w=100, d_hat=0.1, r_hat=0.125, alpha_effective=20)
    assert st.q_hat == pytest.approx(0.025)
    assert st.x == pytest.approx(800)
    assert FlowState(w=1, d_hat=0, r_hat=0, alpha_effective=1).x == 0.0
    assert math.isclose(st.x * st.q_hat, 20)
