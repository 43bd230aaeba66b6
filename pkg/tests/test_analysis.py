import math

import pytest

from dcasim.analysis import (
    AnalysisParams,
    adapted_alpha,
    backward_queue_delay,
    consecutive_arrival_rates,
    estimation_error,
    fairness_report,
    fast_utility,
    jain_index,
    loss_based_marginal_utility,
    newcomer_rate_ratio,
    overestimate_excess,
    partial_fix_rate,
    persistent_overestimate_backlog,
    reno_fast_share_bound,
    reno_vegas_share_band,
    reverse_decay_curve,
    reverse_decay_factor,
    scaled_alpha,
)
from dcasim.errors import Degenerate, EmptyWindow, NonPositiveRate
from dcasim.model import FlowConfig, FlowSample, LinkConfig, Protocol, ScenarioSpec, TraceRecord


class TestReverseDecay:
    def test_no_reverse_queue(self):
        assert reverse_decay_curve(200, 0.05, 3, [0.0]) == [(0.0, 4000.0)]

    def test_half_share_zero_delay(self):
        assert reverse_decay_factor(0, 0.5) == 0.5

    def test_backward_delay_consistency(self):
        q_f, k, rho = 0.01, 1.0, 0.5
        q_b = backward_queue_delay(q_f, k, rho)
        assert q_b == pytest.approx(0.02)
        r = k * q_f + q_f + q_b
        assert r == pytest.approx(0.04)
        assert q_b / r == pytest.approx(rho)

    def test_factor_matches_delay_split(self):
        # x* = alpha / (q_f + q_b) written through q_b(rho): independent route
        alpha, q_f = 200, 0.05
        for k in (0, 1, 10):
            for rho in (0.1, 0.3, 0.5, 0.8):
                q_b = backward_queue_delay(q_f, k, rho)
                direct = alpha / (q_f + q_b)
                (_, x), = reverse_decay_curve(alpha, q_f, k, [rho])
                assert x == pytest.approx(direct, rel=1e-12)

    def test_frozen_curve(self):
        pts = reverse_decay_curve(200, 0.05, 1, [0.1, 0.3, 0.5])
        assert [x for _, x in pts] == pytest.approx([3272.72727, 2153.84615, 1333.33333], rel=1e-8)

    def test_partial_fix_rate(self):
        assert partial_fix_rate(200, 0.01, 0.02, 0.04) == pytest.approx(10000)

    @pytest.mark.parametrize("rho", [-0.1, 1.0])
    def test_rho_domain(self, rho):
        with pytest.raises(ValueError):
            reverse_decay_factor(0, rho)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            AnalysisParams(rho=1.0)
        with pytest.raises(ValueError):
            AnalysisParams(k=-1)
        with pytest.raises(ValueError):
            AnalysisParams(mu=0)


class TestPersistentCongestion:
    def test_overestimate_excess(self):
        assert overestimate_excess(10000, 0.1, 0.1) == 0
        assert overestimate_excess(10000, 0.1, 0.12) == pytest.approx(200)

    def test_overestimate_backlog(self):
        l, extra = persistent_overestimate_backlog(200, 10000, 0.14, 0.1, 0.12)
        assert l == pytest.approx(400)
        assert extra == pytest.approx(200)
        with pytest.raises(ValueError):
            persistent_overestimate_backlog(200, 10000, 0.14, 0.1, 0.09)

    def test_estimation_error(self):
        assert estimation_error(5, 200, 10000) == pytest.approx(0.1)

    def test_newcomer_ratio(self):
        # n = 1: u is the golden ratio and (1 + u)/u = u
        assert newcomer_rate_ratio(1) == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-12)
        assert newcomer_rate_ratio(8) == pytest.approx(3.37228132, rel=1e-8)

    def test_consecutive_arrivals_frozen(self):
        rates = consecutive_arrival_rates(8, 200, 1e4)
        expected = [569.840074, 604.274030, 669.758749, 772.229062, 933.975167, 1210.725418, 1771.948763, 3467.248736]
        assert rates == pytest.approx(expected, rel=1e-8)

    def test_consecutive_arrivals_self_consistent(self):
        # Independent check: each newcomer's error is the previous common delay,
        # and the rates fill the link.
        alpha, C = 200.0, 1e4
        rates = consecutive_arrival_rates(6, alpha, C)
        assert sum(rates) == pytest.approx(C, rel=1e-9)
        q = alpha / rates[0]  # first flow has no error
        errors = [q - alpha / x for x in rates]
        assert errors[0] == pytest.approx(0.0, abs=1e-12)
        assert all(b > a for a, b in zip(errors, errors[1:]))
        assert rates == sorted(rates)


class TestInterProtocol:
    def test_unity_point(self):
        assert reno_fast_share_bound(60, 20) == 1.0

    def test_hand_evaluation(self):
        assert reno_fast_share_bound(100, 20) == 2.0

    @pytest.mark.parametrize("B, k", [(10, 20), (20, 20), (100, 0)])
    def test_degenerate(self, B, k):
        with pytest.raises(Degenerate):
            reno_fast_share_bound(B, k)

    def test_vegas_band(self):
        lo, hi = reno_vegas_share_band(30, 1, 3)
        assert lo == pytest.approx(14.5)
        assert hi == pytest.approx(4.5)

    def test_utility(self):
        assert fast_utility(1, 200) == 0
        assert fast_utility(math.e, 200) == pytest.approx(200)
        with pytest.raises(NonPositiveRate):
            fast_utility(0, 200)

    def test_scaled_alpha_scales_utility(self):
        for x in (0.5, 3.0, 1234.0):
            assert fast_utility(x, scaled_alpha(3, 20)) == pytest.approx(3 * fast_utility(x, 20))

    def test_loss_based_marginal_utility(self):
        assert loss_based_marginal_utility(10, 2, 2) == pytest.approx(0.02)

    def test_adapted_alpha(self):
        assert adapted_alpha(0.02, 1e-4) == pytest.approx(200)
        with pytest.raises(ZeroDivisionError):
            adapted_alpha(0.02, 0.0)


class TestJain:
    def test_equal(self):
        assert jain_index([5, 5, 5]) == 1.0

    def test_two_to_one(self):
        assert jain_index([2, 1]) == pytest.approx(0.9)

    def test_all_zero(self):
        assert jain_index([0, 0]) == 1.0

    def test_empty(self):
        with pytest.raises(EmptyWindow):
            jain_index([])


def _spec():
    flows = (
        FlowConfig(id=0, fwd_prop=0.05, bwd_prop=0.05, protocol=Protocol.RENO),
        FlowConfig(id=1, fwd_prop=0.05, bwd_prop=0.05, start_time=1.0),
    )
    return ScenarioSpec(flows=flows, fwd_link=LinkConfig(1000, 100), duration=4, step=0.01, measure_window=(1, 3))


def _rec(t, x0, x1, b):
    z = lambda x: FlowSample(1, x, 0.1, 0.1, 0)  # noqa: E731
    return TraceRecord(t, (z(x0), z(x1)), b, 0.0, 0.0, 0.0)


class TestFairnessReport:
    def test_window_average(self):
        trace = [_rec(0, 999, 999, 999), _rec(1, 600, 200, 10), _rec(2, 600, 400, 30), _rec(3, 600, 300, 20), _rec(4, 0, 0, 0)]
        rep = fairness_report(trace, _spec())
        assert rep.per_flow_mean_rate == pytest.approx((600, 300))
        assert rep.fwd_mean_backlog == pytest.approx(20)
        assert rep.last_to_first_ratio == pytest.approx(0.5)
        assert rep.reno_to_fast_ratio == pytest.approx(2.0)
        assert rep.jain_index == pytest.approx(900**2 / (2 * (600**2 + 300**2)))
        assert rep.mean_backlogs == {"fwd": rep.fwd_mean_backlog, "bwd": 0.0}

    def test_empty_window(self):
        with pytest.raises(EmptyWindow):
            fairness_report([_rec(0, 1, 1, 1)], _spec())
