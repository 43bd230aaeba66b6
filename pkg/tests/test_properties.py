import math

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dcasim import csvio
from dcasim.analysis import FairnessReport, jain_index, reno_fast_share_bound, reverse_decay_factor
from dcasim.engine import FifoLinkState, LinkState, red_mark_probability
from dcasim.model import Discipline, LinkConfig, RedConfig
from dcasim.protocols import fast_fixed_point_window, fast_window
from dcasim.remedies import estimate_flow_count

delay = st.floats(min_value=1e-3, max_value=2.0)


@given(alpha=st.floats(1, 1000), d=delay, q=delay, gamma=st.sampled_from([0.5, 1.0]), w0=st.floats(1, 1e4))
def test_fast_iteration_converges_to_fixed_point(alpha, d, q, gamma, w0):
    # The error contracts by 1 - gamma*q/r per update, so 200 updates reach
    # 1e-6 whenever q/r is not tiny.
    r = d + q
    target = alpha * r / q
    assume(target >= 1.0 and q / r >= 0.15)
    w = w0
    for _ in range(200):
        w = fast_window(w, d, r, alpha, gamma)
    assert math.isclose(w, target, rel_tol=1e-6)
    assert math.isclose(fast_fixed_point_window(alpha, d, q), target, rel_tol=1e-12)


@given(alpha=st.floats(1, 1000), d=delay, q=delay, gamma=st.floats(0.01, 1), w=st.floats(1, 1e4))
def test_fast_error_contracts_geometrically(alpha, d, q, gamma, w):
    r = d + q
    target = alpha * r / q
    w2 = fast_window(w, d, r, alpha, gamma)
    assume(w2 > 1.0)
    assert math.isclose(w2 - target, (1 - gamma * q / r) * (w - target), rel_tol=1e-9, abs_tol=1e-7 * target)


@given(w=st.floats(1, 1e5), d=delay, q=st.floats(0, 2), alpha=st.floats(0.1, 1000), gamma=st.floats(0.01, 1))
def test_fast_window_moves_towards_fixed_point(w, d, q, alpha, gamma):
    r = d + q
    w2 = fast_window(w, d, r, alpha, gamma)
    assert w2 >= 1.0
    if q > 0:
        target = max(1.0, alpha * r / q)
        # never overshoots for gamma <= 1
        assert (w2 - target) * (w - target) >= -1e-6 * max(1.0, target * target)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=20))
def test_jain_bounds(rates):
    j = jain_index(rates)
    assert 1.0 / len(rates) - 1e-12 <= j <= 1.0 + 1e-12


@given(st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=20), st.floats(1e-3, 1e3))
def test_jain_scale_invariant(rates, c):
    assert math.isclose(jain_index(rates), jain_index([c * r for r in rates]), rel_tol=1e-9)


@given(k=st.floats(0, 20), r1=st.floats(0, 0.98), r2=st.floats(0, 0.98))
def test_reverse_decay_monotone(k, r1, r2):
    lo, hi = sorted((r1, r2))
    assume(hi - lo > 1e-9)
    assert reverse_decay_factor(k, hi) < reverse_decay_factor(k, lo)


@given(rho=st.floats(0.01, 0.98), k1=st.floats(0, 20), k2=st.floats(0, 20))
def test_reverse_decay_ordered_by_delay(rho, k1, k2):
    lo, hi = sorted((k1, k2))
    assume(hi - lo > 1e-6)
    assert reverse_decay_factor(hi, rho) < reverse_decay_factor(lo, rho)


@given(k=st.floats(0.1, 1000), m1=st.floats(1.01, 50), m2=st.floats(1.01, 50))
def test_share_bound_monotone_in_buffer(k, m1, m2):
    lo, hi = sorted((m1, m2))
    assume(hi - lo > 1e-6)
    assert reno_fast_share_bound(hi * k, k) > reno_fast_share_bound(lo * k, k)


@given(a=st.floats(0, 1e4), lo=st.floats(0, 0.1), width=st.floats(1e-4, 0.1))
def test_red_probability_in_unit_interval_and_monotone(a, lo, width):
    link = LinkConfig(1000, 1e4, Discipline.RED, RedConfig(lo, lo + width))
    p = red_mark_probability(a, link)
    assert 0.0 <= p <= 1.0
    assert red_mark_probability(a + 1.0, link) >= p


@given(st.lists(st.floats(0, 5000), min_size=1, max_size=200), st.floats(1, 500))
def test_link_conservation(inflows, buffer):
    link = LinkState(LinkConfig(1000, buffer))
    for x in inflows:
        link.advance(x, 0.001)
        assert 0.0 <= link.backlog <= buffer
        assert link.cum_losses <= link.cum_arrivals + 1e-12
        assert math.isclose(
            link.cum_arrivals, link.cum_delivered + link.cum_losses + link.backlog, rel_tol=1e-9, abs_tol=1e-9
        )


@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0, 5)), min_size=1, max_size=200), st.floats(1, 50))
def test_fifo_mix_accounts_every_source(arrivals, buffer):
    link = FifoLinkState(LinkConfig(1000, buffer))
    for a in arrivals:
        delivered, _, out = link.advance_mix(list(a), 0.001)
        assert math.isclose(sum(out), delivered, rel_tol=1e-9, abs_tol=1e-9)
    queued = sum(c[0] for c in link.cohorts)
    assert math.isclose(queued, link.backlog, rel_tol=1e-6, abs_tol=1e-6)


@given(n=st.integers(0, 200), alpha=st.floats(1, 1000), C=st.floats(100, 1e6))
def test_flow_count_inverts_newcomer_equilibrium(n, alpha, C):
    u = (1 + math.sqrt(1 + 4 * n)) / 2
    q = u * alpha / C
    assert estimate_flow_count(C, q, alpha, rate=C / u) == n


finite = st.floats(-1e12, 1e12, allow_nan=False).filter(lambda x: x == 0 or abs(x) > 1e-300)


@given(x=finite)
def test_number_format_is_idempotent(x):
    once = csvio.fmt(x)
    assert csvio.fmt(float(once)) == once
    if x != 0:
        assert math.isclose(float(once), x, rel_tol=1e-8)


@settings(max_examples=50)
@given(
    rates=st.lists(st.floats(0, 1e5), min_size=1, max_size=8),
    j=st.floats(0, 1),
    ltf=st.floats(0, 100),
    rtf=st.one_of(st.none(), st.floats(0, 100)),
    bf=st.floats(0, 1e5),
    bb=st.floats(0, 1e5),
)
def test_report_csv_round_trip(rates, j, ltf, rtf, bf, bb):
    rep = FairnessReport(tuple(rates), j, ltf, rtf, bf, bb)
    text = csvio.report_csv(rep)
    back = csvio.read_report(text)
    assert csvio.report_csv(back) == text
    assert back.reno_to_fast_ratio is None if rtf is None else math.isclose(back.reno_to_fast_ratio, rtf, rel_tol=1e-8, abs_tol=1e-300)
    assert len(back.per_flow_mean_rate) == len(rates)
