import math

import pytest
from hypothesis import given, strategies as st

from cyres.engine import INF, PerformanceTrace
from cyres.errors import NoEvent
from cyres.metrics import (IncidentTimeline, RunRecord, Thresholds, build_report, catastrophe_time,
                           certification_metrics, classify_outcome, resilience_integral, segment_event,
                           time_to_failure, time_to_recovery)


def tr(*samples):
    return PerformanceTrace(list(samples))


TH = Thresholds(P_A=1.0, P_min=0.5, D_c=1.0)


def test_idle_trace_has_no_event():
    with pytest.raises(NoEvent):
        segment_event(tr((0, 1.0), (10, 1.0)), TH, 10)


def test_segment_full_recovery():
    t = tr((0, 1.0), (2, 0.6), (5, 0.3), (9, 1.0), (12, 1.0))
    assert segment_event(t, TH, 12) == (2, 9, True)


def test_segment_acceptable_recovery():
    th = Thresholds(P_A=0.9, P_min=0.5)
    t = tr((0, 1.0), (1, 0.4), (7, 0.95), (10, 0.95))
    assert segment_event(t, th, 10) == (1, 7, True)


def test_segment_unfinished_event():
    t = tr((0, 1.0), (1, 0.4), (10, 0.4))
    assert segment_event(t, TH, 10) == (1, 10, False)


def test_time_to_failure():
    t = tr((0, 1.0), (2, 0.7), (5, 0.4), (9, 1.0))
    assert time_to_failure(t, TH, 2) == 3
    assert time_to_failure(tr((0, 1.0), (2, 0.7), (9, 1.0)), TH, 2) is None


def test_failure_is_strict():
    th = Thresholds(P_A=1.0, P_min=0.0)
    assert time_to_failure(tr((0, 1.0), (1, 0.0), (3, 1.0)), th, 1) is None
    assert time_to_failure(tr((0, 1.0), (1, 0.5), (3, 1.0)), TH, 1) is None


def test_time_to_recovery():
    t = tr((0, 1.0), (2, 0.7), (5, 0.4), (9, 1.0))
    assert time_to_recovery(t, TH, 5) == 4
    assert time_to_recovery(tr((0, 1.0), (5, 0.4), (9, 0.4)), TH, 5) is None
    th = Thresholds(P_A=0.8, P_min=0.5)
    assert time_to_recovery(tr((0, 1.0), (5, 0.4), (5.5, 0.8)), th, 5) == 0.5


def test_integral_examples():
    assert resilience_integral(tr((0, 1.0), (4, 1.0)), 0, 4) == (4.0, 1.0)
    assert resilience_integral(tr((0, 1.0), (2, 0.5), (4, 1.0)), 0, 4) == (3.0, 0.75)


@given(st.lists(st.tuples(st.floats(0.01, 3), st.floats(0, 1)), min_size=1, max_size=20))
def test_normalized_integral_bounded(steps):
    t, samples = 0.0, []
    for width, p in steps:
        samples.append((t, p))
        t += width
    samples.append((t, 1.0))
    raw, norm = resilience_integral(PerformanceTrace(samples), 0.0, t)
    lo, hi = min(p for _, p in samples[:-1]), max(p for _, p in samples[:-1])
    assert lo - 1e-12 <= norm <= hi + 1e-12
    assert raw == pytest.approx(norm * t)


def test_catastrophe_time():
    assert catastrophe_time(tr((0, 1.0), (2, 0.6), (10, 0.6)), TH) == INF
    assert catastrophe_time(tr((0, 1.0), (3, 0.4), (3.5, 0.7), (10, 0.7)), TH) == INF
    assert catastrophe_time(tr((0, 1.0), (3, 0.4), (10, 0.4)), TH) == 3


def test_outcomes():
    assert classify_outcome(IncidentTimeline(t_start=0, T=9), INF) == "Resilient"
    assert classify_outcome(IncidentTimeline(t_start=0), 5.0) == "NotDetectedInTime"
    assert classify_outcome(IncidentTimeline(t_start=0, t_detect=6), 5.0) == "NotDetectedInTime"
    assert classify_outcome(IncidentTimeline(t_start=0, t_detect=1), 5.0) == "NotUnderstoodInTime"
    tl = IncidentTimeline(t_start=0, t_detect=1, t_understand=2, T=12)
    assert classify_outcome(tl, 10.0) == "FixTooLate"


def test_timeline_order():
    assert IncidentTimeline(0, 1, 2, 2, None, 5).ordered()
    assert not IncidentTimeline(0, 3, 2).ordered()


def test_report_fields():
    t = tr((0, 1.0), (2, 0.6), (5, 0.4), (9, 1.0), (12, 1.0))
    rep = build_report(t, TH, 12, IncidentTimeline(t_start=2, t_detect=3, t_understand=4), INF)
    assert (rep.t_start, rep.T, rep.complete) == (2, 9, True)
    assert rep.time_to_failure == 3 and rep.time_to_recovery == 4
    assert rep.time_below_min == 4
    assert rep.resilience_raw == pytest.approx(0.6 * 3 + 0.4 * 4)
    assert rep.outcome == "Resilient"
    assert rep.loss == pytest.approx(1 - rep.resilience_norm)


def _rec(seed, t_detect, t_c=4.0, **kw):
    return RunRecord(seed=seed, event=True, t_start=0.0, t_detect=t_detect, t_c=t_c, **kw)


def test_certification_unanimous_detection():
    rep = certification_metrics([_rec(i, 1.0, t_understand=2.0) for i in range(5)])
    assert rep.p_detect == 1.0 and rep.p_understand == 1.0 and rep.p_understand_defined


def test_certification_no_detection():
    rep = certification_metrics([_rec(i, None) for i in range(5)])
    assert rep.p_detect == 0.0
    assert rep.p_understand == 0.0 and not rep.p_understand_defined


def test_certification_other_fields():
    recs = [
        _rec(1, 1.0, treated=4, deploy_time=2.0, t_prop=3.0, variants=4, update_period=5.0),
        _rec(2, 1.0, treated=2, deploy_time=2.0, t_prop=INF, variants=4, update_period=5.0),
    ]
    rep = certification_metrics(recs)
    assert rep.deploy_rate_measured == 1.5
    assert rep.t_propagate_mean == 3.0
    assert rep.engineered_differences == 4
    assert rep.update_frequency == 0.2
    assert rep.seed == 1 and rep.runs == 2
    assert math.isclose(sum(rep.outcomes.values()), 2)
