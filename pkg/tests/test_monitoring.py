import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saasbroker.errors import UnmappedIndicator
from saasbroker.monitoring import (
    HOUR_MS,
    Identity,
    MappingRule,
    MetricMapping,
    MetricSample,
    SampleStore,
    Scale,
    SloStatus,
    UptimeFromHeartbeat,
    evaluate_compliance,
    evaluate_slo,
    heartbeat_availability,
    map_metrics,
    transform_from_dict,
)
from saasbroker.sla import Comparator, Sla, Slo

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def rt_sla(percentile=95.0):
    slo = Slo("response-time", Comparator.LE, 10.0, percentile)
    return Sla("sla-1", "c", "p", T0, "svc", (slo,), (T0, T0.replace(year=2025)))


def feed(values, start=0, step=1000):
    return [(start + i * step, float(v)) for i, v in enumerate(values)]


def line(ts, name="response_time_ms", value=1.0, source="probe"):
    return json.dumps({"timestamp": ts, "metric_name": name, "value": value, "source_id": source})


# -- ingest -----------------------------------------------------------------------------

def test_ingest_counts_and_dedupes():
    store = SampleStore()
    r = store.ingest([line(3), line(1), line(2)])
    assert r.accepted == 3 and len(store) == 3
    r = store.ingest([line(2)])
    assert r.duplicates == 1 and len(store) == 3
    assert [s.timestamp for s in store] == [1, 2, 3]


def test_malformed_records_are_counted():
    store = SampleStore()
    r = store.ingest([line(1), json.dumps({"timestamp": 2, "metric_name": "x", "value": "fast"}),
                      "{not json", json.dumps({"metric_name": "x", "value": 1}), ""])
    assert r.accepted == 1 and r.malformed == 3 and len(r.errors) == 3


# -- mapping ------------------------------------------------------------------------------

def test_identity_and_scale():
    samples = [MetricSample(i, "response_time_ms", v) for i, v in enumerate([8, 12, 9])]
    mapping = MetricMapping([MappingRule("response_time_ms", "Response-time")])
    assert [v for _, v in map_metrics(mapping, samples)["Response-time"]] == [8, 12, 9]
    scaled = MetricMapping([MappingRule("response_time_ms", "Response-time", Scale(0.001))])
    assert map_metrics(scaled, [MetricSample(0, "response_time_ms", 8000)])["Response-time"] == [(0, 8.0)]


def test_heartbeat_gap_gives_five_sixths():
    minute = 60_000
    beats = [m * minute for m in range(60) if not 20 < m < 30]
    series = heartbeat_availability(beats, gap_threshold_ms=90_000)
    assert series == [(0, pytest.approx(50 / 60))]


def test_heartbeat_transform_via_mapping():
    beats = [MetricSample(m * 60_000, "heartbeat", 1.0) for m in range(60)]
    mapping = MetricMapping([MappingRule("heartbeat", "Availability", UptimeFromHeartbeat(90_000, HOUR_MS, 100.0))])
    assert map_metrics(mapping, beats)["Availability"] == [(0, 100.0)]


def test_mapping_lookup_and_serialization():
    mapping = MetricMapping([MappingRule("rt", "Response-time", Scale(2.0)),
                             MappingRule("hb", "Availability", UptimeFromHeartbeat(5000))])
    assert mapping.rule_for("response time").metric_name == "rt"
    with pytest.raises(UnmappedIndicator):
        mapping.rule_for("Cost")
    assert MetricMapping.from_dict(json.loads(json.dumps(mapping.to_dict()))) == mapping
    assert transform_from_dict("identity") == Identity()
    with pytest.raises(ValueError):
        MetricMapping([MappingRule("a", "x"), MappingRule("b", "X")])


# -- compliance -------------------------------------------------------------------------------

def test_compliant_at_96_of_100():
    series = {"response-time": feed([9.0] * 96 + [12.0] * 4)}
    report = evaluate_compliance(rt_sla(), series, (0, 100_000))
    (r,) = report.results
    assert r.status is SloStatus.COMPLIANT and r.achieved_fraction == pytest.approx(0.96)
    assert report.compliant and not report.violations


def test_violated_at_90_of_100():
    series = {"response-time": feed([9.0] * 90 + [12.0] * 10)}
    report = evaluate_compliance(rt_sla(), series, (0, 100_000))
    (v,) = report.violations
    assert report.results[0].status is SloStatus.VIOLATED
    assert v.shortfall == pytest.approx(0.05)


def test_empty_window_is_indeterminate():
    series = {"response-time": feed([9.0] * 10)}
    report = evaluate_compliance(rt_sla(), series, (50_000, 60_000))
    assert report.results[0].status is SloStatus.INDETERMINATE
    assert report.results[0].compliant is None and report.compliant


def test_window_is_half_open():
    series = {"response-time": [(0, 1.0), (10, 50.0)]}
    report = evaluate_compliance(rt_sla(percentile=100), series, (0, 10))
    assert report.results[0].sample_count == 1 and report.compliant
    with pytest.raises(ValueError):
        evaluate_compliance(rt_sla(), series, (10, 10))


def test_exact_percentile_boundary_is_compliant():
    slo = Slo("rt", Comparator.LE, 10.0, 95.0)
    assert evaluate_slo(slo, [1.0] * 95 + [20.0] * 5)[0] is SloStatus.COMPLIANT
    assert evaluate_slo(slo, [1.0] * 94 + [20.0] * 6)[0] is SloStatus.VIOLATED


values = st.lists(st.floats(0, 20), min_size=1, max_size=60)


@settings(max_examples=300)
@given(values, st.floats(0, 10), st.floats(10.0001, 100))
def test_adding_samples_moves_fraction_the_right_way(vs, good, bad):
    slo = Slo("rt", Comparator.LE, 10.0)
    _, base = evaluate_slo(slo, vs)
    _, up = evaluate_slo(slo, vs + [good])
    _, down = evaluate_slo(slo, vs + [bad])
    assert 0.0 <= base <= 1.0
    assert up >= base and down <= base


@settings(max_examples=200)
@given(values, st.randoms())
def test_report_ignores_ingestion_order(vs, rnd):
    records = [line(i * 1000, "rt", v) for i, v in enumerate(vs)]
    shuffled = list(records)
    rnd.shuffle(shuffled)
    mapping = MetricMapping([MappingRule("rt", "response-time")])

    def report(recs):
        store = SampleStore()
        store.ingest(recs)
        return evaluate_compliance(rt_sla(), map_metrics(mapping, store.samples()), (0, 10**9)).to_dict()

    assert report(records) == report(shuffled)


@settings(max_examples=200)
@given(values, st.integers(0, 10**6), st.integers(1, 10**6))
def test_windows_with_the_same_samples_agree(vs, pad_before, pad_after):
    series = {"response-time": feed(vs, start=10**6)}
    first, last = series["response-time"][0][0], series["response-time"][-1][0]
    tight = evaluate_compliance(rt_sla(), series, (first, last + 1))
    loose = evaluate_compliance(rt_sla(), series, (first - pad_before, last + pad_after))
    assert [r.status for r in tight.results] == [r.status for r in loose.results]
    assert [r.achieved_fraction for r in tight.results] == [r.achieved_fraction for r in loose.results]
