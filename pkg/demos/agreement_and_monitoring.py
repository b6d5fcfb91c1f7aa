"""Turn an agreed negotiation into an SLA, then check a metric feed against it."""

import json

import numpy as np

from saasbroker import SampleStore, build_agreement, datasets, evaluate_compliance, map_metrics
from saasbroker.monitoring import MappingRule, MetricMapping, Scale
from saasbroker.scenario import run_scenario

scenario = datasets.negotiation_scenario()
result = run_scenario(scenario)
doc = datasets.case_study_request()
directions = {n: a["direction"] for n, a in scenario["attributes"].items()}
sla = build_agreement(result, doc, provider_id="24", directions=directions)
for slo in sla.slos:
    print(f"SLO {slo.indicator}: {slo.comparator.value} {slo.target:.4f} at p{slo.percentile:g}")

# synthetic latency feed in milliseconds, mostly fast with a slow tail
rng = np.random.default_rng(3)
rt = next(s for s in sla.slos if s.indicator == "Response-time")
fast = rng.uniform(0.2, 0.9, 97) * rt.target * 1000
slow = rng.uniform(1.5, 3.0, 3) * rt.target * 1000
lines = [json.dumps({"timestamp": i * 1000, "metric_name": "latency_ms", "value": float(v)})
         for i, v in enumerate(np.concatenate([fast, slow]))]
store = SampleStore()
ingest = store.ingest(lines + lines[:5] + ["{broken"])
print(f"accepted {ingest.accepted}, duplicates {ingest.duplicates}, malformed {ingest.malformed}")

mapping = MetricMapping([MappingRule("latency_ms", "Response-time", Scale(0.001))])
window = (0, 100_000)
report = evaluate_compliance(sla, map_metrics(mapping, store.samples()), window)
for r in report.results:
    print(f"{r.slo.indicator}: {r.status.value}, fraction {r.achieved_fraction}, samples {r.sample_count}")
print("violations:", [(v.slo.indicator, round(v.shortfall, 4)) for v in report.violations])
