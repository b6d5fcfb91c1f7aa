"""SLA compliance monitoring.

Metric feeds are JSON lines::

    {"timestamp": 1700000000000, "metric_name": "response_time_ms", "value": 8.1, "source_id": "probe-eu"}

Timestamps are epoch milliseconds. Feeds may arrive out of order and with
repeats; the store deduplicates on ``(timestamp, metric_name, source_id)`` and
sorts at read time. A :class:`MetricMapping` turns raw metrics into SLA
indicator series, and :func:`evaluate_compliance` checks each SLO over a
window.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .attributes import canonical_name
from .errors import MalformedRecord, UnmappedIndicator
from .sla import Sla, Slo

HOUR_MS = 3_600_000

Series = list[tuple[int, float]]


@dataclass(frozen=True, order=True)
class MetricSample:
    timestamp: int
    metric_name: str
    value: float
    source_id: str = ""

    @property
    def key(self) -> tuple[int, str, str]:
        return (self.timestamp, self.metric_name, self.source_id)

    def to_dict(self) -> dict:
        return {"timestamp": self.timestamp, "metric_name": self.metric_name,
                "value": self.value, "source_id": self.source_id}


def parse_record(record: str | bytes | Mapping) -> MetricSample:
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc}") from None
    if not isinstance(record, Mapping):
        raise MalformedRecord("record is not a JSON object")
    try:
        ts = record["timestamp"]
        name = record["metric_name"]
        value = record["value"]
    except KeyError as exc:
        raise MalformedRecord(f"missing field {exc}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedRecord(f"non-numeric value {value!r}")
    if isinstance(ts, bool) or not isinstance(ts, (int, float)) or not math.isfinite(ts):
        raise MalformedRecord(f"bad timestamp {ts!r}")
    if not math.isfinite(value):
        raise MalformedRecord(f"non-finite value {value!r}")
    if not isinstance(name, str) or not name:
        raise MalformedRecord("metric_name must be a non-empty string")
    return MetricSample(int(ts), name, float(value), str(record.get("source_id", "")))


@dataclass
class IngestReport:
    accepted: int = 0
    duplicates: int = 0
    malformed: int = 0
    errors: list[str] = field(default_factory=list)
    added: list[MetricSample] = field(default_factory=list)


class SampleStore:
    """Deduplicating sample store; iteration is in timestamp order."""

    def __init__(self, samples: Iterable[MetricSample] = ()):
        self._by_key: dict[tuple[int, str, str], MetricSample] = {}
        for s in samples:
            self.add(s)

    def add(self, sample: MetricSample) -> bool:
        if sample.key in self._by_key:
            return False
        self._by_key[sample.key] = sample
        return True

    def ingest(self, records: Iterable[str | bytes | Mapping]) -> IngestReport:
        report = IngestReport()
        for lineno, rec in enumerate(records, 1):
            if isinstance(rec, (str, bytes)) and not rec.strip():
                continue
            try:
                sample = parse_record(rec)
            except MalformedRecord as exc:
                report.malformed += 1
                report.errors.append(f"record {lineno}: {exc}")
                continue
            if self.add(sample):
                report.accepted += 1
                report.added.append(sample)
            else:
                report.duplicates += 1
        return report

    def samples(self) -> list[MetricSample]:
        return sorted(self._by_key.values())

    def __len__(self) -> int:
        return len(self._by_key)

    def __iter__(self):
        return iter(self.samples())


# -- metric mapping --------------------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    def to_dict(self) -> dict:
        return {"type": "identity"}


@dataclass(frozen=True)
class Scale:
    factor: float

    def to_dict(self) -> dict:
        return {"type": "scale", "factor": self.factor}


@dataclass(frozen=True)
class UptimeFromHeartbeat:
    """Availability per bucket from heartbeat timestamps.

    A gap between consecutive heartbeats longer than ``gap_threshold_ms`` is
    downtime for its whole length; so is the stretch between a bucket edge and
    the nearest heartbeat when that stretch exceeds the threshold. Output is
    the up fraction per bucket times ``scale`` (use 100 for percentages).
    """

    gap_threshold_ms: int
    bucket_ms: int = HOUR_MS
    scale: float = 1.0

    def to_dict(self) -> dict:
        return {"type": "uptime_from_heartbeat", "gap_threshold_ms": self.gap_threshold_ms,
                "bucket_ms": self.bucket_ms, "scale": self.scale}


Transform = Identity | Scale | UptimeFromHeartbeat


def transform_from_dict(d: Mapping | str) -> Transform:
    if isinstance(d, str):
        d = {"type": d}
    kind = d.get("type", "identity")
    if kind == "identity":
        return Identity()
    if kind == "scale":
        return Scale(float(d["factor"]))
    if kind == "uptime_from_heartbeat":
        return UptimeFromHeartbeat(int(d["gap_threshold_ms"]), int(d.get("bucket_ms", HOUR_MS)),
                                   float(d.get("scale", 1.0)))
    raise ValueError(f"unknown transform {kind!r}")


@dataclass(frozen=True)
class MappingRule:
    metric_name: str
    indicator: str
    transform: Transform = Identity()


@dataclass(frozen=True)
class MetricMapping:
    rules: tuple[MappingRule, ...]

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        seen = set()
        for r in self.rules:
            key = canonical_name(r.indicator)
            if key in seen:
                raise ValueError(f"indicator {r.indicator!r} mapped by more than one rule")
            seen.add(key)

    def rule_for(self, indicator: str) -> MappingRule:
        key = canonical_name(indicator)
        for r in self.rules:
            if canonical_name(r.indicator) == key:
                return r
        raise UnmappedIndicator(f"no mapping rule for indicator {indicator!r}")

    def to_dict(self) -> dict:
        return {"rules": [{"metric_name": r.metric_name, "indicator": r.indicator,
                           "transform": r.transform.to_dict()} for r in self.rules]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricMapping":
        return cls(tuple(MappingRule(r["metric_name"], r["indicator"], transform_from_dict(r.get("transform", "identity")))
                         for r in d["rules"]))

    @classmethod
    def identity_for(cls, sla: Sla) -> "MetricMapping":
        """Each SLO indicator read from the metric of the same name."""
        return cls(tuple(MappingRule(s.indicator, s.indicator) for s in sla.slos))


def heartbeat_availability(timestamps: Sequence[int], gap_threshold_ms: int, bucket_ms: int = HOUR_MS) -> Series:
    beats = sorted(set(timestamps))
    if not beats:
        return []
    down = []
    for a, b in zip(beats, beats[1:]):
        if b - a > gap_threshold_ms:
            down.append((a, b))
    first_bucket = beats[0] // bucket_ms
    last_bucket = beats[-1] // bucket_ms
    out = []
    for k in range(first_bucket, last_bucket + 1):
        lo, hi = k * bucket_ms, (k + 1) * bucket_ms
        gaps = list(down)
        # bucket edges with no heartbeat nearby count as down
        if beats[0] - lo > gap_threshold_ms and beats[0] > lo:
            gaps.append((lo, beats[0]))
        if hi - beats[-1] > gap_threshold_ms and beats[-1] < hi:
            gaps.append((beats[-1], hi))
        lost = sum(max(0, min(b, hi) - max(a, lo)) for a, b in gaps)
        out.append((lo, 1.0 - lost / bucket_ms))
    return out


def map_metrics(
    mapping: MetricMapping, samples: Iterable[MetricSample], indicators: Sequence[str] | None = None
) -> dict[str, Series]:
    """SLA-indicator series from raw samples, one per requested indicator."""
    rules = [mapping.rule_for(i) for i in indicators] if indicators is not None else list(mapping.rules)
    ordered = sorted(samples)
    out = {}
    for rule in rules:
        picked = [s for s in ordered if s.metric_name == rule.metric_name]
        t = rule.transform
        if isinstance(t, UptimeFromHeartbeat):
            series = [(ts, v * t.scale) for ts, v in
                      heartbeat_availability([s.timestamp for s in picked], t.gap_threshold_ms, t.bucket_ms)]
        elif isinstance(t, Scale):
            series = [(s.timestamp, s.value * t.factor) for s in picked]
        else:
            series = [(s.timestamp, s.value) for s in picked]
        out[rule.indicator] = series
    return out


# -- compliance -------------------------------------------------------------------------

class SloStatus(str, Enum):
    COMPLIANT = "compliant"
    VIOLATED = "violated"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SloResult:
    slo_index: int
    slo: Slo
    status: SloStatus
    achieved_fraction: float | None
    sample_count: int

    @property
    def compliant(self) -> bool | None:
        if self.status is SloStatus.INDETERMINATE:
            return None
        return self.status is SloStatus.COMPLIANT


@dataclass(frozen=True)
class Violation:
    slo_index: int
    indicator: str
    window: tuple[int, int]
    shortfall: float


@dataclass(frozen=True)
class ComplianceReport:
    sla_id: str
    window: tuple[int, int]
    results: tuple[SloResult, ...]
    violations: tuple[Violation, ...]

    @property
    def compliant(self) -> bool:
        """No SLO violated (indeterminate SLOs do not count against the provider)."""
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "sla_id": self.sla_id,
            "window": {"start": self.window[0], "end": self.window[1]},
            "results": [
                {"slo_index": r.slo_index, "slo": r.slo.to_dict(), "status": r.status.value,
                 "achieved_fraction": r.achieved_fraction, "compliant": r.compliant,
                 "sample_count": r.sample_count}
                for r in self.results
            ],
            "violations": [
                {"slo_index": v.slo_index, "indicator": v.indicator,
                 "window": {"start": v.window[0], "end": v.window[1]}, "shortfall": v.shortfall}
                for v in self.violations
            ],
        }


def _series_for(indicator: str, series: Mapping[str, Series]) -> Series:
    key = canonical_name(indicator)
    for name, values in series.items():
        if canonical_name(name) == key:
            return values
    return []


def evaluate_slo(slo: Slo, values: Sequence[float]) -> tuple[SloStatus, float | None]:
    if not values:
        return SloStatus.INDETERMINATE, None
    met = sum(1 for v in values if slo.comparator.holds(v, slo.target))
    achieved = met / len(values)
    # compare in integer space: met / n >= p / 100
    ok = met * 100 >= slo.percentile * len(values) - 1e-9 * len(values)
    return (SloStatus.COMPLIANT if ok else SloStatus.VIOLATED), achieved


def evaluate_compliance(sla: Sla, series: Mapping[str, Series], window: tuple[int, int]) -> ComplianceReport:
    """Fraction of in-window samples meeting each SLO target, against its percentile.

    The window is half-open ``[start, end)`` in epoch milliseconds. An SLO
    with no samples in the window is indeterminate, never violated.
    """
    start, end = window
    if end <= start:
        raise ValueError(f"empty or inverted window {window}")
    results, violations = [], []
    for i, slo in enumerate(sla.slos):
        values = [v for ts, v in _series_for(slo.indicator, series) if start <= ts < end]
        status, achieved = evaluate_slo(slo, values)
        results.append(SloResult(i, slo, status, achieved, len(values)))
        if status is SloStatus.VIOLATED:
            violations.append(Violation(i, slo.indicator, (start, end), slo.percentile / 100.0 - achieved))
    return ComplianceReport(sla.sla_id, (start, end), tuple(results), tuple(violations))
