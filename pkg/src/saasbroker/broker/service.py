"""The broker: provider registry, consumer profiles, select-then-negotiate, SLA store,
and compliance reports, all persisted through :class:`~saasbroker.broker.store.Store`."""

from __future__ import annotations

import json
import math
import os
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from ..attributes import canonical_name
from ..errors import (
    AttributeMismatch,
    BrokerError,
    ConflictingRecord,
    NoProviders,
    NotFound,
    SelectionFailed,
    WeightSumError,
)
from ..monitoring import HOUR_MS, MetricMapping, SampleStore, evaluate_compliance, map_metrics, parse_record
from ..negotiation import NegotiationSession, UtilityParams, make_strategy, run_negotiation
from ..provider import agent_from_offer
from ..qos import Offer, QosAttributeSpec, select_best
from ..sla import AgreementDefaults, Sla, SlaRequestDoc, build_agreement, directions_for, raw_to_terms, to_requirement
from .store import Store

DATA_DIR_ENV = "SAASBROKER_DATA_DIR"
CONFIG_ENV = "SAASBROKER_CONFIG"


@dataclass
class BrokerConfig:
    threshold: float = 0.65
    max_rounds: int = 10
    # negotiate with the next-ranked provider when the first one fails
    fallback: bool = False
    bucket_ms: int = HOUR_MS
    broker_strategy: dict = field(default_factory=lambda: {"name": "linear", "step": 0.1})
    default_alpha: float = 0.0
    default_beta: float = 1.0
    directions: dict = field(default_factory=dict)
    agreement: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "BrokerConfig":
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "BrokerConfig":
        path = path or os.environ.get(CONFIG_ENV)
        if not path:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ConsumerProfile:
    consumer_id: str
    weights: dict[str, float] = field(default_factory=dict)
    alpha: dict[str, float] = field(default_factory=dict)
    beta: dict[str, float] = field(default_factory=dict)
    threshold: float | None = None
    max_rounds: int | None = None
    preferences: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights:
            total = math.fsum(self.weights.values())
            if abs(total - 1.0) > 1e-9:
                raise WeightSumError(f"profile weights sum to {total!r}")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConsumerProfile":
        fields = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in fields})


@dataclass
class ProviderRecord:
    provider_id: str
    offer: dict[str, float]
    template_bounds: dict[str, list[float]] = field(default_factory=dict)
    # {"name": "linear", "step": 0.2, "best_terms": {...}, "accept_counters": true}
    strategy: dict | None = None
    live: bool = True

    def __post_init__(self):
        self.provider_id = str(self.provider_id)
        self.offer = {k: float(v) for k, v in self.offer.items()}
        if not self.offer:
            raise AttributeMismatch("provider offer is empty")
        if not all(math.isfinite(v) for v in self.offer.values()):
            raise AttributeMismatch(f"provider {self.provider_id}: non-finite offer value")
        for name, b in self.template_bounds.items():
            if len(b) != 2 or b[0] > b[1]:
                raise ValueError(f"template bounds for {name} must be [lo, hi] with lo <= hi")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProviderRecord":
        fields = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in fields})


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class BrokerService:
    """The broker's operations, independent of any transport."""

    def __init__(self, data_dir: str | Path | None = None, config: BrokerConfig | None = None):
        data_dir = data_dir or os.environ.get(DATA_DIR_ENV) or "broker-data"
        self.store = Store(data_dir)
        self.config = config or BrokerConfig.load()

    # -- providers -------------------------------------------------------------------

    def active_attributes(self) -> set[str] | None:
        for rec in self.store.all("providers").values():
            return {canonical_name(k) for k in rec["offer"]}
        return None

    def register_provider(self, record: ProviderRecord | Mapping, update: bool = False) -> str:
        if not isinstance(record, ProviderRecord):
            record = ProviderRecord.from_dict(record)
        payload = record.to_dict()
        existing = self.store.get("providers", record.provider_id)
        if existing == payload:
            return record.provider_id
        if existing is not None and not update:
            raise ConflictingRecord(f"provider {record.provider_id} already registered with a different payload")
        active = self.active_attributes()
        attrs = {canonical_name(k) for k in record.offer}
        if active is not None and attrs != active:
            raise AttributeMismatch(f"offer attributes {sorted(attrs)} differ from registry {sorted(active)}")
        self.store.put("providers", record.provider_id, payload)
        return record.provider_id

    def get_provider(self, provider_id: str) -> dict:
        rec = self.store.get("providers", str(provider_id))
        if rec is None:
            raise NotFound(f"provider {provider_id}")
        return rec

    # -- profiles ------------------------------------------------------------------------

    def set_profile(self, profile: ConsumerProfile | Mapping) -> dict:
        if not isinstance(profile, ConsumerProfile):
            profile = ConsumerProfile.from_dict(profile)
        self.store.put("profiles", profile.consumer_id, profile.to_dict())
        return profile.to_dict()

    def get_profile(self, consumer_id: str) -> dict:
        p = self.store.get("profiles", consumer_id)
        if p is None:
            raise NotFound(f"profile {consumer_id}")
        return p

    # -- policies (key-value stand-in for a policy manager) ------------------------------

    def set_policy(self, key: str, value) -> None:
        self.store.put("policies", key, value)

    def get_policy(self, key: str):
        if key not in self.store.tables["policies"]:
            raise NotFound(f"policy {key}")
        return self.store.get("policies", key)

    # -- select, then negotiate ---------------------------------------------------------------

    def _profile_for(self, consumer_id: str, doc: SlaRequestDoc) -> ConsumerProfile:
        stored = self.store.get("profiles", consumer_id)
        if stored is not None:
            return ConsumerProfile.from_dict(stored)
        profile = ConsumerProfile(consumer_id, weights={e.name: e.weight for e in doc.entries})
        self.store.put("profiles", consumer_id, profile.to_dict())
        return profile

    def _weights(self, profile: ConsumerProfile, doc: SlaRequestDoc) -> dict[str, float]:
        lookup = {canonical_name(k): v for k, v in profile.weights.items()}
        if all(canonical_name(e.name) in lookup for e in doc.entries):
            w = {e.name: float(lookup[canonical_name(e.name)]) for e in doc.entries}
            if abs(math.fsum(w.values()) - 1.0) <= 1e-9:
                return w
        return {e.name: e.weight for e in doc.entries}

    def _utility_params(self, profile: ConsumerProfile, doc, directions, weights) -> dict[str, UtilityParams]:
        alpha = {canonical_name(k): v for k, v in profile.alpha.items()}
        beta = {canonical_name(k): v for k, v in profile.beta.items()}
        return {
            e.name: UtilityParams(
                alpha=float(alpha.get(canonical_name(e.name), self.config.default_alpha)),
                beta=float(beta.get(canonical_name(e.name), self.config.default_beta)),
                weight=weights[e.name],
                direction=directions[e.name],
            )
            for e in doc.entries
        }

    def _offers(self, doc: SlaRequestDoc) -> tuple[list[Offer], dict[str, dict]]:
        records = {pid: r for pid, r in self.store.all("providers").items() if r.get("live", True)}
        if not records:
            raise NoProviders("no providers registered")
        offers = []
        for pid, rec in records.items():
            values = {canonical_name(k): v for k, v in rec["offer"].items()}
            if all(canonical_name(e.name) in values for e in doc.entries):
                offers.append(Offer(pid, {e.name: values[canonical_name(e.name)] for e in doc.entries}))
        if not offers:
            raise SelectionFailed("no registered provider offers every requested attribute")
        return offers, records

    def submit_request(self, consumer_id: str, doc: SlaRequestDoc) -> str:
        """Select the best provider for ``doc``, negotiate with it, store the outcome.

        Returns the session id. One session is opened per request.
        """
        if doc.consumer_id is None:
            doc = SlaRequestDoc(doc.service_name, doc.entries, consumer_id)
        offers, records = self._offers(doc)
        profile = self._profile_for(consumer_id, doc)
        directions = directions_for(doc, self.config.directions)
        weights = self._weights(profile, doc)
        requirement, specs = to_requirement(doc, self.config.directions)
        specs = [QosAttributeSpec(s.name, s.direction, s.unit, weights[s.name]) for s in specs]
        try:
            ranking = select_best(offers, requirement, specs)
        except BrokerError as exc:
            raise SelectionFailed(str(exc)) from exc

        params = self._utility_params(profile, doc, directions, weights)
        threshold = profile.threshold if profile.threshold is not None else self.config.threshold
        max_rounds = profile.max_rounds or self.config.max_rounds
        request_terms = raw_to_terms({e.name: e.preferred_value for e in doc.entries}, doc, directions)
        by_id = {o.provider_id: o for o in offers}

        session_id = uuid.uuid4().hex
        candidates = [e.provider_id for e in ranking.entries]
        if not self.config.fallback:
            candidates = candidates[:1]

        attempts, sla_id, outcome = [], None, None
        for n, pid in enumerate(candidates):
            rec = records[pid]
            strat = dict(rec.get("strategy") or {"name": "constant"})
            best = strat.pop("best_terms", None)
            accept_counters = strat.pop("accept_counters", True)
            agent = agent_from_offer(
                by_id[pid], doc, directions, best_terms=best, strategy=strat,
                template_bounds={k: tuple(v) for k, v in rec.get("template_bounds", {}).items()},
                accept_counters=accept_counters,
            )
            session = NegotiationSession(
                params=params, threshold=threshold, max_rounds=max_rounds,
                strategy=make_strategy(self.config.broker_strategy),
                session_id=session_id if n == 0 else f"{session_id}-{n}",
            )
            result = run_negotiation(session, agent, request_terms=request_terms, request_doc=doc)
            attempt = {"provider_id": pid, **result.to_dict()}
            outcome = result.outcome
            if result.agreed:
                sla = build_agreement(result, doc, pid, directions,
                                      AgreementDefaults.from_dict(self.config.agreement))
                sla_id = sla.sla_id
                self.store.put("slas", sla_id, sla.to_dict())
                attempt["sla_id"] = sla_id
            attempts.append(attempt)
            if result.agreed:
                break

        record = {
            "session_id": session_id,
            "consumer_id": consumer_id,
            "created": _now(),
            "request": doc.to_dict(),
            "ranking": ranking.to_dict(percent=True),
            "selected_provider": candidates[0],
            "provider_id": attempts[-1]["provider_id"],
            "state": attempts[-1]["state"],
            "outcome": outcome.value,
            "sla_id": sla_id,
            "attempts": attempts,
        }
        self.store.put("sessions", session_id, record)
        return session_id

    def get_session(self, session_id: str) -> dict:
        s = self.store.get("sessions", session_id)
        if s is None:
            raise NotFound(f"session {session_id}")
        return s

    def get_sla(self, sla_id: str) -> Sla:
        d = self.store.get("slas", sla_id)
        if d is None:
            raise NotFound(f"SLA {sla_id}")
        return Sla.from_dict(d)

    # -- monitoring ------------------------------------------------------------------------

    def set_metric_mapping(self, sla_id: str, mapping: MetricMapping | Mapping) -> None:
        self.get_sla(sla_id)
        if not isinstance(mapping, MetricMapping):
            mapping = MetricMapping.from_dict(mapping)
        self.store.put("mappings", sla_id, mapping.to_dict())

    def post_metrics(self, sla_id: str, records: Iterable) -> dict:
        """Store well-formed, previously unseen samples; returns the ingest counts."""
        self.get_sla(sla_id)
        existing = SampleStore(parse_record(r) for r in self.store.get("metrics", sla_id, []))
        report = existing.ingest(records)
        if report.added:
            self.store.extend("metrics", sla_id, [s.to_dict() for s in report.added])
        return {"accepted": report.accepted, "duplicates": report.duplicates,
                "malformed": report.malformed, "errors": report.errors}

    def get_compliance(self, sla_id: str, start: int | None = None, end: int | None = None) -> dict:
        sla = self.get_sla(sla_id)
        samples = SampleStore(parse_record(r) for r in list(self.store.get("metrics", sla_id, []))).samples()
        stored = self.store.get("mappings", sla_id)
        mapping = MetricMapping.from_dict(stored) if stored else MetricMapping.identity_for(sla)
        series = map_metrics(mapping, samples)
        if start is None:
            start = samples[0].timestamp if samples else 0
        if end is None:
            end = samples[-1].timestamp + 1 if samples else start + 1
        return evaluate_compliance(sla, series, (int(start), int(end))).to_dict()
