"""SLA request documents, agreements and their service-level objectives.

Quality requirements arrive as XML::

    <service name="ProjectManagementService">
      <QoSAttributes>
        <QoSAttribute>
          <name>Availability</name>
          <min-value>97</min-value> <max-value>100</max-value>
          <preferred-value>99.998</preferred-value>
          <unit>percentage</unit> <weight>0.3</weight>
        </QoSAttribute>
        ...

JSON is the canonical storage format for both requests and agreements.
"""

from __future__ import annotations

import math
import re
import uuid
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Mapping

from .attributes import Direction, canonical_name, resolve_direction
from .errors import (
    AttributeMismatch,
    NotAgreed,
    RangeError,
    SchemaError,
    WeightSumError,
    XmlSyntaxError,
)
from .qos import QosAttributeSpec, Requirement

WEIGHT_TOLERANCE = 1e-9
THIRTY_DAYS = 30 * 24 * 3600.0


@dataclass(frozen=True)
class QosRequirementEntry:
    name: str
    min_value: float
    max_value: float
    preferred_value: float
    unit: str = ""
    weight: float = 0.0

    def __post_init__(self):
        if self.min_value > self.max_value:
            raise RangeError(f"{self.name}: min-value {self.min_value} > max-value {self.max_value}")
        if not self.min_value <= self.preferred_value <= self.max_value:
            raise RangeError(
                f"{self.name}: preferred-value {self.preferred_value} outside [{self.min_value}, {self.max_value}]"
            )
        if not 0.0 <= self.weight <= 1.0:
            raise RangeError(f"{self.name}: weight {self.weight} outside [0, 1]")

    @property
    def span(self) -> float:
        return self.max_value - self.min_value

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "min_value": self.min_value,
            "max_value": self.max_value,
            "preferred_value": self.preferred_value,
            "unit": self.unit,
            "weight": self.weight,
        }


@dataclass(frozen=True)
class SlaRequestDoc:
    service_name: str
    entries: tuple[QosRequirementEntry, ...]
    consumer_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [canonical_name(e.name) for e in self.entries]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate attribute names: {[e.name for e in self.entries]}")
        total = math.fsum(e.weight for e in self.entries)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise WeightSumError(f"attribute weights sum to {total!r}, expected 1")

    def entry(self, name: str) -> QosRequirementEntry:
        key = canonical_name(name)
        for e in self.entries:
            if canonical_name(e.name) == key:
                return e
        raise AttributeMismatch(f"request has no attribute {name!r}")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "service_name": self.service_name,
            "consumer_id": self.consumer_id,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SlaRequestDoc":
        try:
            entries = tuple(
                QosRequirementEntry(
                    name=str(e["name"]),
                    min_value=float(e["min_value"]),
                    max_value=float(e["max_value"]),
                    preferred_value=float(e["preferred_value"]),
                    unit=str(e.get("unit", "")),
                    weight=float(e["weight"]),
                )
                for e in d["entries"]
            )
            return cls(str(d["service_name"]), entries, d.get("consumer_id"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed SLA request: missing {exc}") from None


# -- XML ingestion -----------------------------------------------------------------

_ELISION = re.compile(rb"^[ \t]*(\.\.\.|\xe2\x80\xa6)[ \t]*\r?\n", re.MULTILINE)
_FIELDS = ("name", "min-value", "max-value", "preferred-value", "unit", "weight")
_REQUIRED = ("name", "min-value", "max-value", "preferred-value", "weight")


def _strip_prolog_elision(document: bytes) -> bytes:
    # documents copied from prose often carry a "..." line before the root
    root = document.find(b"<service")
    if root <= 0:
        return document
    return _ELISION.sub(b"", document[:root]) + document[root:]


def parse_sla_request_xml(document: bytes | str, consumer_id: str | None = None) -> SlaRequestDoc:
    """Parse a ``<service>`` quality-requirements document."""
    if isinstance(document, str):
        document = document.encode("utf-8")
    try:
        root = ET.fromstring(_strip_prolog_elision(document))
    except ET.ParseError as exc:
        raise XmlSyntaxError(str(exc)) from None
    if root.tag != "service":
        raise SchemaError(f"root element must be <service>, got <{root.tag}>")
    attrs = root.find("QoSAttributes")
    if attrs is None:
        raise SchemaError("<service> has no <QoSAttributes>")
    entries = []
    for i, node in enumerate(attrs.findall("QoSAttribute"), 1):
        values = {}
        for tag in _FIELDS:
            child = node.find(tag)
            if child is None or child.text is None or not child.text.strip():
                if tag in _REQUIRED:
                    raise SchemaError(f"QoSAttribute #{i} is missing <{tag}>")
                values[tag] = ""
                continue
            values[tag] = child.text.strip()
        try:
            numbers = {t: float(values[t]) for t in ("min-value", "max-value", "preferred-value", "weight")}
        except ValueError as exc:
            raise SchemaError(f"QoSAttribute #{i} ({values['name']}): {exc}") from None
        entries.append(
            QosRequirementEntry(
                name=values["name"],
                min_value=numbers["min-value"],
                max_value=numbers["max-value"],
                preferred_value=numbers["preferred-value"],
                unit=values["unit"],
                weight=numbers["weight"],
            )
        )
    if not entries:
        raise SchemaError("<QoSAttributes> contains no <QoSAttribute>")
    return SlaRequestDoc(
        service_name=root.get("name", ""),
        entries=tuple(entries),
        consumer_id=consumer_id if consumer_id is not None else root.get("consumer"),
    )


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def to_xml(doc: SlaRequestDoc) -> bytes:
    """Canonical XML form; parsing it back yields an equal document."""
    root = ET.Element("service", {"name": doc.service_name})
    if doc.consumer_id is not None:
        root.set("consumer", doc.consumer_id)
    attrs = ET.SubElement(root, "QoSAttributes")
    for e in doc.entries:
        node = ET.SubElement(attrs, "QoSAttribute")
        for tag, value in (
            ("name", e.name),
            ("min-value", _num(e.min_value)),
            ("max-value", _num(e.max_value)),
            ("preferred-value", _num(e.preferred_value)),
            ("unit", e.unit),
            ("weight", _num(e.weight)),
        ):
            ET.SubElement(node, tag).text = value
    ET.indent(root)
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True) + b"\n"


# -- bridges to selection and negotiation ------------------------------------------------

def directions_for(doc: SlaRequestDoc, overrides: Mapping[str, Direction | str] | None = None) -> dict[str, Direction]:
    return {e.name: resolve_direction(e.name, overrides) for e in doc.entries}


def to_requirement(
    doc: SlaRequestDoc, overrides: Mapping[str, Direction | str] | None = None
) -> tuple[Requirement, list[QosAttributeSpec]]:
    """Preferred values become the requirement vector; weights and units carry over."""
    dirs = directions_for(doc, overrides)
    req = Requirement({e.name: e.preferred_value for e in doc.entries})
    specs = [QosAttributeSpec(e.name, dirs[e.name], e.unit, e.weight) for e in doc.entries]
    return req, specs


def _entries_for(terms: Mapping[str, float], doc: SlaRequestDoc) -> list[tuple[str, QosRequirementEntry]]:
    out = []
    for name in terms:
        try:
            out.append((name, doc.entry(name)))
        except AttributeMismatch:
            raise AttributeMismatch(f"term {name!r} has no entry in the request") from None
    return out


def denormalize_terms(
    terms: Mapping[str, float],
    doc: SlaRequestDoc,
    directions: Mapping[str, Direction | str] | None = None,
) -> dict[str, float]:
    """Map satisfaction levels (1 = best) back to raw units over the doc's [min, max]."""
    out = {}
    for name, entry in _entries_for(terms, doc):
        t = terms[name]
        if resolve_direction(name, directions) is Direction.UTILITY:
            out[name] = entry.min_value + t * entry.span
        else:
            out[name] = entry.max_value - t * entry.span
    return out


def normalize_raw(
    raw: Mapping[str, float],
    doc: SlaRequestDoc,
    directions: Mapping[str, Direction | str] | None = None,
) -> dict[str, float]:
    """Inverse of :func:`denormalize_terms`, clamped to [0, 1]."""
    out = {}
    for name, entry in _entries_for(raw, doc):
        if entry.span == 0:
            out[name] = 1.0
            continue
        if resolve_direction(name, directions) is Direction.UTILITY:
            t = (raw[name] - entry.min_value) / entry.span
        else:
            t = (entry.max_value - raw[name]) / entry.span
        out[name] = min(1.0, max(0.0, t))
    return out


def _as_satisfaction(terms, directions):
    return {
        k: (v if resolve_direction(k, directions) is Direction.UTILITY else 1.0 - v)
        for k, v in terms.items()
    }


def terms_to_raw(
    terms: Mapping[str, float],
    doc: SlaRequestDoc,
    directions: Mapping[str, Direction | str] | None = None,
) -> dict[str, float]:
    """Negotiation terms to raw units.

    Negotiation carries cost-driven attributes as levels where 0 is the best
    (lowest) value, so both directions map as ``min + t * (max - min)``.
    """
    return denormalize_terms(_as_satisfaction(terms, directions), doc, directions)


def raw_to_terms(
    raw: Mapping[str, float],
    doc: SlaRequestDoc,
    directions: Mapping[str, Direction | str] | None = None,
) -> dict[str, float]:
    return _as_satisfaction(normalize_raw(raw, doc, directions), directions)


# -- agreements ---------------------------------------------------------------------------

class Comparator(str, Enum):
    GE = ">="
    LE = "<="

    def holds(self, value: float, target: float) -> bool:
        return value >= target if self is Comparator.GE else value <= target


@dataclass(frozen=True)
class Slo:
    indicator: str
    comparator: Comparator
    target: float
    percentile: float = 95.0
    window_seconds: float = THIRTY_DAYS

    def __post_init__(self):
        object.__setattr__(self, "comparator", Comparator(self.comparator))
        if not 0.0 < self.percentile <= 100.0:
            raise RangeError(f"percentile {self.percentile} outside (0, 100]")
        if self.window_seconds <= 0:
            raise RangeError("SLO window must be positive")

    def to_dict(self) -> dict:
        return {
            "indicator": self.indicator,
            "comparator": self.comparator.value,
            "target": self.target,
            "percentile": self.percentile,
            "window_seconds": self.window_seconds,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Slo":
        return cls(d["indicator"], Comparator(d["comparator"]), float(d["target"]),
                   float(d.get("percentile", 95.0)), float(d.get("window_seconds", THIRTY_DAYS)))


@dataclass(frozen=True)
class Penalty:
    slo_index: int
    description: str
    amount: float


@dataclass(frozen=True)
class Sla:
    sla_id: str
    consumer_id: str
    provider_id: str
    activation_time: datetime
    scope: str
    slos: tuple[Slo, ...]
    validity: tuple[datetime, datetime]
    cost: float = 0.0
    currency: str = "USD"
    penalties: tuple[Penalty, ...] = ()
    exclusions: tuple[str, ...] = ()
    assessment_method: str = ""
    session_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "slos", tuple(self.slos))
        object.__setattr__(self, "penalties", tuple(self.penalties))
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        start, end = self.validity
        if not start < end:
            raise RangeError(f"validity period start {start} is not before end {end}")
        for p in self.penalties:
            if not 0 <= p.slo_index < len(self.slos):
                raise RangeError(f"penalty references missing SLO #{p.slo_index}")

    @property
    def parties(self) -> tuple[str, str]:
        return self.consumer_id, self.provider_id

    def to_dict(self) -> dict:
        return {
            "sla_id": self.sla_id,
            "session_id": self.session_id,
            "parties": {"consumer_id": self.consumer_id, "provider_id": self.provider_id},
            "activation_time": self.activation_time.isoformat(),
            "scope": self.scope,
            "slos": [s.to_dict() for s in self.slos],
            "penalties": [
                {"slo_index": p.slo_index, "description": p.description, "amount": p.amount} for p in self.penalties
            ],
            "exclusions": list(self.exclusions),
            "validity": {"start": self.validity[0].isoformat(), "end": self.validity[1].isoformat()},
            "cost": {"amount": self.cost, "currency": self.currency},
            "assessment_method": self.assessment_method,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Sla":
        try:
            return cls(
                sla_id=d["sla_id"],
                session_id=d.get("session_id"),
                consumer_id=d["parties"]["consumer_id"],
                provider_id=d["parties"]["provider_id"],
                activation_time=datetime.fromisoformat(d["activation_time"]),
                scope=d.get("scope", ""),
                slos=tuple(Slo.from_dict(s) for s in d["slos"]),
                penalties=tuple(Penalty(int(p["slo_index"]), p["description"], float(p["amount"]))
                                for p in d.get("penalties", [])),
                exclusions=tuple(d.get("exclusions", [])),
                validity=(datetime.fromisoformat(d["validity"]["start"]),
                          datetime.fromisoformat(d["validity"]["end"])),
                cost=float(d.get("cost", {}).get("amount", 0.0)),
                currency=d.get("cost", {}).get("currency", "USD"),
                assessment_method=d.get("assessment_method", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"malformed SLA: missing {exc}") from None


@dataclass(frozen=True)
class AgreementDefaults:
    """Values the negotiation does not settle; all configurable."""

    percentile: float = 95.0
    window_seconds: float = THIRTY_DAYS
    validity_days: float = 365.0
    penalty_description: str = "service credit"
    penalty_amount: float = 10.0
    currency: str = "USD"
    exclusions: tuple[str, ...] = ("scheduled maintenance announced 48h in advance",)
    assessment_method: str = "fraction of monitored samples meeting the target within each window"

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "AgreementDefaults":
        if not d:
            return cls()
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in d.items() if k in known}
        if "exclusions" in kwargs:
            kwargs["exclusions"] = tuple(kwargs["exclusions"])
        return cls(**kwargs)


def build_agreement(
    negotiation,
    doc: SlaRequestDoc,
    provider_id: str,
    directions: Mapping[str, Direction | str] | None = None,
    defaults: AgreementDefaults | None = None,
    now: datetime | None = None,
    sla_id: str | None = None,
) -> Sla:
    """Turn a concluded negotiation into an SLA with one SLO per negotiated attribute.

    ``negotiation`` is a :class:`~saasbroker.negotiation.NegotiationSession` or
    a :class:`~saasbroker.negotiation.NegotiationResult`.
    """
    from .negotiation import Outcome

    session = getattr(negotiation, "session", negotiation)
    if session.outcome is not Outcome.AGREEMENT or session.agreed_terms is None:
        raise NotAgreed(f"session {session.session_id} ended with {session.outcome}")
    defaults = defaults or AgreementDefaults()
    now = now or datetime.now(timezone.utc)
    raw = terms_to_raw(session.agreed_terms, doc, directions)

    slos = []
    for name, value in raw.items():
        direction = resolve_direction(name, directions)
        comparator = Comparator.GE if direction is Direction.UTILITY else Comparator.LE
        slos.append(Slo(name, comparator, value, defaults.percentile, defaults.window_seconds))
    # negotiated price if cost was a term, else what the consumer asked for
    cost = next((v for k, v in raw.items() if canonical_name(k) == "cost"), None)
    if cost is None:
        cost = next((e.preferred_value for e in doc.entries if canonical_name(e.name) == "cost"), 0.0)
    penalties = tuple(Penalty(i, f"{defaults.penalty_description} for {s.indicator}", defaults.penalty_amount)
                      for i, s in enumerate(slos))
    return Sla(
        sla_id=sla_id or uuid.uuid4().hex,
        session_id=session.session_id,
        consumer_id=doc.consumer_id or "anonymous",
        provider_id=str(provider_id),
        activation_time=now,
        scope=doc.service_name,
        slos=tuple(slos),
        validity=(now, now + timedelta(days=defaults.validity_days)),
        cost=cost,
        currency=defaults.currency,
        penalties=penalties,
        exclusions=defaults.exclusions,
        assessment_method=defaults.assessment_method,
    )
