"""Simulated SaaS providers for the bargaining protocol.

A provider opens at its advertised terms and concedes toward ``best_terms``,
the most broker-favourable point it is willing to sign. How fast it concedes
is a :mod:`~saasbroker.negotiation` concession strategy. None of the provider
logic here is prescribed by the protocol beyond its message obligations; it is
simulation scaffolding for exercising the broker.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .attributes import Direction, canonical_name
from .errors import ProtocolViolation
from .negotiation import (
    ConcessionStrategy,
    ConstantConcession,
    MessageKind,
    Outcome,
    Party,
    ProposalMessage,
    State,
    interpolate,
    make_strategy,
)
from .qos import Offer
from .sla import SlaRequestDoc, raw_to_terms


@dataclass(frozen=True)
class ValidationResult:
    accepted: bool
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.accepted


@dataclass(frozen=True)
class ProviderAgent:
    provider_id: str
    opening_terms: Mapping[str, float]
    best_terms: Mapping[str, float]
    directions: Mapping[str, Direction]
    strategy: ConcessionStrategy = field(default_factory=ConstantConcession)
    template_bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    advertised_offer: Offer | None = None
    # echo a broker counter that lies within best_terms (a deal)
    accept_counters: bool = True

    def __post_init__(self):
        if self.opening_terms.keys() != self.best_terms.keys() or self.opening_terms.keys() != self.directions.keys():
            raise ValueError("opening_terms, best_terms and directions must cover the same attributes")
        for name, v in list(self.best_terms.items()) + list(self.opening_terms.items()):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"term {name}={v} outside [0, 1]")
        for name, (lo, hi) in self.template_bounds.items():
            if lo > hi:
                raise ValueError(f"template bounds for {name}: {lo} > {hi}")
        object.__setattr__(self, "directions", {k: Direction.parse(v) for k, v in self.directions.items()})

    def within_ceiling(self, terms: Mapping[str, float]) -> bool:
        """True when ``terms`` ask no more of the provider than ``best_terms``."""
        for name, best in self.best_terms.items():
            v = terms[name]
            if self.directions[name] is Direction.UTILITY and v > best:
                return False
            if self.directions[name] is Direction.COST and v < best:
                return False
        return True

    def clamp(self, terms: Mapping[str, float]) -> dict[str, float]:
        out = {}
        for name, v in terms.items():
            best = self.best_terms[name]
            if self.directions[name] is Direction.UTILITY:
                out[name] = min(v, best)
            else:
                out[name] = max(v, best)
        return out

    def open_session(self, request_doc: SlaRequestDoc | None = None) -> "ProviderSession":
        return ProviderSession(self, request_doc)

    def to_dict(self) -> dict:
        return {
            "provider_id": self.provider_id,
            "opening_terms": dict(self.opening_terms),
            "best_terms": dict(self.best_terms),
            "directions": {k: v.value for k, v in self.directions.items()},
            "strategy": self.strategy.to_dict(),
            "template_bounds": {k: list(v) for k, v in self.template_bounds.items()},
            "accept_counters": self.accept_counters,
        }


def validate_request(agent: ProviderAgent, doc: SlaRequestDoc) -> ValidationResult:
    """Accept iff each requested [min, max] interval meets the agent's template.

    Attributes without a template entry are unconstrained.
    """
    bounds = {canonical_name(k): v for k, v in agent.template_bounds.items()}
    reasons = []
    for entry in doc.entries:
        tb = bounds.get(canonical_name(entry.name))
        if tb is None:
            continue
        lo, hi = tb
        if entry.max_value < lo or entry.min_value > hi:
            reasons.append(entry.name)
    return ValidationResult(not reasons, tuple(reasons))


def respond(agent: ProviderAgent, incoming: ProposalMessage, round: int) -> ProposalMessage:
    """Provider's next Proposal after ``round`` earlier proposals.

    A broker counter already within the provider's ceiling is echoed back
    unchanged, which the broker reads as the provider meeting its terms.
    """
    if incoming.kind not in (MessageKind.SLA_REQUEST, MessageKind.COUNTER_PROPOSAL):
        raise ProtocolViolation("provider", incoming, "provider only answers requests and counters")
    if (
        agent.accept_counters
        and incoming.kind is MessageKind.COUNTER_PROPOSAL
        and incoming.terms.keys() == agent.best_terms.keys()
        and agent.within_ceiling(incoming.terms)
    ):
        terms = dict(incoming.terms)
    else:
        terms = agent.clamp(interpolate(agent.opening_terms, agent.best_terms, agent.strategy.fraction(round)))
    return ProposalMessage(MessageKind.PROPOSAL, round + 1, Party.PROVIDER, terms)


@dataclass(frozen=True)
class ProviderSession:
    """Provider-side protocol state.

    Idle -> AwaitingProposal after answering the request (or Failed on a
    template mismatch); each broker counter is answered with a new Proposal;
    a broker confirmation is acknowledged and ends in Agreed.
    """

    agent: ProviderAgent
    request_doc: SlaRequestDoc | None = None
    state: State = State.IDLE
    proposals_sent: int = 0
    outcome: Outcome | None = None
    rejection: tuple[str, ...] = ()

    def step(self, incoming: ProposalMessage):
        if self.state.terminal:
            raise ProtocolViolation(self.state, incoming, "provider session concluded")
        if incoming.sender is not Party.BROKER:
            raise ProtocolViolation(self.state, incoming, "provider received its own message")
        kind = incoming.kind

        if kind is MessageKind.WITHDRAW or kind is MessageKind.REJECT:
            return replace(self, state=State.FAILED, outcome=Outcome.WITHDRAWN), None

        if kind is MessageKind.SLA_REQUEST and self.state is State.IDLE:
            if self.request_doc is not None:
                verdict = validate_request(self.agent, self.request_doc)
                if not verdict:
                    reply = ProposalMessage(
                        MessageKind.REJECT, incoming.round, Party.PROVIDER,
                        annotations={"reason": "outside SLA template", "attributes": list(verdict.reasons)},
                    )
                    return replace(self, state=State.FAILED, outcome=Outcome.REJECTED, rejection=verdict.reasons), reply
            reply = respond(self.agent, incoming, self.proposals_sent)
            return replace(self, state=State.AWAITING_PROPOSAL, proposals_sent=self.proposals_sent + 1), reply

        if kind is MessageKind.COUNTER_PROPOSAL and self.state is State.AWAITING_PROPOSAL:
            reply = respond(self.agent, incoming, self.proposals_sent)
            return replace(self, proposals_sent=self.proposals_sent + 1), reply

        if kind is MessageKind.SLA_CONFIRMATION and self.state is State.AWAITING_PROPOSAL:
            reply = ProposalMessage(MessageKind.SLA_CONFIRMATION, incoming.round, Party.PROVIDER)
            return replace(self, state=State.AGREED, outcome=Outcome.AGREEMENT), reply

        raise ProtocolViolation(self.state, incoming)


def agent_from_offer(
    offer: Offer,
    doc: SlaRequestDoc,
    directions: Mapping[str, Direction],
    best_terms: Mapping[str, float] | None = None,
    strategy=None,
    template_bounds: Mapping[str, tuple[float, float]] | None = None,
    accept_counters: bool = True,
) -> ProviderAgent:
    """Provider whose opening terms are its advertised offer mapped onto the doc's bounds."""
    raw = {}
    values = {canonical_name(k): v for k, v in offer.values.items()}
    for entry in doc.entries:
        raw[entry.name] = values[canonical_name(entry.name)]
    opening = raw_to_terms(raw, doc, directions)
    dirs = {e.name: Direction.parse(directions[e.name]) for e in doc.entries}
    if best_terms is None:
        best = dict(opening)
    else:
        lookup = {canonical_name(k): v for k, v in best_terms.items()}
        best = {e.name: float(lookup.get(canonical_name(e.name), opening[e.name])) for e in doc.entries}
    return ProviderAgent(
        provider_id=str(offer.provider_id),
        opening_terms=opening,
        best_terms=best,
        directions=dirs,
        strategy=make_strategy(strategy) if strategy is not None else ConstantConcession(),
        template_bounds=dict(template_bounds or {}),
        advertised_offer=offer,
        accept_counters=accept_counters,
    )


def agent_from_dict(d: Mapping) -> ProviderAgent:
    """Agent from its JSON form (see ``ProviderAgent.to_dict``)."""
    offer = None
    if d.get("advertised_offer"):
        offer = Offer(str(d["provider_id"]), {k: float(v) for k, v in d["advertised_offer"].items()})
    opening = {k: float(v) for k, v in d["opening_terms"].items()}
    return ProviderAgent(
        provider_id=str(d["provider_id"]),
        opening_terms=opening,
        best_terms={k: float(v) for k, v in d.get("best_terms", opening).items()},
        directions={k: Direction.parse(v) for k, v in d["directions"].items()},
        strategy=make_strategy(d.get("strategy", "constant")),
        template_bounds={k: (float(v[0]), float(v[1])) for k, v in (d.get("template_bounds") or {}).items()},
        advertised_offer=offer,
        accept_counters=bool(d.get("accept_counters", True)),
    )


def load_fleet(path: str | Path) -> list[dict]:
    """Read a provider fleet file.

    The file holds ``{"providers": [...]}`` (or a bare list). Each provider
    entry has ``provider_id`` and ``offer`` (raw attribute values), optionally
    ``template_bounds``, ``best_terms`` and ``strategy``. ``"offers_csv"`` at
    the top level pulls offers from a CSV file relative to the fleet file.
    """
    from .qos import read_offers_csv

    path = Path(path)
    data = json.loads(path.read_text())
    entries = data if isinstance(data, list) else list(data.get("providers", []))
    if isinstance(data, dict) and data.get("offers_csv"):
        offers, _ = read_offers_csv(path.parent / data["offers_csv"])
        known = {str(e.get("provider_id")) for e in entries}
        defaults = data.get("defaults", {})
        for o in offers:
            if o.provider_id not in known:
                entries.append({**defaults, "provider_id": o.provider_id, "offer": dict(o.values)})
    for e in entries:
        if "provider_id" not in e or "offer" not in e:
            raise ValueError(f"{path}: every provider needs provider_id and offer")
        if not all(math.isfinite(float(v)) for v in e["offer"].values()):
            raise ValueError(f"{path}: provider {e['provider_id']} has non-finite offer values")
        e["provider_id"] = str(e["provider_id"])
    return entries
