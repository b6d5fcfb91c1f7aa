"""Utility-based bargaining between the broker and a selected provider.

Terms travel normalised to [0, 1]. For a utility-driven attribute (availability)
the broker wants the term high; for a cost-driven attribute (response time,
price) the term is a *level* where 0 is the cheapest/fastest, so the broker
wants it low. The broker's ideal point is therefore 1 for every utility-driven
attribute and 0 for every cost-driven one.

Per-attribute utilities::

    gain(x) = x**b * (1 + a) / (1 + a * x**b)     # utility-driven
    cost(y) = (1 - y**b) / (1 + a * y**b)         # cost-driven

with shape ``a`` >= 0 and sensitivity ``b`` >= 0 (``b = 0`` means the consumer
is indifferent). The global utility is their weighted sum.

The broker side of the protocol is a small state machine driven by
:func:`step`; :func:`run_negotiation` plays it against a provider until a
terminal state.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Protocol

from .attributes import Direction
from .errors import AttributeMismatch, DomainError, ProtocolViolation, WeightSumError

DEFAULT_THRESHOLD = 0.65
DEFAULT_MAX_ROUNDS = 10
WEIGHT_TOLERANCE = 1e-9


class Party(str, Enum):
    BROKER = "broker"
    PROVIDER = "provider"


class MessageKind(str, Enum):
    SLA_REQUEST = "SlaRequest"
    PROPOSAL = "Proposal"
    COUNTER_PROPOSAL = "CounterProposal"
    SLA_CONFIRMATION = "SlaConfirmation"
    REJECT = "Reject"
    WITHDRAW = "Withdraw"


TERM_KINDS = frozenset({MessageKind.SLA_REQUEST, MessageKind.PROPOSAL, MessageKind.COUNTER_PROPOSAL})


class State(str, Enum):
    IDLE = "Idle"
    REQUEST_SENT = "RequestSent"
    AWAITING_PROPOSAL = "AwaitingProposal"
    EVALUATING = "Evaluating"
    COUNTER_SENT = "CounterSent"
    CONFIRMING = "Confirming"
    AGREED = "Agreed"
    FAILED = "Failed"

    @property
    def terminal(self) -> bool:
        return self in (State.AGREED, State.FAILED)


class Outcome(str, Enum):
    AGREEMENT = "Agreement"
    MAX_ROUNDS_EXCEEDED = "MaxRoundsExceeded"
    REJECTED = "Rejected"
    WITHDRAWN = "Withdrawn"


class Decision(str, Enum):
    ACCEPT = "Accept"
    COUNTER = "Counter"
    WITHDRAW = "Withdraw"


# -- utility functions ------------------------------------------------------------

def _check(v: float, alpha: float, beta: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"term {v!r} outside [0, 1]")
    if alpha < 0 or beta < 0:
        raise DomainError(f"alpha and beta must be >= 0 (alpha={alpha!r}, beta={beta!r})")


def utility_gain(x: float, alpha: float, beta: float) -> float:
    """Utility of a utility-driven term ``x``; 0 at x=0, 1 at x=1."""
    _check(x, alpha, beta)
    t = x**beta
    return t * (1.0 + alpha) / (1.0 + alpha * t)


def utility_cost(y: float, alpha: float, beta: float) -> float:
    """Utility of a cost-driven level ``y``; 1 at y=0, 0 at y=1."""
    _check(y, alpha, beta)
    t = y**beta
    return (1.0 - t) / (1.0 + alpha * t)


@dataclass(frozen=True)
class UtilityParams:
    """Consumer preferences for one negotiated attribute."""

    alpha: float
    beta: float
    weight: float
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        if self.alpha < 0 or self.beta < 0:
            raise DomainError(f"alpha and beta must be >= 0, got {self.alpha}, {self.beta}")
        if not 0.0 <= self.weight <= 1.0:
            raise WeightSumError(f"weight {self.weight} outside [0, 1]")

    def utility(self, term: float) -> float:
        if self.direction is Direction.UTILITY:
            return utility_gain(term, self.alpha, self.beta)
        return utility_cost(term, self.alpha, self.beta)

    @property
    def ideal(self) -> float:
        return 1.0 if self.direction is Direction.UTILITY else 0.0

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "weight": self.weight, "direction": self.direction.value}


def check_params(params: Mapping[str, UtilityParams]) -> None:
    total = math.fsum(p.weight for p in params.values())
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise WeightSumError(f"weights sum to {total!r}, expected 1")


def global_utility(terms: Mapping[str, float], params: Mapping[str, UtilityParams]) -> float:
    """Weighted additive utility of a full set of terms."""
    if terms.keys() != params.keys():
        raise AttributeMismatch(f"terms {sorted(terms)} do not match attributes {sorted(params)}")
    check_params(params)
    return math.fsum(p.weight * p.utility(terms[name]) for name, p in params.items())


def ideal_terms(params: Mapping[str, UtilityParams]) -> dict[str, float]:
    return {name: p.ideal for name, p in params.items()}


# -- concession strategies ----------------------------------------------------------

class ConcessionStrategy(Protocol):
    """Maps a round number to how far (0..1) a party has moved toward its target."""

    def fraction(self, round: int) -> float: ...

    def to_dict(self) -> dict: ...


@dataclass(frozen=True)
class ConstantConcession:
    name = "constant"

    def fraction(self, round: int) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True)
class LinearConcession:
    step: float = 0.1
    name = "linear"

    def __post_init__(self):
        if not 0.0 <= self.step <= 1.0:
            raise ValueError(f"concession step must be in [0, 1], got {self.step}")

    def fraction(self, round: int) -> float:
        return min(1.0, max(0, round) * self.step)

    def to_dict(self) -> dict:
        return {"name": self.name, "step": self.step}


@dataclass(frozen=True)
class BoulwareConcession:
    """Holds out early and concedes late: the linear fraction raised to ``exponent`` > 1."""

    step: float = 0.1
    exponent: float = 3.0
    name = "boulware"

    def __post_init__(self):
        if not 0.0 <= self.step <= 1.0:
            raise ValueError(f"concession step must be in [0, 1], got {self.step}")
        if self.exponent < 1.0:
            raise ValueError("boulware exponent must be >= 1")

    def fraction(self, round: int) -> float:
        return min(1.0, max(0, round) * self.step) ** self.exponent

    def to_dict(self) -> dict:
        return {"name": self.name, "step": self.step, "exponent": self.exponent}


STRATEGIES = {
    "constant": ConstantConcession,
    "linear": LinearConcession,
    "boulware": BoulwareConcession,
}


def make_strategy(spec: "Mapping | str | ConcessionStrategy | None") -> ConcessionStrategy:
    """Build a strategy from ``{"name": "linear", "step": 0.2}`` or a bare name."""
    if spec is None:
        return LinearConcession()
    if hasattr(spec, "fraction"):
        return spec  # already a strategy
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", "linear")
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    return cls(**spec)


def interpolate(start: Mapping[str, float], target: Mapping[str, float], fraction: float) -> dict[str, float]:
    f = min(1.0, max(0.0, fraction))
    return {k: min(1.0, max(0.0, start[k] + f * (target[k] - start[k]))) for k in start}


# -- messages and sessions -----------------------------------------------------------

@dataclass(frozen=True)
class ProposalMessage:
    kind: MessageKind
    round: int
    sender: Party
    terms: Mapping[str, float] | None = None
    annotations: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", MessageKind(self.kind))
        object.__setattr__(self, "sender", Party(self.sender))
        if self.round < 0:
            raise ValueError("round must be >= 0")
        if self.kind in TERM_KINDS:
            if self.terms is None:
                raise ValueError(f"{self.kind.value} must carry terms")
            for k, v in self.terms.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"term {k}={v} outside [0, 1]")
        elif self.terms is not None:
            raise ValueError(f"{self.kind.value} must not carry terms")

    def to_dict(self) -> dict:
        out = {"sender": self.sender.value, "kind": self.kind.value, "round": self.round}
        out["terms"] = dict(self.terms) if self.terms is not None else None
        if self.annotations:
            out["annotations"] = dict(self.annotations)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProposalMessage":
        return cls(
            kind=MessageKind(d["kind"]),
            round=int(d["round"]),
            sender=Party(d["sender"]),
            terms=None if d.get("terms") is None else {k: float(v) for k, v in d["terms"].items()},
            annotations=dict(d.get("annotations") or {}),
        )


@dataclass(frozen=True)
class NegotiationSession:
    """Broker-side negotiation state. Immutable; :func:`step` returns a new one."""

    params: Mapping[str, UtilityParams]
    threshold: float = DEFAULT_THRESHOLD
    max_rounds: int = DEFAULT_MAX_ROUNDS
    strategy: ConcessionStrategy = field(default_factory=LinearConcession)
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    state: State = State.IDLE
    round: int = 0
    transcript: tuple[ProposalMessage, ...] = ()
    outcome: Outcome | None = None
    agreed_terms: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.round > self.max_rounds:
            raise ValueError("round exceeds max_rounds")
        if (self.outcome is not None) != self.state.terminal:
            raise ValueError(f"outcome {self.outcome} inconsistent with state {self.state}")

    @property
    def terminal(self) -> bool:
        return self.state.terminal

    def utility(self, terms: Mapping[str, float]) -> float:
        return global_utility(terms, self.params)

    def last_proposal(self) -> ProposalMessage | None:
        for msg in reversed(self.transcript):
            if msg.kind is MessageKind.PROPOSAL:
                return msg
        return None

    def transcript_json(self) -> list[dict]:
        """Ordered messages with the broker's utility for every message carrying terms."""
        out = []
        for msg in self.transcript:
            d = msg.to_dict()
            d["utility"] = self.utility(msg.terms) if msg.terms is not None else None
            out.append(d)
        return out

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "state": self.state.value,
            "round": self.round,
            "max_rounds": self.max_rounds,
            "threshold": self.threshold,
            "strategy": self.strategy.to_dict(),
            "params": {k: p.to_dict() for k, p in self.params.items()},
            "outcome": self.outcome.value if self.outcome else None,
            "agreed_terms": dict(self.agreed_terms) if self.agreed_terms is not None else None,
            "transcript": self.transcript_json(),
        }


def _send(session: NegotiationSession, msg: ProposalMessage, **changes) -> tuple[NegotiationSession, ProposalMessage]:
    return replace(session, transcript=session.transcript + (msg,), **changes), msg


def start(session: NegotiationSession, request_terms: Mapping[str, float] | None = None):
    """Idle -> RequestSent, emitting the SLA request."""
    if session.state is not State.IDLE:
        raise ProtocolViolation(session.state, MessageKind.SLA_REQUEST, "request already sent")
    terms = dict(request_terms) if request_terms is not None else ideal_terms(session.params)
    msg = ProposalMessage(MessageKind.SLA_REQUEST, 0, Party.BROKER, terms)
    return _send(session, msg, state=State.REQUEST_SENT)


def evaluate_offer(session: NegotiationSession, proposal: ProposalMessage) -> Decision:
    """Accept above threshold; otherwise counter, or withdraw once rounds run out."""
    if session.state is not State.EVALUATING:
        raise ProtocolViolation(session.state, proposal, "not evaluating a proposal")
    if proposal.terms is None:
        raise ProtocolViolation(session.state, proposal, "proposal carries no terms")
    if session.utility(proposal.terms) >= session.threshold:
        return Decision.ACCEPT
    if session.round < session.max_rounds:
        return Decision.COUNTER
    return Decision.WITHDRAW


def generate_counter(session: NegotiationSession) -> ProposalMessage:
    """Counter-proposal conceding from the broker's ideal toward the provider's last terms."""
    last = session.last_proposal()
    if session.state is not State.EVALUATING or last is None:
        raise ProtocolViolation(session.state, MessageKind.COUNTER_PROPOSAL, "no proposal to counter")
    frac = session.strategy.fraction(session.round)
    terms = interpolate(ideal_terms(session.params), last.terms, frac)
    return ProposalMessage(MessageKind.COUNTER_PROPOSAL, session.round, Party.BROKER, terms)


def step(session: NegotiationSession, incoming: ProposalMessage):
    """Apply one provider message; returns ``(session', outgoing or None)``."""
    state = session.state
    if state.terminal:
        raise ProtocolViolation(state, incoming, "negotiation already concluded")
    if incoming.sender is not Party.PROVIDER:
        raise ProtocolViolation(state, incoming, "broker received its own message")
    if state is State.IDLE:
        raise ProtocolViolation(state, incoming, "no request sent yet")
    if session.transcript and session.transcript[-1].sender is incoming.sender:
        raise ProtocolViolation(state, incoming, "messages must alternate")

    received = replace(session, transcript=session.transcript + (incoming,))
    kind = incoming.kind

    if kind in (MessageKind.REJECT, MessageKind.WITHDRAW):
        outcome = Outcome.REJECTED if kind is MessageKind.REJECT else Outcome.WITHDRAWN
        return replace(received, state=State.FAILED, outcome=outcome), None

    if kind is MessageKind.PROPOSAL and state in (State.REQUEST_SENT, State.COUNTER_SENT):
        if session.round >= session.max_rounds:
            raise ProtocolViolation(state, incoming, "round limit reached")
        if incoming.terms.keys() != session.params.keys():
            raise ProtocolViolation(state, incoming, "proposal terms do not cover the negotiated attributes")
        rnd = session.round + 1
        evaluating = replace(received, state=State.EVALUATING, round=rnd)
        decision = evaluate_offer(evaluating, incoming)
        if decision is Decision.ACCEPT:
            msg = ProposalMessage(MessageKind.SLA_CONFIRMATION, rnd, Party.BROKER)
            return _send(evaluating, msg, state=State.CONFIRMING, agreed_terms=dict(incoming.terms))
        if decision is Decision.COUNTER:
            return _send(evaluating, generate_counter(evaluating), state=State.COUNTER_SENT)
        msg = ProposalMessage(MessageKind.WITHDRAW, rnd, Party.BROKER)
        return _send(evaluating, msg, state=State.FAILED, outcome=Outcome.MAX_ROUNDS_EXCEEDED)

    if kind is MessageKind.SLA_CONFIRMATION and state is State.CONFIRMING:
        return replace(received, state=State.AGREED, outcome=Outcome.AGREEMENT), None

    raise ProtocolViolation(state, incoming)


# -- driver --------------------------------------------------------------------------

@dataclass(frozen=True)
class NegotiationResult:
    outcome: Outcome
    session: NegotiationSession
    final_terms: Mapping[str, float] | None

    @property
    def transcript(self) -> tuple[ProposalMessage, ...]:
        return self.session.transcript

    @property
    def agreed(self) -> bool:
        return self.outcome is Outcome.AGREEMENT

    def to_dict(self) -> dict:
        d = self.session.to_dict()
        d["final_terms"] = dict(self.final_terms) if self.final_terms is not None else None
        return d


def run_negotiation(session: NegotiationSession, provider, request_terms=None, request_doc=None) -> NegotiationResult:
    """Drive the broker session against ``provider`` until both sides stop.

    ``provider`` is either an agent exposing ``open_session(request_doc)`` or
    an already opened provider session exposing ``step(message)``.
    """
    peer = provider.open_session(request_doc) if hasattr(provider, "open_session") else provider
    session, outgoing = start(session, request_terms)
    limit = 2 * session.max_rounds + 2
    while outgoing is not None:
        peer, reply = peer.step(outgoing)
        if reply is None:
            break
        session, outgoing = step(session, reply)
        if len(session.transcript) > limit:
            raise ProtocolViolation(session.state, reply, "message bound exceeded")
    if not session.terminal:
        raise ProtocolViolation(session.state, "end of conversation", "provider stopped replying")
    return NegotiationResult(session.outcome, session, session.agreed_terms)
