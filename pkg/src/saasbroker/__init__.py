"""SaaS brokerage: rank provider offers on QoS, bargain the SLA terms with the
chosen provider, then check the resulting SLOs against metric feeds."""

from .attributes import Direction, canonical_name
from .monitoring import (
    ComplianceReport,
    MetricMapping,
    MetricSample,
    SampleStore,
    evaluate_compliance,
    map_metrics,
)
from .negotiation import (
    NegotiationSession,
    Outcome,
    ProposalMessage,
    UtilityParams,
    global_utility,
    run_negotiation,
    step,
    utility_cost,
    utility_gain,
)
from .provider import ProviderAgent, respond, validate_request
from .qos import (
    NormalizedMatrix,
    Offer,
    QosAttributeSpec,
    RankingTable,
    Requirement,
    aggregate_utility,
    normalize,
    select_best,
    topsis_rank,
)
from .sla import Sla, SlaRequestDoc, Slo, build_agreement, parse_sla_request_xml, to_requirement

__version__ = "0.1.0"

__all__ = [
    "ComplianceReport",
    "Direction",
    "MetricMapping",
    "MetricSample",
    "NegotiationSession",
    "NormalizedMatrix",
    "Offer",
    "Outcome",
    "ProposalMessage",
    "ProviderAgent",
    "QosAttributeSpec",
    "RankingTable",
    "Requirement",
    "SampleStore",
    "Sla",
    "SlaRequestDoc",
    "Slo",
    "UtilityParams",
    "aggregate_utility",
    "build_agreement",
    "canonical_name",
    "evaluate_compliance",
    "global_utility",
    "map_metrics",
    "normalize",
    "parse_sla_request_xml",
    "respond",
    "run_negotiation",
    "select_best",
    "step",
    "to_requirement",
    "topsis_rank",
    "utility_cost",
    "utility_gain",
    "validate_request",
]
