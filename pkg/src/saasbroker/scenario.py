"""Negotiation scenarios as JSON: broker preferences plus one simulated provider.

    {
      "attributes": {"Availability": {"direction": "utility", "alpha": 0.99, "beta": 4, "weight": 0.7}, ...},
      "threshold": 0.65, "max_rounds": 10,
      "broker_strategy": {"name": "linear", "step": 0.1},
      "provider": {"provider_id": "24", "opening_terms": {...}, "best_terms": {...},
                   "strategy": {"name": "linear", "step": 0.2}, "accept_counters": true}
    }
"""

from __future__ import annotations

from typing import Mapping

from .negotiation import (
    DEFAULT_MAX_ROUNDS,
    DEFAULT_THRESHOLD,
    NegotiationResult,
    NegotiationSession,
    UtilityParams,
    make_strategy,
    run_negotiation,
)
from .provider import ProviderAgent, agent_from_dict


def _with_step(strategy: Mapping, step) -> dict:
    out = dict(strategy)
    if out.get("name", "linear") == "constant":
        out = {"name": "linear"}
    out["step"] = float(step)
    return out


def load_scenario(d: Mapping, overrides: Mapping | None = None, session_id: str | None = None):
    """Build ``(broker_session, provider_agent)``.

    ``overrides`` may set threshold, max_rounds, delta (broker step) and
    gamma (provider step).
    """
    o = {k: v for k, v in (overrides or {}).items() if v is not None}
    params = {
        name: UtilityParams(float(a["alpha"]), float(a["beta"]), float(a["weight"]), a["direction"])
        for name, a in d["attributes"].items()
    }
    broker_strategy = dict(d.get("broker_strategy") or {"name": "linear", "step": 0.1})
    if "delta" in o:
        broker_strategy = _with_step(broker_strategy, o["delta"])
    kwargs = {}
    if session_id or d.get("session_id"):
        kwargs["session_id"] = session_id or d["session_id"]
    session = NegotiationSession(
        params=params,
        threshold=float(o.get("threshold", d.get("threshold", DEFAULT_THRESHOLD))),
        max_rounds=int(o.get("max_rounds", d.get("max_rounds", DEFAULT_MAX_ROUNDS))),
        strategy=make_strategy(broker_strategy),
        **kwargs,
    )
    p = dict(d["provider"])
    p.setdefault("directions", {name: a["direction"] for name, a in d["attributes"].items()})
    if "gamma" in o:
        p["strategy"] = _with_step(p.get("strategy") or {"name": "linear"}, o["gamma"])
    agent: ProviderAgent = agent_from_dict(p)
    return session, agent


def run_scenario(d: Mapping, overrides: Mapping | None = None, session_id: str | None = None) -> NegotiationResult:
    session, agent = load_scenario(d, overrides, session_id)
    return run_negotiation(session, agent)
