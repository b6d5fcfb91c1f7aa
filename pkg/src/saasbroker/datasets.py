"""Bundled case-study inputs: 24 project-management SaaS offers, the consumer's
requirement document, a quality-requirements XML sample and a two-attribute
negotiation scenario."""

from __future__ import annotations

import json
from importlib import resources

from .qos import Offer, read_offers_csv
from .sla import SlaRequestDoc


def data_path(name: str):
    return resources.files("saasbroker") / "data" / name


def case_study_offers() -> list[Offer]:
    with resources.as_file(data_path("case_study_offers.csv")) as p:
        return read_offers_csv(p)[0]


def case_study_request() -> SlaRequestDoc:
    return SlaRequestDoc.from_dict(json.loads(data_path("case_study_request.json").read_text()))


def quality_requirements_xml() -> bytes:
    return data_path("quality_requirements.xml").read_bytes()


def negotiation_scenario() -> dict:
    return json.loads(data_path("negotiation_scenario.json").read_text())
