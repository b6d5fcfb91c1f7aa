"""QoS attribute vocabulary: directions, name canonicalisation, direction registry."""

from __future__ import annotations

import re
from enum import Enum
from typing import Mapping

from .errors import UnknownAttributeDirection


class Direction(str, Enum):
    """Whether consumers want an attribute maximised or minimised."""

    UTILITY = "utility"  # availability, throughput: higher is better
    COST = "cost"  # response time, price: lower is better

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, Direction):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "utility": cls.UTILITY,
            "utility-driven": cls.UTILITY,
            "benefit": cls.UTILITY,
            "max": cls.UTILITY,
            "cost": cls.COST,
            "cost-driven": cls.COST,
            "min": cls.COST,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown direction {value!r}") from None


_SEP = re.compile(r"[\s_]+")


def canonical_name(name: str) -> str:
    """Fold case and separators so "Response time", "response_time" and
    "Response-time" all refer to the same attribute."""
    return _SEP.sub("-", name.strip().lower())


DEFAULT_DIRECTIONS: dict[str, Direction] = {
    "availability": Direction.UTILITY,
    "reliability": Direction.UTILITY,
    "throughput": Direction.UTILITY,
    "response-time": Direction.COST,
    "cost": Direction.COST,
}


def resolve_direction(
    name: str, overrides: Mapping[str, "Direction | str"] | None = None
) -> Direction:
    """Look up an attribute's direction; explicit overrides win over the built-ins."""
    key = canonical_name(name)
    if overrides:
        for k, v in overrides.items():
            if canonical_name(k) == key:
                return Direction.parse(v)
    try:
        return DEFAULT_DIRECTIONS[key]
    except KeyError:
        raise UnknownAttributeDirection(
            f"no direction configured for attribute {name!r}"
        ) from None
