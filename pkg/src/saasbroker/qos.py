"""QoS-aware ranking of provider offerings.

Two rankers share the same inputs: a list of :class:`Offer` (one raw QoS
vector per provider), the consumer's :class:`Requirement`, and the attribute
specs carrying direction and weight.

``select_best`` min-max normalises every attribute over the offers *and* the
requirement, then scores each offer by the weighted sum of its normalised
values. ``topsis_rank`` ranks the same offers by relative closeness to the
ideal solution.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .attributes import Direction, canonical_name
from .errors import (
    AttributeMismatch,
    DegenerateColumn,
    EmptyOfferSet,
    NonFiniteValue,
    TooFewOffers,
    WeightSumError,
)

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class QosAttributeSpec:
    name: str
    direction: Direction
    unit: str = ""
    weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        if not 0.0 <= self.weight <= 1.0:
            raise WeightSumError(f"weight of {self.name!r} outside [0, 1]: {self.weight}")


@dataclass(frozen=True)
class Offer:
    provider_id: str
    values: Mapping[str, float]


@dataclass(frozen=True)
class Requirement:
    values: Mapping[str, float]


@dataclass(frozen=True)
class NormalizedMatrix:
    attributes: tuple[str, ...]
    rows: dict[str, dict[str, float]]
    requirement_row: dict[str, float]
    bounds: dict[str, tuple[float, float]]

    def satisfaction(self) -> dict[str, dict[str, bool]]:
        """Per provider and attribute: does the offer meet the requirement?"""
        return {
            pid: {a: row[a] >= self.requirement_row[a] for a in self.attributes}
            for pid, row in self.rows.items()
        }


class RankingMethod(str, Enum):
    WEIGHTED_UTILITY = "weighted_utility"
    TOPSIS = "topsis"


@dataclass(frozen=True)
class RankEntry:
    provider_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankingTable:
    entries: tuple[RankEntry, ...]
    method: RankingMethod
    matrix: NormalizedMatrix | None = field(default=None, compare=False, repr=False)

    @property
    def best(self) -> RankEntry:
        return self.entries[0]

    def scores(self) -> dict[str, float]:
        return {e.provider_id: e.score for e in self.entries}

    def to_dict(self, percent: bool = False) -> dict:
        scale = 100.0 if percent else 1.0
        return {
            "method": self.method.value,
            "entries": [
                {"provider_id": e.provider_id, "score": e.score * scale, "rank": e.rank}
                for e in self.entries
            ],
        }


def provider_sort_key(provider_id: str):
    """Ascending provider id, numeric ids compared as numbers."""
    text = str(provider_id)
    return (0, int(text), text) if text.isdigit() else (1, 0, text)


def check_specs(specs: Sequence[QosAttributeSpec], require_weights: bool = True) -> None:
    names = [canonical_name(s.name) for s in specs]
    if len(set(names)) != len(names):
        raise AttributeMismatch(f"duplicate attribute names in {[s.name for s in specs]}")
    if require_weights:
        total = math.fsum(s.weight for s in specs)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise WeightSumError(f"attribute weights sum to {total!r}, expected 1")


def _vector(values: Mapping[str, float], specs: Sequence[QosAttributeSpec], owner: str) -> list[float]:
    lookup = {canonical_name(k): v for k, v in values.items()}
    wanted = [canonical_name(s.name) for s in specs]
    missing = [s.name for s, key in zip(specs, wanted) if key not in lookup]
    extra = sorted(set(lookup) - set(wanted))
    if missing or extra:
        raise AttributeMismatch(f"{owner}: missing {missing}, unexpected {extra}")
    out = []
    for spec, key in zip(specs, wanted):
        v = float(lookup[key])
        if not math.isfinite(v):
            raise NonFiniteValue(f"{owner}: {spec.name} = {v}")
        out.append(v)
    return out


def _minmax(column: np.ndarray, lo: float, hi: float, direction: Direction) -> np.ndarray:
    if hi == lo:
        # nobody differs on this attribute: everyone fully satisfies it
        return np.ones_like(column)
    if direction is Direction.COST:
        out = (hi - column) / (hi - lo)
    else:
        out = (column - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def normalize(
    offers: Sequence[Offer], requirement: Requirement, specs: Sequence[QosAttributeSpec]
) -> NormalizedMatrix:
    """Min-max normalise offers and requirement into [0, 1] per attribute.

    Bounds are taken over all offers together with the requirement, so a
    requirement outside the offered range still lands in [0, 1]. Cost-driven
    attributes are flipped so that 1 is always the most desirable value.
    """
    if not offers:
        raise EmptyOfferSet("no offers to normalise")
    check_specs(specs, require_weights=False)
    X = np.array([_vector(o.values, specs, f"offer {o.provider_id}") for o in offers])
    c = np.array(_vector(requirement.values, specs, "requirement"))

    names = tuple(s.name for s in specs)
    Q = np.empty_like(X)
    cn = np.empty_like(c)
    bounds = {}
    for j, spec in enumerate(specs):
        hi = float(max(X[:, j].max(), c[j]))
        lo = float(min(X[:, j].min(), c[j]))
        bounds[spec.name] = (lo, hi)
        Q[:, j] = _minmax(X[:, j], lo, hi, spec.direction)
        cn[j] = _minmax(c[j : j + 1], lo, hi, spec.direction)[0]

    rows = {str(o.provider_id): dict(zip(names, map(float, Q[i]))) for i, o in enumerate(offers)}
    if len(rows) != len(offers):
        raise AttributeMismatch("duplicate provider ids in offer set")
    return NormalizedMatrix(names, rows, dict(zip(names, map(float, cn))), bounds)


def aggregate_utility(normalized_row: Mapping[str, float], specs: Sequence[QosAttributeSpec]) -> float:
    """Weighted combined level of satisfaction of one normalised offer."""
    check_specs(specs)
    return math.fsum(s.weight * normalized_row[s.name] for s in specs)


def _ranked(scores: Mapping[str, float], method: RankingMethod, matrix=None) -> RankingTable:
    order = sorted(scores, key=lambda pid: (-scores[pid], provider_sort_key(pid)))
    entries = tuple(RankEntry(pid, scores[pid], i + 1) for i, pid in enumerate(order))
    return RankingTable(entries, method, matrix)


def select_best(
    offers: Sequence[Offer], requirement: Requirement, specs: Sequence[QosAttributeSpec]
) -> RankingTable:
    """Rank offers by weighted utility; ``.best`` is the selected provider."""
    check_specs(specs)
    matrix = normalize(offers, requirement, specs)
    scores = {pid: aggregate_utility(row, specs) for pid, row in matrix.rows.items()}
    return _ranked(scores, RankingMethod.WEIGHTED_UTILITY, matrix)


def topsis_scores(
    V: np.ndarray, benefit: np.ndarray
) -> np.ndarray:
    """Closeness to the ideal solution for a weighted decision matrix."""
    ideal = np.where(benefit, V.max(axis=0), V.min(axis=0))
    anti = np.where(benefit, V.min(axis=0), V.max(axis=0))
    s_plus = np.sqrt(((V - ideal) ** 2).sum(axis=1))
    s_minus = np.sqrt(((V - anti) ** 2).sum(axis=1))
    total = s_plus + s_minus
    # total == 0 only when every alternative equals the ideal
    with np.errstate(invalid="ignore", divide="ignore"):
        cis = np.where(total > 0, s_minus / np.where(total > 0, total, 1.0), 1.0)
    return np.clip(cis, 0.0, 1.0)


def topsis_rank(
    offers: Sequence[Offer],
    requirement: Requirement | None,
    specs: Sequence[QosAttributeSpec],
    normalization: str = "minmax",
) -> RankingTable:
    """Rank offers with TOPSIS.

    ``normalization="minmax"`` builds the decision matrix from the same
    requirement-aware min-max normalisation used by :func:`select_best`
    (all columns then point "higher is better"). ``"vector"`` is the classic
    Euclidean column normalisation of the raw values; the requirement is not
    used in that mode.
    """
    if len(offers) < 2:
        raise TooFewOffers(f"TOPSIS needs at least 2 offers, got {len(offers)}")
    check_specs(specs)
    w = np.array([s.weight for s in specs])

    if normalization == "minmax":
        if requirement is None:
            raise ValueError("min-max TOPSIS needs the consumer requirement")
        matrix = normalize(offers, requirement, specs)
        N = np.array([[matrix.rows[str(o.provider_id)][s.name] for s in specs] for o in offers])
        benefit = np.ones(len(specs), dtype=bool)
    elif normalization == "vector":
        matrix = None
        X = np.array([_vector(o.values, specs, f"offer {o.provider_id}") for o in offers])
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms == 0):
            bad = [s.name for s, n in zip(specs, norms) if n == 0]
            raise DegenerateColumn(f"all-zero column(s): {bad}")
        N = X / norms
        benefit = np.array([s.direction is Direction.UTILITY for s in specs])
    else:
        raise ValueError(f"unknown TOPSIS normalization {normalization!r}")

    cis = topsis_scores(N * w, benefit)
    scores = {str(o.provider_id): float(v) for o, v in zip(offers, cis)}
    return _ranked(scores, RankingMethod.TOPSIS, matrix)


# -- offer datasets -------------------------------------------------------------

def read_offers_csv(path: str | Path) -> tuple[list[Offer], list[str]]:
    """Read ``provider_id,<attr1>,<attr2>,...`` rows.

    Errors name the file and line number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "provider_id" or len(header) < 2:
            raise ValueError(f"{path}:1: header must be provider_id,<attr>,...")
        attrs = header[1:]
        offers = []
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise ValueError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                values = {a: float(v) for a, v in zip(attrs, row[1:])}
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
            bad = [a for a, v in values.items() if not math.isfinite(v)]
            if bad:
                raise NonFiniteValue(f"{path}:{line}: non-finite value for {bad}")
            offers.append(Offer(row[0].strip(), values))
    return offers, attrs


def offers_from_json(data: Iterable[Mapping]) -> list[Offer]:
    """Offers from ``[{"provider_id": ..., "values": {...}}, ...]``."""
    offers = []
    for i, item in enumerate(data):
        try:
            offers.append(Offer(str(item["provider_id"]), {k: float(v) for k, v in item["values"].items()}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"offer #{i}: {exc}") from None
    return offers


def read_offers(path: str | Path) -> list[Offer]:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return offers_from_json(json.loads(path.read_text()))
    return read_offers_csv(path)[0]
