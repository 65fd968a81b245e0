"""ISO/IEC 25010:2023 quality attribute catalog, scoring rubrics, and the
attribute-relatedness map used to grade near-miss classifications."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ArgumentError, UnknownAttributeError

VALIDITY = "validity"
APPLICABILITY = "applicability"
DIMENSIONS = (VALIDITY, APPLICABILITY)


@dataclass(frozen=True)
class QualityAttribute:
    canonical_name: str
    subcharacteristics: tuple[str, ...]
    description: str


# The nine top-level characteristics of ISO/IEC 25010:2023, in the standard's
# order. Subcharacteristics feed prompt construction only; metrics depend
# solely on the nine canonical names.
_CATALOG: tuple[QualityAttribute, ...] = (
    QualityAttribute(
        "Functional Suitability",
        ("Functional Completeness", "Functional Correctness", "Functional Appropriateness"),
        "Degree to which the product provides functions that meet stated and implied needs.",
    ),
    QualityAttribute(
        "Performance Efficiency",
        ("Time Behaviour", "Resource Utilization", "Capacity"),
        "Degree to which the product performs its functions within stated time, "
        "throughput, and resource limits.",
    ),
    QualityAttribute(
        "Compatibility",
        ("Co-existence", "Interoperability"),
        "Degree to which the product exchanges information with other products and "
        "performs its functions while sharing an environment.",
    ),
    QualityAttribute(
        "Usability",
        ("Appropriateness Recognizability", "Learnability", "Operability",
         "User Error Protection", "User Engagement", "Inclusivity", "User Assistance",
         "Self-Descriptiveness"),
        "Degree to which specified users can interact with the product effectively, "
        "efficiently, and satisfactorily.",
    ),
    QualityAttribute(
        "Reliability",
        ("Faultlessness", "Availability", "Fault Tolerance", "Recoverability"),
        "Degree to which the product performs its functions under stated conditions "
        "for a stated period of time.",
    ),
    QualityAttribute(
        "Security",
        ("Confidentiality", "Integrity", "Non-Repudiation", "Accountability",
         "Authenticity", "Resistance"),
        "Degree to which the product protects information and data against "
        "unauthorized access or manipulation.",
    ),
    QualityAttribute(
        "Maintainability",
        ("Modularity", "Reusability", "Analysability", "Modifiability", "Testability"),
        "Degree of effectiveness and efficiency with which the product can be "
        "modified by its maintainers.",
    ),
    QualityAttribute(
        "Flexibility",
        ("Adaptability", "Scalability", "Installability", "Replaceability"),
        "Degree to which the product can be adapted to changes in requirements, "
        "contexts of use, and environments.",
    ),
    QualityAttribute(
        "Safety",
        ("Operational Constraint", "Risk Identification", "Fail Safe",
         "Hazard Warning", "Safe Integration"),
        "Degree to which the product avoids states that endanger human life, "
        "health, property, or the environment.",
    ),
)

CANONICAL_NAMES: tuple[str, ...] = tuple(a.canonical_name for a in _CATALOG)


def attribute_catalog() -> list[QualityAttribute]:
    """Return the nine catalog attributes in their fixed documented order."""
    return list(_CATALOG)


def _normalize(name: str) -> str:
    return " ".join(name.split()).casefold()


_BY_NORMALIZED = {_normalize(a.canonical_name): a for a in _CATALOG}


def resolve_attribute(name: str) -> QualityAttribute:
    """Match a name against the catalog, ignoring case and stray whitespace.

    No fuzzy matching: anything that is not one of the nine canonical names
    raises UnknownAttributeError carrying the offending string.
    """
    attr = _BY_NORMALIZED.get(_normalize(name))
    if attr is None:
        raise UnknownAttributeError(name)
    return attr


def is_known_attribute(name: str) -> bool:
    return _normalize(name) in _BY_NORMALIZED


@dataclass(frozen=True)
class RubricLevel:
    dimension: str
    score: int
    label: str
    definition: str


# The two five-point rubrics shown to evaluators. Applicability judges the
# fit of the assigned attribute; validity judges the NFR itself.
RUBRICS: dict[str, tuple[RubricLevel, ...]] = {
    APPLICABILITY: (
        RubricLevel(APPLICABILITY, 1, "Not Applicable",
                    "Completely unsuitable and unrelated to the NFR or FR."),
        RubricLevel(APPLICABILITY, 2, "Barely Applicable",
                    "Minimal or tangential relevance to the FR."),
        RubricLevel(APPLICABILITY, 3, "Somewhat Applicable",
                    "Moderately relevant, but with questionable fit."),
        RubricLevel(APPLICABILITY, 4, "Mostly Applicable",
                    "Strong fit with minor doubts or edge cases."),
        RubricLevel(APPLICABILITY, 5, "Perfectly Applicable",
                    "Exact and ideal match for the NFR and FR."),
    ),
    VALIDITY: (
        RubricLevel(VALIDITY, 1, "Invalid",
                    "Incoherent, irrelevant, or contradictory to the FR."),
        RubricLevel(VALIDITY, 2, "Barely Valid",
                    "Major flaws present, only partially relevant to the FR."),
        RubricLevel(VALIDITY, 3, "Partially Valid",
                    "Somewhat clear but with noticeable issues or inconsistencies."),
        RubricLevel(VALIDITY, 4, "Mostly Valid",
                    "Clear and relevant, with only minor flaws."),
        RubricLevel(VALIDITY, 5, "Fully Valid",
                    "Specific, achievable, and perfectly justified in the context of the FR."),
    ),
}


class RelatednessMap:
    """Symmetric, irreflexive set of attribute pairs considered adjacent.

    An expert choice that lands on an attribute related to the assigned one
    is graded a near miss instead of a mismatch.
    """

    def __init__(self, pairs: object):
        normalized: set[frozenset[str]] = set()
        for pair in pairs:
            names = [resolve_attribute(n).canonical_name for n in pair]
            if len(names) != 2:
                raise ArgumentError(f"relatedness pair must have two members: {pair!r}")
            if names[0] == names[1]:
                raise ArgumentError(f"attribute cannot be related to itself: {names[0]!r}")
            normalized.add(frozenset(names))
        self.related_pairs: frozenset[frozenset[str]] = frozenset(normalized)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return frozenset(pair) in self.related_pairs

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RelatednessMap) and self.related_pairs == other.related_pairs

    def __hash__(self) -> int:
        return hash(self.related_pairs)

    def to_pairs(self) -> list[list[str]]:
        return sorted(sorted(p) for p in self.related_pairs)


# Default adjacency. The first two pairs mirror observed near-miss confusions
# (performance vs reliability, flexibility vs compatibility); the rest are
# subcharacteristic-overlap judgments. Overridable from a JSON file, and every
# report that uses near-miss grading echoes the map it ran with.
DEFAULT_RELATEDNESS = RelatednessMap([
    ("Performance Efficiency", "Reliability"),
    ("Flexibility", "Compatibility"),
    ("Usability", "Functional Suitability"),
    ("Security", "Reliability"),
    ("Maintainability", "Flexibility"),
    ("Safety", "Security"),
    ("Safety", "Reliability"),
])


def are_related(a: QualityAttribute | str, b: QualityAttribute | str,
                relatedness: RelatednessMap = DEFAULT_RELATEDNESS) -> bool:
    """True when the two distinct attributes form a related pair.

    Equal attributes are an exact match, not a related pair, so a == b is an
    argument error.
    """
    name_a = a.canonical_name if isinstance(a, QualityAttribute) else resolve_attribute(a).canonical_name
    name_b = b.canonical_name if isinstance(b, QualityAttribute) else resolve_attribute(b).canonical_name
    if name_a == name_b:
        raise ArgumentError(f"are_related requires two distinct attributes, got {name_a!r} twice")
    return (name_a, name_b) in relatedness


def load_relatedness_map(path: str | Path) -> RelatednessMap:
    """Load an override map: a JSON list of two-element attribute-name arrays."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ArgumentError("relatedness map file must contain a JSON list of pairs")
    return RelatednessMap(data)
