"""Construction of the multi-technique generation prompt and parsing of model
responses into validated NFR entries."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from . import quality
from .corpus import RequirementRecord
from .errors import ArgumentError, ResponseParseError, UnknownAttributeError

# Toggleable prompt techniques, in the fixed order their sections render.
ROLE_ASSIGNMENT = "Role Assignment"
TASK_CLARITY = "Task Clarity and Specificity"
STRUCTURED_OUTPUT = "Structured Output Format"
EXAMPLE_GUIDANCE = "Example-Based Guidance"
CONSTRAINT_ENFORCEMENT = "Constraint Enforcement"
CONTEXTUAL_GROUNDING = "Contextual Grounding"
ITERATIVE_REFINEMENT = "Iterative Refinement Instructions"
JUSTIFICATION_REQUIREMENT = "Justification Requirement"
INPUT_FLEXIBILITY = "Input Flexibility"
TONE_AND_STYLE = "Tone and Style Direction"

ALL_TECHNIQUES: tuple[str, ...] = (
    ROLE_ASSIGNMENT,
    TASK_CLARITY,
    STRUCTURED_OUTPUT,
    EXAMPLE_GUIDANCE,
    CONSTRAINT_ENFORCEMENT,
    CONTEXTUAL_GROUNDING,
    ITERATIVE_REFINEMENT,
    JUSTIFICATION_REQUIREMENT,
    INPUT_FLEXIBILITY,
    TONE_AND_STYLE,
)

BASIC_TECHNIQUES: frozenset[str] = frozenset({ROLE_ASSIGNMENT, CONTEXTUAL_GROUNDING})

OUTPUT_SCHEMA_FIELDS = ("fr_id", "attribute", "subcharacteristic", "nfr", "justification")

_SCHEMA_BLOCK = """\
Return only a JSON array in which every element has this shape:
[
  {
    "fr_id": "<id of the functional requirement>",
    "attribute": "<one of the nine quality attribute names>",
    "subcharacteristic": "<optional subcharacteristic name>",
    "nfr": "<the non-functional requirement statement>",
    "justification": "<why this NFR follows from the functional requirement>"
  }
]
Do not add prose before or after the array."""

DEFAULT_EXEMPLAR = """\
Example. For the functional requirement "FR-EX1: The system shall allow users \
to log in with a username and password." a suitable answer is:
[
  {
    "fr_id": "FR-EX1",
    "attribute": "Security",
    "subcharacteristic": "Confidentiality",
    "nfr": "Stored credentials shall be hashed with a per-user salt, and no plaintext password shall ever be written to logs or backups, verified on 100% of code paths that handle credentials.",
    "justification": "FR-EX1 introduces password handling, so the login flow must protect the credentials it collects."
  },
  {
    "fr_id": "FR-EX1",
    "attribute": "Performance Efficiency",
    "subcharacteristic": "Time Behaviour",
    "nfr": "Login shall complete within 2 seconds for 95% of attempts under a load of 100 concurrent users.",
    "justification": "FR-EX1 is an interactive entry point, so the functional requirement implies a bounded response time."
  }
]"""


@dataclass(frozen=True)
class PromptSpec:
    """Everything build_prompt needs; two equal specs yield identical bytes."""

    frs: tuple[RequirementRecord, ...]
    enabled_techniques: frozenset[str] = frozenset(ALL_TECHNIQUES)
    catalog: tuple[quality.QualityAttribute, ...] = tuple(quality.attribute_catalog())
    exemplar: str = DEFAULT_EXEMPLAR

    def __post_init__(self):
        unknown = set(self.enabled_techniques) - set(ALL_TECHNIQUES)
        if unknown:
            raise ArgumentError(f"unknown prompt techniques: {sorted(unknown)}")
        if not self.frs:
            raise ArgumentError("prompt spec requires at least one functional requirement")

    def with_frs(self, frs: tuple[RequirementRecord, ...]) -> "PromptSpec":
        return PromptSpec(frs=frs, enabled_techniques=self.enabled_techniques,
                          catalog=self.catalog, exemplar=self.exemplar)

    def fingerprint(self) -> str:
        """Stable digest of the prompt configuration and FR set."""
        payload = json.dumps({
            "techniques": sorted(self.enabled_techniques),
            "catalog": [[a.canonical_name, list(a.subcharacteristics)] for a in self.catalog],
            "exemplar": self.exemplar,
            "frs": [[r.id, r.text] for r in self.frs],
        }, sort_keys=True, ensure_ascii=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _grounding_section(catalog: tuple[quality.QualityAttribute, ...]) -> str:
    lines = ["Ground every NFR in exactly one of these nine quality attributes:"]
    for attr in catalog:
        subs = ", ".join(attr.subcharacteristics)
        lines.append(f"- {attr.canonical_name} (subcharacteristics: {subs})")
    return "\n".join(lines)


def _fr_section(frs: tuple[RequirementRecord, ...]) -> str:
    lines = ["Functional requirements:"]
    lines.extend(f"- [{r.id}] {r.text}" for r in frs)
    return "\n".join(lines)


def build_prompt(spec: PromptSpec) -> str:
    """Render the generation prompt.

    Pure function of the spec: sections appear in a fixed order, each present
    exactly when its technique is enabled, so enabling one technique inserts
    its section and leaves every other byte unchanged. The functional
    requirements themselves are always included.
    """
    enabled = spec.enabled_techniques
    sections: list[str] = []
    if ROLE_ASSIGNMENT in enabled:
        sections.append(
            "You are a software quality engineer with deep expertise in "
            "non-functional requirements and the ISO/IEC 25010:2023 quality model.")
    if TASK_CLARITY in enabled:
        sections.append(
            "Task: for each functional requirement listed below, identify the "
            "applicable ISO/IEC 25010:2023 quality attributes and generate the "
            "corresponding non-functional requirements.")
    if STRUCTURED_OUTPUT in enabled:
        sections.append(_SCHEMA_BLOCK)
    if EXAMPLE_GUIDANCE in enabled:
        sections.append(spec.exemplar)
    if CONSTRAINT_ENFORCEMENT in enabled:
        sections.append(
            "Every NFR must be specific and testable, with measurable thresholds "
            "(times, percentages, counts, or limits). Avoid vague wording such as "
            '"fast", "user-friendly", or "robust" without a quantified criterion.')
    if CONTEXTUAL_GROUNDING in enabled:
        sections.append(_grounding_section(spec.catalog))
    if ITERATIVE_REFINEMENT in enabled:
        sections.append(
            "Work through the functional requirements one at a time. For each one, "
            "consider every quality attribute in turn and emit NFRs only for the "
            "attributes that genuinely apply.")
    if JUSTIFICATION_REQUIREMENT in enabled:
        sections.append(
            "For every NFR, include a justification that explains how it follows "
            "from the specific functional requirement it is derived from, naming "
            "that requirement's id.")
    if INPUT_FLEXIBILITY in enabled:
        sections.append(
            "The list may contain any number of functional requirements; handle "
            "each one individually and completely.")
    if TONE_AND_STYLE in enabled:
        sections.append(
            "Write in formal, precise technical language appropriate for a "
            "software requirements specification.")
    sections.append(_fr_section(spec.frs))
    return "\n\n".join(sections)


@dataclass(frozen=True)
class GeneratedNfr:
    nfr_id: str
    fr_id: str
    text: str
    attribute: str
    subcharacteristic: str | None
    justification: str
    model_id: str
    raw_span: str

    def __post_init__(self):
        quality.resolve_attribute(self.attribute)
        if not self.justification.strip():
            raise ArgumentError(f"NFR {self.nfr_id!r} has an empty justification")
        if not self.text.strip():
            raise ArgumentError(f"NFR {self.nfr_id!r} has empty text")

    def to_dict(self) -> dict:
        return {
            "nfr_id": self.nfr_id,
            "fr_id": self.fr_id,
            "text": self.text,
            "attribute": self.attribute,
            "subcharacteristic": self.subcharacteristic,
            "justification": self.justification,
            "model_id": self.model_id,
            "raw_span": self.raw_span,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratedNfr":
        return cls(**{k: data.get(k) for k in (
            "nfr_id", "fr_id", "text", "attribute", "subcharacteristic",
            "justification", "model_id", "raw_span")})


@dataclass(frozen=True)
class EntryRejection:
    fr_id: str | None
    reason: str
    raw_span: str

    def to_dict(self) -> dict:
        return {"fr_id": self.fr_id, "reason": self.reason, "raw_span": self.raw_span}


@dataclass
class ParseContext:
    """Run-scoped facts needed to validate a response and mint NFR ids."""

    fr_ids: frozenset[str]
    model_id: str
    next_ordinal: dict[str, int] = field(default_factory=dict)

    def mint_id(self, fr_id: str) -> str:
        ordinal = self.next_ordinal.get(fr_id, 1)
        self.next_ordinal[fr_id] = ordinal + 1
        return f"{self.model_id}/{fr_id}/{ordinal}"


@dataclass
class ParsedResponse:
    entries: list[GeneratedNfr]
    rejections: list[EntryRejection]
    raw: str


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)\s*```", re.IGNORECASE | re.DOTALL)


def _extract_array(raw: str) -> list:
    candidates: list[str] = []
    fence = _FENCE_RE.search(raw)
    if fence:
        candidates.append(fence.group(1))
    candidates.append(raw.strip())
    decoder = json.JSONDecoder()
    for candidate in candidates:
        start = candidate.find("[")
        if start == -1:
            continue
        try:
            parsed, _ = decoder.raw_decode(candidate[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, list):
            return parsed
    raise ResponseParseError("no parsable JSON array found in response", raw=raw)


def parse_llm_response(raw: str, ctx: ParseContext) -> ParsedResponse:
    """Extract and validate the first structured block of a model response.

    Valid entries become GeneratedNfr values with ids minted per originating
    FR; invalid entries are returned per-entry with a reason. A response with
    no structured block at all raises ResponseParseError carrying the raw
    text, while a block whose entries are all invalid still parses (empty
    entry list, full rejection list).
    """
    entries: list[GeneratedNfr] = []
    rejections: list[EntryRejection] = []
    for item in _extract_array(raw):
        span = json.dumps(item, ensure_ascii=False, sort_keys=True)
        if not isinstance(item, dict):
            rejections.append(EntryRejection(None, "entry is not an object", span))
            continue
        fr_id = item.get("fr_id")
        if not isinstance(fr_id, str) or fr_id not in ctx.fr_ids:
            rejections.append(EntryRejection(
                fr_id if isinstance(fr_id, str) else None,
                f"unknown fr_id: {fr_id!r}", span))
            continue
        text = item.get("nfr")
        if not isinstance(text, str) or not text.strip():
            rejections.append(EntryRejection(fr_id, "empty NFR text", span))
            continue
        attribute = item.get("attribute")
        try:
            canonical = quality.resolve_attribute(attribute if isinstance(attribute, str) else "")
        except UnknownAttributeError:
            rejections.append(EntryRejection(fr_id, f"unknown attribute: {attribute!r}", span))
            continue
        justification = item.get("justification")
        if not isinstance(justification, str) or not justification.strip():
            rejections.append(EntryRejection(fr_id, "empty justification", span))
            continue
        sub = item.get("subcharacteristic")
        if sub is not None and not isinstance(sub, str):
            rejections.append(EntryRejection(fr_id, "subcharacteristic must be a string", span))
            continue
        entries.append(GeneratedNfr(
            nfr_id=ctx.mint_id(fr_id),
            fr_id=fr_id,
            text=text.strip(),
            attribute=canonical.canonical_name,
            subcharacteristic=sub.strip() if isinstance(sub, str) and sub.strip() else None,
            justification=justification.strip(),
            model_id=ctx.model_id,
            raw_span=span,
        ))
    return ParsedResponse(entries=entries, rejections=rejections, raw=raw)


def serialize_entries(entries: list[GeneratedNfr]) -> str:
    """Render entries back into the structured-output contract."""
    payload = [{
        "fr_id": e.fr_id,
        "attribute": e.attribute,
        "subcharacteristic": e.subcharacteristic,
        "nfr": e.text,
        "justification": e.justification,
    } for e in entries]
    return json.dumps(payload, ensure_ascii=False, indent=2)


_THRESHOLD_RE = re.compile(r"\d|[%<>]|≤|≥|\bat least\b|\bat most\b|\bno more than\b|\bwithin\b",
                           re.IGNORECASE)


def lint_nfr(nfr: GeneratedNfr) -> list[str]:
    """Non-blocking advisories about vagueness and weak traceability."""
    advisories: list[str] = []
    if not _THRESHOLD_RE.search(nfr.text):
        advisories.append("missing measurable threshold: text contains no numeral or comparator")
    just = nfr.justification.casefold()
    mentions_fr = (nfr.fr_id.casefold() in just
                   or "functional requirement" in just
                   or re.search(r"\bfr\b", just) is not None)
    if not mentions_fr:
        advisories.append("justification does not reference the originating functional requirement")
    return advisories
