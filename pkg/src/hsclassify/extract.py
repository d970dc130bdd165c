"""Rule-based entity and relationship extraction from nomenclature prose.

Tariff descriptions are short noun-heavy sentences ("Air or vacuum pumps,
air or other gas compressors and fans; ... parts thereof").  A statistical
parser is overkill and non-deterministic across versions, so tagging is a
fixed cascade: punctuation, closed-class lexicon, domain lexicon, suffix
rules, default NOUN.  Chunking then groups maximal modifier+noun runs into
entities; the tokens between two entities become the linking phrase of a
relation.  Commas, semicolons, colons and parentheses bound clauses, which
are chunked independently.

The domain lexicon and suffix rules live in a JSON rules file so tagging
mistakes can be patched without code changes; a pre-tagged ``token/TAG``
format bypasses the tagger entirely.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .errors import HsClassifyError


class NoEntitiesError(HsClassifyError):
    code = "NoEntities"


class RuleFormatError(HsClassifyError):
    code = "RuleFormat"


class Pos(str, enum.Enum):
    NOUN = "NOUN"
    PROPN = "PROPN"
    PRON = "PRON"
    ADJ = "ADJ"
    VERB = "VERB"
    ADP = "ADP"
    CCONJ = "CCONJ"
    DET = "DET"
    NUM = "NUM"
    PART = "PART"
    PUNCT = "PUNCT"
    OTHER = "OTHER"


# ---------------------------------------------------------------------------
# Lexicons and rules
# ---------------------------------------------------------------------------

_CLOSED_CLASS: dict[str, Pos] = {}
_CLOSED_CLASS.update(dict.fromkeys(
    ("of", "in", "on", "for", "with", "without", "by", "from", "to", "at",
     "into", "onto", "over", "under", "within", "between", "during", "after",
     "before", "above", "below", "than", "as", "per", "via"),
    Pos.ADP,
))
_CLOSED_CLASS.update(dict.fromkeys(("and", "or", "nor", "but"), Pos.CCONJ))
_CLOSED_CLASS.update(dict.fromkeys(
    ("a", "an", "the", "this", "that", "these", "those", "each", "every",
     "any", "some", "all", "both", "no", "such"),
    Pos.DET,
))
_CLOSED_CLASS.update(dict.fromkeys(
    ("it", "its", "they", "them", "their", "which", "who", "whom", "what",
     "whose"),
    Pos.PRON,
))
_CLOSED_CLASS.update(dict.fromkeys(("not", "whether"), Pos.PART))
_CLOSED_CLASS.update(dict.fromkeys(
    ("thereof", "therein", "thereon", "only", "also", "more", "most", "less",
     "least", "elsewhere", "specially", "wholly", "partly", "mainly",
     "principally", "solely", "nesoi"),
    Pos.OTHER,
))

# tariff vocabulary the suffix rules would mistag
_DEFAULT_LEXICON: dict[str, Pos] = {}
_DEFAULT_LEXICON.update(dict.fromkeys(
    ("other", "others", "ventilating", "recycling", "refrigerating",
     "reciprocating", "rotating", "oscillating", "wheeled", "tapered",
     "threaded", "fixed", "finished", "unfinished", "printed", "knitted",
     "crocheted", "woven", "coated", "plated", "insulated", "assembled",
     "unassembled", "corrugated", "galvanized", "alloyed", "unalloyed",
     "stuffed", "worked", "unworked"),
    Pos.ADJ,
))
_DEFAULT_LEXICON.update(dict.fromkeys(
    ("bearing", "bearings", "housing", "housings", "casing", "casings",
     "lining", "linings", "tubing", "piping", "coating", "coatings",
     "spring", "springs", "conditioning", "towing", "fishing", "printing",
     "packing", "heating", "lighting", "lightning", "welding", "wadding",
     "clothing", "bedding", "machining", "sewing", "knitting"),
    Pos.NOUN,
))

_DEFAULT_SUFFIX_RULES: list[tuple[str, Pos]] = [
    ("ing", Pos.VERB),
    ("ed", Pos.VERB),
    ("ly", Pos.OTHER),
]

_NUMERIC_RE = re.compile(r"[0-9]+(?:[./-][0-9]+)*")
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:[-/.'][a-z0-9]+)*-?|[,;:()]")
_PUNCT = frozenset(",;:()")


@dataclass
class ExtractionRuleSet:
    """Domain lexicon overrides plus ordered suffix fallbacks."""

    lexicon: dict[str, Pos] = field(default_factory=lambda: dict(_DEFAULT_LEXICON))
    suffix_rules: list[tuple[str, Pos]] = field(
        default_factory=lambda: list(_DEFAULT_SUFFIX_RULES)
    )
    optional_markers: tuple[str, ...] = ("whether or not",)

    @classmethod
    def default(cls) -> "ExtractionRuleSet":
        return cls()

    @classmethod
    def from_dict(cls, data: dict) -> "ExtractionRuleSet":
        """Rules-file contents; its lexicon overlays the built-in one."""
        try:
            lexicon = dict(_DEFAULT_LEXICON)
            lexicon.update({t.lower(): Pos(tag) for t, tag in data.get("lexicon", {}).items()})
            suffix_rules = [
                (entry["suffix"], Pos(entry["tag"])) for entry in data.get("suffix_rules", [])
            ] or list(_DEFAULT_SUFFIX_RULES)
            markers = tuple(data.get("optional_markers", ("whether or not",)))
        except (KeyError, ValueError, AttributeError) as exc:
            raise RuleFormatError(f"bad rules file: {exc}") from None
        return cls(lexicon=lexicon, suffix_rules=suffix_rules, optional_markers=markers)

    @classmethod
    def from_json(cls, text: str) -> "ExtractionRuleSet":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RuleFormatError(f"rules file is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "lexicon": {t: tag.value for t, tag in sorted(self.lexicon.items())},
            "suffix_rules": [
                {"suffix": s, "tag": tag.value} for s, tag in self.suffix_rules
            ],
            "optional_markers": list(self.optional_markers),
        }


# ---------------------------------------------------------------------------
# Tagging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    text: str
    pos: Pos
    index: int


@dataclass
class TaggedSentence:
    tokens: list[Token]
    text: str


def _tag_one(text: str, rules: ExtractionRuleSet) -> Pos:
    if text in _PUNCT:
        return Pos.PUNCT
    if text in _CLOSED_CLASS:
        return _CLOSED_CLASS[text]
    if text in rules.lexicon:
        return rules.lexicon[text]
    if _NUMERIC_RE.fullmatch(text):
        return Pos.NUM
    # hyphen compounds ending -ed/-ing act as modifiers ("foot-operated")
    if "-" in text and text.endswith(("ed", "ing")):
        return Pos.ADJ
    for suffix, tag in rules.suffix_rules:
        if text.endswith(suffix) and len(text) > len(suffix) + 1:
            return tag
    return Pos.NOUN


def pos_tag(text: str, rules: ExtractionRuleSet | None = None) -> TaggedSentence:
    """Deterministic cascade tagger; every token gets a tag."""
    rules = rules or ExtractionRuleSet.default()
    normalized = " ".join(text.lower().split())
    pieces = [p.rstrip("-") or p for p in _TOKEN_RE.findall(normalized)]
    tokens = [
        Token(text=piece, pos=_tag_one(piece, rules), index=i)
        for i, piece in enumerate(p for p in pieces if p)
    ]
    return TaggedSentence(tokens=tokens, text=text)


def parse_pretagged(text: str) -> TaggedSentence:
    """Parse ``token/TAG`` pairs, bypassing the tagger."""
    tokens: list[Token] = []
    for i, pair in enumerate(text.split()):
        word, sep, tag = pair.rpartition("/")
        if not sep or not word:
            raise RuleFormatError(f"expected token/TAG, got {pair!r}")
        try:
            pos = Pos(tag.upper())
        except ValueError:
            raise RuleFormatError(f"unknown tag {tag!r} in {pair!r}") from None
        tokens.append(Token(text=word.lower(), pos=pos, index=i))
    return TaggedSentence(tokens=tokens, text=text)


# ---------------------------------------------------------------------------
# Chunking
# ---------------------------------------------------------------------------

_ENTITY_TAGS = frozenset({Pos.NOUN, Pos.PROPN, Pos.PRON, Pos.ADJ, Pos.NUM})
_NOUNISH = frozenset({Pos.NOUN, Pos.PROPN, Pos.PRON})


@dataclass(frozen=True)
class Entity:
    text: str
    start: int
    end: int  # exclusive token index


@dataclass(frozen=True)
class Relation:
    subject: str
    link: str
    object: str
    optional: bool = False


@dataclass
class ExtractionResult:
    entities: list[Entity]
    relations: list[Relation]

    @property
    def entity_texts(self) -> list[str]:
        return [e.text for e in self.entities]

    @property
    def size(self) -> int:
        """Total element count: one per entity plus one per relation."""
        return len(self.entities) + len(self.relations)


def _split_clauses(tokens: list[Token]) -> list[list[Token]]:
    clauses: list[list[Token]] = [[]]
    for token in tokens:
        if token.pos is Pos.PUNCT:
            if clauses[-1]:
                clauses.append([])
        else:
            clauses[-1].append(token)
    return [c for c in clauses if c]


def _chunk_clause(tokens: list[Token]) -> tuple[list[Entity], list[Relation]]:
    spans: list[list[Token]] = []
    gaps: list[list[Token]] = [[]]  # gaps[i] precedes spans[i]
    current: list[Token] = []

    def close_span():
        nonlocal current
        if current:
            spans.append(current)
            gaps.append([])
            current = []

    for i, token in enumerate(tokens):
        if token.pos in _ENTITY_TAGS:
            current.append(token)
        elif (
            token.pos is Pos.CCONJ
            and current
            and i + 1 < len(tokens)
            and tokens[i + 1].pos in _ENTITY_TAGS
        ):
            # coordination inside a product phrase: "air or vacuum pumps"
            current.append(token)
        else:
            close_span()
            gaps[-1].append(token)
    close_span()

    entities: list[Entity] = []
    links: list[list[Token]] = []
    pending_gap: list[Token] = []
    for gap, span in zip(gaps, spans):
        pending_gap.extend(gap)
        while span and span[-1].pos is Pos.CCONJ:
            span = span[:-1]
        if not any(t.pos in _NOUNISH for t in span):
            # modifier- or number-only run; never an entity on its own
            continue
        if entities:
            links.append(pending_gap)
        pending_gap = []
        entities.append(
            Entity(
                text=" ".join(t.text for t in span),
                start=span[0].index,
                end=span[-1].index + 1,
            )
        )

    relations = [
        Relation(
            subject=entities[i].text,
            link=" ".join(t.text for t in links[i]),
            object=entities[i + 1].text,
        )
        for i in range(len(entities) - 1)
        if links[i]
    ]
    return entities, relations


def extract(
    tagged: TaggedSentence, rules: ExtractionRuleSet | None = None
) -> ExtractionResult:
    """Chunk a tagged sentence into entities and linking relations."""
    rules = rules or ExtractionRuleSet.default()
    entities: list[Entity] = []
    relations: list[Relation] = []
    for clause in _split_clauses(tagged.tokens):
        clause_entities, clause_relations = _chunk_clause(clause)
        entities.extend(clause_entities)
        relations.extend(clause_relations)
    if not entities:
        raise NoEntitiesError(f"no entities found in {tagged.text!r}")
    relations = [
        Relation(
            subject=r.subject,
            link=r.link,
            object=r.object,
            optional=any(marker in r.link for marker in rules.optional_markers),
        )
        for r in relations
    ]
    return ExtractionResult(entities=entities, relations=relations)


def extract_text(text: str, rules: ExtractionRuleSet | None = None) -> ExtractionResult:
    return extract(pos_tag(text, rules), rules)
