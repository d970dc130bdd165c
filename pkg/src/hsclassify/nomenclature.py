"""Tariff nomenclature: validated HS codes and the parsed schedule tree.

The schedule source is line-oriented text in the shape customs publications
are distributed in:

    8414<TAB>Air or vacuum pumps, ... ; parts thereof
    8414.10.00<TAB>00 Vacuum pumps
    8414.30<TAB>Compressors of a kind used in refrigerating equipment ...:
    <TAB>Screw type:
    <TAB>10 Not exceeding 200 horsepower

Three line kinds:
  * ``CODE<TAB>DESCRIPTION`` — a coded node.  The description may start with
    a two-digit statistical suffix (``00 Vacuum pumps``).
  * an indented line starting with a two-digit suffix — a statistical
    sub-line, attached beneath the nearest coded node (via the open grouping
    line, if any).
  * any other indented line — a grouping/context line.  The normative form
    ends with ``:``; bare continuation text is accepted the same way because
    flattened publications drop the colon on some group rows.

Coded nodes nest by digit-prefix (dots stripped for indexing, kept for
display).  Classification stops at 6 digits; deeper lines are retained
because their text enriches the 6-digit descriptions.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .errors import HsClassifyError


class MalformedLineError(HsClassifyError):
    code = "MalformedLine"

    def __init__(self, line_no: int, line: str, reason: str):
        super().__init__(f"line {line_no}: {reason}: {line!r}")
        self.line_no = line_no


class OrphanCodeError(HsClassifyError):
    code = "OrphanCode"


class DuplicateCodeError(HsClassifyError):
    code = "DuplicateCode"


class UnknownCodeError(HsClassifyError):
    code = "UnknownCode"


class LevelNotBelowParentError(HsClassifyError):
    code = "LevelNotBelowParent"


class InvalidCodeError(HsClassifyError):
    code = "InvalidCode"


class Level(enum.IntEnum):
    """Depth of an HS code, measured in digits."""

    CHAPTER = 2
    HEADING = 4
    SUBHEADING = 6
    FULL = 8


_CODE_RE = re.compile(r"^[0-9]{2}(?:\.?[0-9]{2}){0,3}$")


@dataclass(frozen=True)
class HsCode:
    """A validated 2/4/6/8-digit HS code (dots stripped)."""

    digits: str

    def __post_init__(self):
        if not self.digits.isdigit() or len(self.digits) not in (2, 4, 6, 8):
            raise InvalidCodeError(f"not a 2/4/6/8-digit code: {self.digits!r}")

    @classmethod
    def parse(cls, text: str) -> "HsCode":
        """Parse a dotted or undotted code string ('8414.30.40' or '84143040')."""
        cleaned = text.strip()
        if not _CODE_RE.match(cleaned):
            raise InvalidCodeError(f"not a valid HS code: {text!r}")
        return cls(cleaned.replace(".", ""))

    @property
    def level(self) -> Level:
        return Level(len(self.digits))

    def truncate(self, level: Level) -> "HsCode":
        """Ancestor code at a shallower level."""
        if level > self.level:
            raise InvalidCodeError(f"cannot truncate {self.digits} to level {int(level)}")
        return HsCode(self.digits[: int(level)])

    def is_prefix_of(self, other: "HsCode") -> bool:
        return other.digits.startswith(self.digits) and len(other.digits) > len(self.digits)

    @property
    def display(self) -> str:
        """Dotted rendering: 84143040 -> 8414.30.40."""
        parts = [self.digits[i : i + 2] for i in range(0, len(self.digits), 2)]
        if len(parts) <= 2:
            return "".join(parts)
        return parts[0] + parts[1] + "." + ".".join(parts[2:])

    def __str__(self) -> str:
        return self.digits


@dataclass
class TariffNode:
    """One schedule line: a coded node, a statistical sub-line, or a grouping line.

    ``code`` is the display form of the HS code for coded nodes, the bare
    two-digit suffix for statistical sub-lines, and ``""`` for grouping lines.
    """

    code: str
    description: str
    statistical_suffix: str | None = None
    children: list["TariffNode"] = field(default_factory=list)

    @property
    def hs_code(self) -> HsCode | None:
        """The validated HS code, or None for grouping/statistical lines.

        Statistical sub-lines store their own suffix as both ``code`` and
        ``statistical_suffix``; chapter nodes never carry a suffix, so the
        pair is unambiguous.
        """
        if not self.code or self.code == self.statistical_suffix:
            return None
        try:
            return HsCode.parse(self.code)
        except InvalidCodeError:
            return None

    def to_dict(self) -> dict:
        out: dict = {"code": self.code, "description": self.description}
        if self.statistical_suffix is not None:
            out["statistical_suffix"] = self.statistical_suffix
        out["children"] = [c.to_dict() for c in self.children]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TariffNode":
        return cls(
            code=data.get("code", ""),
            description=data["description"],
            statistical_suffix=data.get("statistical_suffix"),
            children=[cls.from_dict(c) for c in data.get("children", [])],
        )


@dataclass
class TariffSchedule:
    """Parsed nomenclature tree plus a digits -> node index over coded nodes."""

    roots: list[TariffNode] = field(default_factory=list)
    index: dict[str, TariffNode] = field(default_factory=dict)

    def lookup(self, code: HsCode | str) -> TariffNode:
        digits = code.digits if isinstance(code, HsCode) else HsCode.parse(code).digits
        node = self.index.get(digits)
        if node is None:
            raise UnknownCodeError(f"code {digits} not in schedule")
        return node

    def __contains__(self, code) -> bool:
        digits = code.digits if isinstance(code, HsCode) else str(code).replace(".", "")
        return digits in self.index

    def to_json(self) -> str:
        return json.dumps(
            {"roots": [r.to_dict() for r in self.roots]},
            sort_keys=True,
            ensure_ascii=False,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "TariffSchedule":
        data = json.loads(text)
        roots = [TariffNode.from_dict(r) for r in data.get("roots", [])]
        return _assemble(roots)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_SUFFIX_RE = re.compile(r"^([0-9]{2})\s+(.*)$")


def _split_suffix(desc: str) -> tuple[str | None, str]:
    m = _SUFFIX_RE.match(desc)
    if m:
        return m.group(1), m.group(2).strip()
    return None, desc.strip()


def _assemble(roots: list[TariffNode]) -> TariffSchedule:
    """Build the digit index and check uniqueness/prefix invariants."""
    schedule = TariffSchedule(roots=roots)

    def walk(node: TariffNode):
        hs = node.hs_code
        if hs is not None:
            if hs.digits in schedule.index:
                raise DuplicateCodeError(f"code {hs.digits} appears twice")
            schedule.index[hs.digits] = node
        for child in node.children:
            walk(child)

    for root in roots:
        walk(root)
    return schedule


def parse_schedule(text: str) -> TariffSchedule:
    """Parse schedule text into a validated tree.

    Raises MalformedLineError, OrphanCodeError or DuplicateCodeError; an
    empty input yields an empty schedule.
    """
    roots: list[TariffNode] = []
    stack: list[tuple[HsCode, TariffNode]] = []  # open coded ancestry
    group: TariffNode | None = None  # open grouping line under stack top

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        indented = raw[0] in (" ", "\t")
        line = raw.strip()

        if not indented:
            if "\t" not in raw:
                raise MalformedLineError(line_no, raw, "expected CODE<TAB>DESCRIPTION")
            code_text, _, desc = raw.partition("\t")
            code_text = code_text.strip()
            try:
                hs = HsCode.parse(code_text)
            except InvalidCodeError:
                raise MalformedLineError(line_no, raw, "invalid code") from None
            if hs.level == Level.CHAPTER:
                suffix, cleaned = None, desc.strip()
            else:
                suffix, cleaned = _split_suffix(desc)
            if not cleaned:
                raise MalformedLineError(line_no, raw, "empty description")
            node = TariffNode(code=code_text, description=cleaned.rstrip(":").strip(),
                              statistical_suffix=suffix)
            while stack and not stack[-1][0].is_prefix_of(hs):
                stack.pop()
            if stack:
                stack[-1][1].children.append(node)
            elif hs.level > Level.HEADING:
                raise OrphanCodeError(
                    f"line {line_no}: {hs.digits} has no parent heading in the file"
                )
            else:
                roots.append(node)
            stack.append((hs, node))
            group = None
            continue

        # indented: statistical sub-line or grouping/context line
        if not stack:
            raise OrphanCodeError(f"line {line_no}: indented line before any coded line")
        parent = stack[-1][1]
        suffix, cleaned = _split_suffix(line)
        if suffix is not None:
            node = TariffNode(code=suffix, description=cleaned.rstrip(":").strip(),
                              statistical_suffix=suffix)
            if not node.description:
                raise MalformedLineError(line_no, raw, "empty description")
            (group or parent).children.append(node)
        else:
            cleaned = cleaned.rstrip(":").strip()
            if not cleaned:
                raise MalformedLineError(line_no, raw, "empty grouping line")
            group = TariffNode(code="", description=cleaned)
            parent.children.append(group)

    return _assemble(roots)


def load_schedule(text: str) -> TariffSchedule:
    """Accept either schedule text or the canonical JSON tree."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return TariffSchedule.from_json(text)
    return parse_schedule(text)


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------


def _context_path(schedule: TariffSchedule, target: str) -> list[str]:
    """Descriptions along the path from the heading-level ancestor to `target`.

    Includes grouping-line text between coded ancestors.  Ancestors above
    heading level (chapters) are excluded: chapter captions are category
    labels, not product text.
    """
    found: list[list[str]] = []

    def walk(node: TariffNode, trail: list[str]):
        hs = node.hs_code
        here = trail + [node.description]
        if hs is not None and hs.digits == target:
            found.append(here)
            return
        for child in node.children:
            walk(child, here)

    for root in roots_at_or_below_heading(schedule):
        walk(root, [])
        if found:
            break
    return found[0] if found else []


def roots_at_or_below_heading(schedule: TariffSchedule) -> list[TariffNode]:
    """Heading-level subtree roots: headings themselves, or each chapter's headings."""
    out: list[TariffNode] = []
    for root in schedule.roots:
        hs = root.hs_code
        if hs is not None and hs.level == Level.CHAPTER:
            out.extend(c for c in root.children if c.hs_code is not None)
        else:
            out.append(root)
    return out


def describe(schedule: TariffSchedule, code: HsCode) -> str:
    """A code's own description text.

    Implied codes (841410 written only as 8414.10.00) take the text of their
    shallowest coded descendant.
    """
    if code.digits in schedule.index:
        return schedule.index[code.digits].description
    descendants = [
        d for d in schedule.index if len(d) > len(code.digits) and d.startswith(code.digits)
    ]
    if not descendants:
        raise UnknownCodeError(f"code {code.display} is not in the schedule")
    own = min(descendants, key=lambda d: (len(d), d))
    return schedule.index[own].description


def codes_under(
    schedule: TariffSchedule, parent: HsCode, level: Level
) -> list[tuple[HsCode, str]]:
    """All descendant classes of `parent` at `level`, with composed descriptions.

    A code at the requested level may exist as an explicit node or be implied
    by deeper lines only: 8414.10.00 implies subheading 841410.  The composed
    description prepends the heading text and every grouping/intermediate text
    on the path, so "Other" lines stay meaningful.
    """
    parent_node = schedule.lookup(parent)
    if level <= parent.level:
        raise LevelNotBelowParentError(
            f"level {int(level)} is not below parent level {int(parent.level)}"
        )

    # collect coded descendants of parent grouped by their `level`-digit prefix
    groups: dict[str, list[HsCode]] = {}

    def walk(node: TariffNode):
        hs = node.hs_code
        if hs is not None and hs.digits != parent.digits and len(hs.digits) >= int(level):
            groups.setdefault(hs.digits[: int(level)], []).append(hs)
        for child in node.children:
            walk(child)

    walk(parent_node)

    results: list[tuple[HsCode, str]] = []
    for prefix in sorted(groups):
        target = HsCode(prefix)
        if prefix in schedule.index:
            own = prefix
        else:
            # implied class: represented by its shallowest coded descendant
            own = min(groups[prefix], key=lambda c: (len(c.digits), c.digits)).digits
        path = _context_path(schedule, own)
        composed = "; ".join(p for p in path if p)
        results.append((target, composed))
    return results
