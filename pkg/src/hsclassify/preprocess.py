"""Free-text cleanup and labeled-dataset preparation.

Shipment descriptions are typed by hand: mixed case, punctuation noise,
e-mail footers, reference numbers, misspellings, company abbreviations.
Cleaning is fully deterministic so the whole pipeline is reproducible:

  1. lowercase, drop e-mail addresses, strip characters outside
     ``[a-z0-9 space hyphen]``
  2. drop reference-number tokens (long digit runs, digit runs after
     phone/fax cue words)
  3. lemmatize by suffix rules (plural -s/-es, -ing, -ed) with a vowel
     restoration table, iterated to a fixed point so cleaning is idempotent

Dataset preparation then resolves descriptions ambiguously mapped to several
codes (the >80% majority rule), optionally groups thin classes into the
reserved ``OTHERS`` label, and z-scores the numeric features with population
statistics that are persisted for inference-time reuse.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

from .errors import HsClassifyError

OTHERS = "OTHERS"


class DatasetFormatError(HsClassifyError):
    code = "DatasetFormat"


# ---------------------------------------------------------------------------
# Text cleaning
# ---------------------------------------------------------------------------

_EMAIL_RE = re.compile(r"[a-z0-9._%+-]+@[a-z0-9.-]+\.[a-z]{2,}")
_NON_ALLOWED_RE = re.compile(r"[^a-z0-9 \-]")
_HYPHEN_RUN_RE = re.compile(r"-{2,}")

# words that flag an adjacent digit run as a phone/fax-style number
_NUMBER_CUE_WORDS = frozenset({"phone", "fax", "tel", "telephone", "mobile", "cell", "call"})

_VOWELS = set("aeiouy")

# tokens the suffix rules must never touch (domain -ing nouns, false plurals,
# and -ed stems the rules would mangle)
_KEEP_WORDS = frozenset({
    "bearing", "housing", "casing", "lining", "tubing", "piping", "coating",
    "spring", "string", "ring", "king", "ceiling", "awning", "herring",
    "sterling", "lens", "series", "species", "speed", "feed", "seed", "need",
    "breed", "hundred", "infrared", "thousand",
})

# direct lemma overrides where no suffix rule is safe
_IRREGULAR = {"gases": "gas", "men": "men", "mens": "men", "womens": "women"}

# stems produced by -ing/-ed stripping whose final 'e' must be restored
_RESTORE_E_SUFFIXES = ("at", "iz", "yz", "bl", "cl", "dl", "gl", "pl", "tl", "iv", "uc", "nc", "rc", "rg")

_DOUBLED = {"bb", "dd", "gg", "mm", "nn", "pp", "rr", "tt"}


def _has_vowel(word: str) -> bool:
    return any(ch in _VOWELS for ch in word)


def _restore(stem: str) -> str:
    if stem[-2:] in _DOUBLED:
        return stem[:-1]
    if stem.endswith(_RESTORE_E_SUFFIXES):
        return stem + "e"
    return stem


def _lemma_step(token: str) -> str:
    """One application of the suffix rules; identity when nothing fires."""
    if token in _IRREGULAR:
        return _IRREGULAR[token]
    if token in _KEEP_WORDS or len(token) < 4 or any(ch.isdigit() for ch in token):
        return token
    if token.endswith(("sses", "xes", "zes", "ches", "shes")):
        return token[:-2]
    if token.endswith("ies") and len(token) >= 5:
        return token[:-3] + "y"
    if token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    if token.endswith("ing"):
        stem = token[:-3]
        if len(stem) >= 3 and _has_vowel(stem):
            return _restore(stem)
        return token
    if token.endswith("ed"):
        stem = token[:-2]
        if len(stem) >= 3 and _has_vowel(stem):
            return _restore(stem)
        return token
    return token


def lemmatize(token: str) -> str:
    """Apply the suffix rules to a fixed point (guarantees idempotence)."""
    seen = {token}
    while True:
        nxt = _lemma_step(token)
        if nxt == token or nxt in seen:
            return nxt
        seen.add(nxt)
        token = nxt


def _is_reference_number(token: str) -> bool:
    digits = token.replace("-", "")
    return bool(digits) and digits.isdigit() and set(token) <= set("0123456789-") and len(digits) >= 7


def clean_text(raw: str) -> list[str]:
    """Clean one description into lowercase lemmatized tokens.

    Empty output is legal (all-noise input).  Idempotent: cleaning the joined
    output again returns the same tokens.
    """
    text = raw.lower()
    text = _EMAIL_RE.sub(" ", text)
    text = _NON_ALLOWED_RE.sub(" ", text)

    tokens: list[str] = []
    for piece in text.split():
        piece = _HYPHEN_RUN_RE.sub("-", piece).strip("-")
        if not piece:
            continue
        if _is_reference_number(piece):
            continue
        if (
            piece.isdigit()
            and len(piece) >= 5
            and tokens
            and tokens[-1] in _NUMBER_CUE_WORDS
        ):
            continue
        tokens.append(lemmatize(piece))
    return tokens


# ---------------------------------------------------------------------------
# Lexicon and spelling
# ---------------------------------------------------------------------------


@dataclass
class Lexicon:
    """Known-token frequencies plus company abbreviation expansions."""

    vocabulary: dict[str, int] = field(default_factory=dict)
    abbreviations: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.vocabulary = {t.lower(): int(n) for t, n in self.vocabulary.items()}
        self.abbreviations = {k.lower(): v.lower() for k, v in self.abbreviations.items()}

    @classmethod
    def from_texts(
        cls,
        token_lists,
        abbreviations: dict[str, str] | None = None,
        min_count: int = 2,
    ) -> "Lexicon":
        counts = Counter()
        for tokens in token_lists:
            counts.update(tokens)
        vocab = {t: n for t, n in counts.items() if n >= min_count and not t.isdigit()}
        return cls(vocabulary=vocab, abbreviations=abbreviations or {})

    def to_dict(self) -> dict:
        return {"vocabulary": self.vocabulary, "abbreviations": self.abbreviations}

    @classmethod
    def from_dict(cls, data: dict) -> "Lexicon":
        return cls(
            vocabulary=data.get("vocabulary", {}),
            abbreviations=data.get("abbreviations", {}),
        )


def damerau_levenshtein(a: str, b: str) -> int:
    """Edit distance counting insert/delete/substitute/adjacent-transpose."""
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return la or lb
    prev2: list[int] = []
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[lb]


def expand_abbreviations(tokens: list[str], lexicon: Lexicon) -> list[str]:
    out: list[str] = []
    for token in tokens:
        expansion = lexicon.abbreviations.get(token)
        if expansion is None:
            out.append(token)
        else:
            out.extend(lemmatize(t) for t in expansion.split())
    return out


def correct_spelling(tokens: list[str], lexicon: Lexicon, max_edit: int = 1) -> list[str]:
    """Replace out-of-vocabulary tokens (length >= 4) by the best known token.

    Best = highest corpus frequency among vocabulary tokens within edit
    distance ``max_edit``; frequency ties break lexicographically.  Tokens
    with no candidate pass through unchanged.
    """
    if not lexicon.vocabulary:
        raise HsClassifyError("spell correction needs a non-empty lexicon")
    out: list[str] = []
    for token in tokens:
        if len(token) < 4 or token in lexicon.vocabulary or token.isdigit():
            out.append(token)
            continue
        best: tuple[int, str] | None = None
        for cand, freq in lexicon.vocabulary.items():
            if abs(len(cand) - len(token)) > max_edit:
                continue
            if damerau_levenshtein(token, cand) <= max_edit:
                key = (-freq, cand)
                if best is None or key < best:
                    best = key
        out.append(best[1] if best is not None else token)
    return out


# ---------------------------------------------------------------------------
# Records and datasets
# ---------------------------------------------------------------------------


@dataclass
class RawRecord:
    description: str
    hs_code: str
    weight: float = 0.0
    value: float = 0.0


@dataclass
class CleanRecord:
    tokens: tuple[str, ...]
    hs_code: str  # digit string, or OTHERS after grouping
    weight: float = 0.0
    value: float = 0.0
    weight_z: float = 0.0
    value_z: float = 0.0

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class NumericStats:
    weight_mean: float = 0.0
    weight_std: float = 0.0
    value_mean: float = 0.0
    value_std: float = 0.0

    def z_weight(self, weight: float) -> float:
        return (weight - self.weight_mean) / self.weight_std if self.weight_std > 0 else 0.0

    def z_value(self, value: float) -> float:
        return (value - self.value_mean) / self.value_std if self.value_std > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "weight_mean": self.weight_mean,
            "weight_std": self.weight_std,
            "value_mean": self.value_mean,
            "value_std": self.value_std,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NumericStats":
        return cls(**data)


@dataclass
class Dataset:
    records: list[CleanRecord]
    numeric_stats: NumericStats = field(default_factory=NumericStats)
    others_map: dict[str, str] = field(default_factory=dict)

    @property
    def class_stats(self) -> dict[str, int]:
        counts: Counter = Counter(r.hs_code for r in self.records)
        return dict(counts)

    def to_dict(self) -> dict:
        return {
            "records": [
                {
                    "tokens": list(r.tokens),
                    "hs_code": r.hs_code,
                    "weight": r.weight,
                    "value": r.value,
                    "weight_z": r.weight_z,
                    "value_z": r.value_z,
                }
                for r in self.records
            ],
            "numeric_stats": self.numeric_stats.to_dict(),
            "others_map": dict(self.others_map),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Dataset":
        try:
            records = [
                CleanRecord(
                    tokens=tuple(r["tokens"]),
                    hs_code=r["hs_code"],
                    weight=r.get("weight", 0.0),
                    value=r.get("value", 0.0),
                    weight_z=r.get("weight_z", 0.0),
                    value_z=r.get("value_z", 0.0),
                )
                for r in data["records"]
            ]
            stats = NumericStats.from_dict(data["numeric_stats"])
        except (KeyError, TypeError) as exc:
            raise DatasetFormatError(f"bad dataset payload: {exc}") from None
        return cls(records=records, numeric_stats=stats, others_map=data.get("others_map", {}))


def resolve_ambiguous(records: list[CleanRecord]) -> list[CleanRecord]:
    """Apply the majority rule to descriptions mapped to several codes.

    If one code accounts for strictly more than 80% of a description's rows,
    keep only those rows; otherwise drop every row for that description.
    """
    by_text: dict[str, Counter] = defaultdict(Counter)
    for rec in records:
        by_text[rec.text][rec.hs_code] += 1

    keep_code: dict[str, str] = {}
    for text, counts in by_text.items():
        if len(counts) == 1:
            keep_code[text] = next(iter(counts))
            continue
        total = sum(counts.values())
        code, top = max(counts.items(), key=lambda kv: (kv[1], kv[0]))
        if top / total > 0.80:
            keep_code[text] = code

    return [r for r in records if keep_code.get(r.text) == r.hs_code]


def group_low_frequency(dataset: Dataset, min_fraction: float) -> Dataset:
    """Relabel every class whose record share is below ``min_fraction``.

    The original-code -> OTHERS mapping is kept on the dataset so evaluation
    can report the others rate.  Record count is preserved exactly.
    """
    if not 0 <= min_fraction < 1:
        raise ValueError("min_fraction must be in [0, 1)")
    total = len(dataset.records)
    if total == 0 or min_fraction == 0:
        return replace(dataset, records=list(dataset.records), others_map={})
    counts = dataset.class_stats
    grouped = {code for code, n in counts.items() if n / total < min_fraction}
    records = [
        replace(r, hs_code=OTHERS) if r.hs_code in grouped else r for r in dataset.records
    ]
    return replace(dataset, records=records, others_map={c: OTHERS for c in sorted(grouped)})


def standardize_numeric(dataset: Dataset) -> Dataset:
    """Z-score weight/value with population statistics; constants map to 0."""
    n = len(dataset.records)
    if n == 0:
        return replace(dataset, numeric_stats=NumericStats())
    w_mean = sum(r.weight for r in dataset.records) / n
    v_mean = sum(r.value for r in dataset.records) / n
    w_std = math.sqrt(sum((r.weight - w_mean) ** 2 for r in dataset.records) / n)
    v_std = math.sqrt(sum((r.value - v_mean) ** 2 for r in dataset.records) / n)
    stats = NumericStats(w_mean, w_std, v_mean, v_std)
    records = [
        replace(r, weight_z=stats.z_weight(r.weight), value_z=stats.z_value(r.value))
        for r in dataset.records
    ]
    return replace(dataset, records=records, numeric_stats=stats)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

_REQUIRED_COLUMNS = ("description", "hs_code", "weight", "value")


def _record_from_row(row: dict, line_no: int) -> RawRecord:
    try:
        return RawRecord(
            description=str(row["description"]),
            hs_code=str(row["hs_code"]).replace(".", "").strip(),
            weight=float(row.get("weight") or 0.0),
            value=float(row.get("value") or 0.0),
        )
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"row {line_no}: {exc}") from None


def load_records(text: str, delimiter: str = ",") -> list[RawRecord]:
    """Read raw records from delimited text (header row) or JSON lines."""
    stripped = text.lstrip()
    records: list[RawRecord] = []
    if stripped.startswith("{"):
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {line_no}: {exc}") from None
            records.append(_record_from_row(row, line_no))
        return records

    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    if reader.fieldnames is None or not set(_REQUIRED_COLUMNS) <= set(reader.fieldnames):
        raise DatasetFormatError(
            f"expected columns {_REQUIRED_COLUMNS}, got {reader.fieldnames}"
        )
    for line_no, row in enumerate(reader, start=2):
        records.append(_record_from_row(row, line_no))
    return records


def prepare_dataset(
    raw_records: list[RawRecord],
    abbreviations: dict[str, str] | None = None,
    spell_max_edit: int = 1,
    lexicon_min_count: int = 2,
) -> tuple[Dataset, Lexicon]:
    """Full training-side preparation: clean, correct, resolve, standardize."""
    cleaned = [clean_text(r.description) for r in raw_records]
    lexicon = Lexicon.from_texts(cleaned, abbreviations, min_count=lexicon_min_count)

    records: list[CleanRecord] = []
    for raw, tokens in zip(raw_records, cleaned):
        tokens = expand_abbreviations(tokens, lexicon)
        if lexicon.vocabulary:
            tokens = correct_spelling(tokens, lexicon, max_edit=spell_max_edit)
        if not tokens:
            continue
        records.append(
            CleanRecord(
                tokens=tuple(tokens),
                hs_code=raw.hs_code,
                weight=raw.weight,
                value=raw.value,
            )
        )

    records = resolve_ambiguous(records)
    dataset = standardize_numeric(Dataset(records=records))
    return dataset, lexicon


def clean_for_inference(
    raw: str,
    lexicon: Lexicon,
    stats: NumericStats,
    weight: float | None = None,
    value: float | None = None,
    spell_max_edit: int = 1,
) -> CleanRecord:
    """Clean one query with the training-time lexicon and numeric statistics."""
    tokens = expand_abbreviations(clean_text(raw), lexicon)
    if lexicon.vocabulary:
        tokens = correct_spelling(tokens, lexicon, max_edit=spell_max_edit)
    return CleanRecord(
        tokens=tuple(tokens),
        hs_code="",
        weight=weight or 0.0,
        value=value or 0.0,
        weight_z=stats.z_weight(weight) if weight is not None else 0.0,
        value_z=stats.z_value(value) if value is not None else 0.0,
    )
