"""POS cascade and entity/relation chunking behaviour."""

from __future__ import annotations

import pytest

from hsclassify.extract import (
    ExtractionRuleSet,
    NoEntitiesError,
    Pos,
    RuleFormatError,
    extract,
    extract_text,
    parse_pretagged,
    pos_tag,
)


def tags_of(text: str, rules=None):
    sentence = pos_tag(text, rules)
    return [(t.text, t.pos) for t in sentence.tokens]


# ---------------------------------------------------------------------------
# tagging
# ---------------------------------------------------------------------------


def test_tag_air_or_vacuum_pumps():
    assert tags_of("air or vacuum pumps") == [
        ("air", Pos.NOUN),
        ("or", Pos.CCONJ),
        ("vacuum", Pos.NOUN),
        ("pumps", Pos.NOUN),
    ]


def test_tag_closed_class():
    assert tags_of("of")[0][1] is Pos.ADP
    assert tags_of("the")[0][1] is Pos.DET
    assert tags_of("not")[0][1] is Pos.PART
    assert tags_of("thereof")[0][1] is Pos.OTHER


def test_tag_incorporating_a_fan():
    assert tags_of("incorporating a fan") == [
        ("incorporating", Pos.VERB),
        ("a", Pos.DET),
        ("fan", Pos.NOUN),
    ]


def test_tag_suffix_rules_and_lexicon_overrides():
    # plain -ing/-ed fall to VERB, domain lexicon wins where listed
    assert tags_of("exceeding")[0][1] is Pos.VERB
    assert tags_of("mounted")[0][1] is Pos.VERB
    assert tags_of("bearing")[0][1] is Pos.NOUN
    assert tags_of("housing")[0][1] is Pos.NOUN
    assert tags_of("refrigerating")[0][1] is Pos.ADJ
    assert tags_of("ring")[0][1] is Pos.NOUN  # too short for the -ing rule


def test_tag_numbers_and_hyphen_compounds():
    assert tags_of("1/4")[0][1] is Pos.NUM
    assert tags_of("25.5")[0][1] is Pos.NUM
    assert tags_of("foot-operated")[0][1] is Pos.ADJ
    assert tags_of("self-contained")[0][1] is Pos.ADJ


def test_tag_punctuation_and_indices():
    sentence = pos_tag("Pumps, fans; compressors:")
    assert [(t.text, t.pos) for t in sentence.tokens] == [
        ("pumps", Pos.NOUN),
        (",", Pos.PUNCT),
        ("fans", Pos.NOUN),
        (";", Pos.PUNCT),
        ("compressors", Pos.NOUN),
        (":", Pos.PUNCT),
    ]
    assert [t.index for t in sentence.tokens] == list(range(6))


def test_tag_every_token_gets_a_tag():
    for text, pos in tags_of("zxqv blorp 77 of and"):
        assert isinstance(pos, Pos)


# ---------------------------------------------------------------------------
# rules files
# ---------------------------------------------------------------------------


def test_rules_file_overrides_lexicon():
    rules = ExtractionRuleSet.from_dict({"lexicon": {"towing": "VERB"}})
    assert tags_of("towing", rules)[0][1] is Pos.VERB
    # defaults still present for everything else
    assert tags_of("bearing", rules)[0][1] is Pos.NOUN


def test_rules_file_custom_suffixes():
    rules = ExtractionRuleSet.from_dict(
        {"suffix_rules": [{"suffix": "ous", "tag": "ADJ"}]}
    )
    assert tags_of("ferrous", rules)[0][1] is Pos.ADJ


def test_rules_file_bad_tag():
    with pytest.raises(RuleFormatError):
        ExtractionRuleSet.from_dict({"lexicon": {"pump": "NOUNISH"}})


def test_rules_file_bad_json():
    with pytest.raises(RuleFormatError):
        ExtractionRuleSet.from_json("{not json")


# ---------------------------------------------------------------------------
# pre-tagged bypass
# ---------------------------------------------------------------------------


def test_parse_pretagged():
    sentence = parse_pretagged("air/NOUN or/CCONJ vacuum/NOUN pumps/NOUN")
    assert [(t.text, t.pos) for t in sentence.tokens] == [
        ("air", Pos.NOUN),
        ("or", Pos.CCONJ),
        ("vacuum", Pos.NOUN),
        ("pumps", Pos.NOUN),
    ]


def test_parse_pretagged_slash_in_token():
    sentence = parse_pretagged("1/4/NUM horsepower/NOUN")
    assert sentence.tokens[0].text == "1/4"
    assert sentence.tokens[0].pos is Pos.NUM


def test_parse_pretagged_errors():
    with pytest.raises(RuleFormatError):
        parse_pretagged("pumps")
    with pytest.raises(RuleFormatError):
        parse_pretagged("pumps/NOUNY")


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


def test_extract_ventilating_hoods():
    result = extract_text("ventilating or recycling hoods incorporating a fan")
    assert result.entity_texts == ["ventilating or recycling hoods", "fan"]
    assert len(result.relations) == 1
    rel = result.relations[0]
    assert (rel.subject, rel.link, rel.object) == (
        "ventilating or recycling hoods",
        "incorporating a",
        "fan",
    )
    assert not rel.optional


def test_extract_single_entity_no_relations():
    result = extract_text("Vacuum pumps")
    assert result.entity_texts == ["vacuum pumps"]
    assert result.relations == []
    assert result.size == 1


def test_extract_stopwords_only_raises():
    with pytest.raises(NoEntitiesError):
        extract_text("of the")


def test_extract_compressors_heading():
    text = "Compressors of a kind used in refrigerating equipment (including air conditioning):"
    result = extract_text(text)
    assert result.entity_texts == [
        "compressors",
        "kind",
        "refrigerating equipment",
        "air conditioning",
    ]
    links = [(r.subject, r.link, r.object) for r in result.relations]
    assert links == [
        ("compressors", "of a", "kind"),
        ("kind", "used in", "refrigerating equipment"),
    ]
    assert result.size == 6


def test_extract_wheeled_chassis():
    result = extract_text("Air compressors mounted on a wheeled chassis for towing")
    assert result.entity_texts == ["air compressors", "wheeled chassis", "towing"]
    assert [r.link for r in result.relations] == ["mounted on a", "for"]
    assert result.size == 5


def test_extract_coordinated_compound_entity():
    result = extract_text("Hand- or foot-operated air pumps")
    assert result.entity_texts == ["hand or foot-operated air pumps"]


def test_extract_clause_split_on_commas():
    result = extract_text("Balls, needles and rollers")
    assert result.entity_texts == ["balls", "needles and rollers"]
    assert result.relations == []


def test_extract_number_joins_unit_noun():
    result = extract_text("Not exceeding 1/4 horsepower")
    assert result.entity_texts == ["1/4 horsepower"]


def test_extract_standalone_number_dropped():
    result = extract_text("pumps valued over 100 with filters")
    assert result.entity_texts == ["pumps", "filters"]
    assert len(result.relations) == 1


def test_extract_whether_or_not_is_optional_link():
    result = extract_text("vacuum cleaners whether or not fitted with filters")
    assert result.entity_texts == ["vacuum cleaners", "filters"]
    rel = result.relations[0]
    assert rel.link == "whether or not fitted with"
    assert rel.optional


def test_extract_parts_thereof():
    result = extract_text("fans; parts thereof")
    assert result.entity_texts == ["fans", "parts"]
    assert result.relations == []  # clause boundary blocks a relation


def test_extract_spans_ordered_and_disjoint():
    text = "Air or vacuum pumps, air or other gas compressors and fans"
    result = extract_text(text)
    assert result.entity_texts == ["air or vacuum pumps", "air or other gas compressors and fans"]
    previous_end = -1
    for entity in result.entities:
        assert entity.start >= previous_end
        assert entity.start < entity.end
        previous_end = entity.end


def test_extract_relation_count_bound():
    texts = [
        "Compressors of a kind used in refrigerating equipment",
        "ventilating or recycling hoods incorporating a fan",
        "Balls, needles and rollers",
        "Air compressors mounted on a wheeled chassis for towing",
    ]
    for text in texts:
        result = extract_text(text)
        assert len(result.relations) <= max(0, len(result.entities) - 1)


def test_extract_deterministic():
    text = "Cone and tapered roller bearings, including cone and tapered roller assemblies"
    assert extract_text(text) == extract_text(text)


def test_extract_bearings_fixture_texts():
    result = extract_text(
        "Cone and tapered roller bearings, including cone and tapered roller assemblies"
    )
    assert result.entity_texts == [
        "cone and tapered roller bearings",
        "cone and tapered roller assemblies",
    ]
    result = extract_text("Cylindrical roller bearings, including cage and roller assemblies")
    assert result.entity_texts == [
        "cylindrical roller bearings",
        "cage and roller assemblies",
    ]
