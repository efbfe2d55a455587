from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esgkg import patterns as pt
from esgkg.errors import GenerationError, IntegrityError, ParseError, StateError
from esgkg.gateway import ModelSpec
from esgkg.patterns import ReviewState

from conftest import all_patterns, make_pattern, scripted_gateway

MODEL = ModelSpec("scripted", "test-script")


def draft(**over):
    base = {"entityA": "Company", "action": "pollutes", "entityB": "river",
            "lookFor": ["The plant dumped waste into the river."], "ignore": ["The plant cleaned the river."]}
    base.update(over)
    return base


def test_valid_draft():
    p, problems = pt.validate_pattern(draft(), 7, 1)
    assert problems == []
    assert p.pattern_id == "p7.1" and p.review_state is ReviewState.DRAFT


@pytest.mark.parametrize("over,message", [
    ({"ignore": []}, "ignore requires ≥1 example"),
    ({"lookFor": []}, "lookFor requires ≥1 example"),
    ({"action": "  "}, "action must be non-empty"),
    ({"entityB": None}, "entityB must be non-empty"),
    ({"lookFor": "x", "ignore": ["  X "]}, "lookFor and ignore must be disjoint"),
    ({"lookFor": [1, 2]}, "lookFor must be a list of sentences"),
    ({"reviewState": "Pending"}, "unknown reviewState"),
])
def test_invalid_drafts(over, message):
    p, problems = pt.validate_pattern(draft(**over), 1, 1)
    assert p is None
    assert any(message in v for v in problems)


def test_out_of_range_ids():
    assert pt.validate_pattern(draft(), 11, 1)[0] is None
    assert pt.validate_pattern(draft(), 1, 4)[0] is None


def test_non_mapping_never_raises():
    assert pt.validate_pattern(["not", "a", "dict"]) == (None, ["pattern must be an object"])


def test_duplicate_examples_collapsed():
    p, _ = pt.validate_pattern(draft(lookFor=["A b.", "a  B.", "C."]), 1, 1)
    assert p.look_for == ("A b.", "C.")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=30).filter(str.strip), min_size=1, max_size=4),
       st.lists(st.text(min_size=1, max_size=30).filter(str.strip), min_size=1, max_size=4),
       st.sampled_from(list(ReviewState)))
def test_store_round_trip_property(look_for, ignore, state):
    p, problems = pt.validate_pattern(draft(lookFor=look_for, ignore=ignore, reviewState=state.value), 3, 2)
    if p is None:
        assert any("disjoint" in v for v in problems)
        return
    assert pt.decode_patterns(pt.encode_patterns([p])) == [p]


def test_store_files(tmp_path):
    ps = all_patterns(ReviewState.DRAFT)
    written = pt.write_store(tmp_path, ps)
    assert [w.name for w in written] == [f"p{i:02d}.jsonld" for i in range(1, 11)]
    assert pt.read_store(tmp_path) == ps


def test_store_rejects_duplicates(tmp_path):
    (tmp_path / "p01.jsonld").write_text(pt.encode_patterns([make_pattern(1, 1)]))
    (tmp_path / "p01b.jsonld").write_text(pt.encode_patterns([make_pattern(1, 1, action="other")]))
    with pytest.raises(IntegrityError, match="duplicate"):
        pt.read_store(tmp_path)


def test_corrupt_store_document(tmp_path):
    (tmp_path / "p01.jsonld").write_text("{not json")
    with pytest.raises(ParseError):
        pt.read_store(tmp_path)


# --- review ------------------------------------------------------------------------

def test_parse_review_lines():
    text = """
    # comment
    p1.1 approve
    p1.2 reject   # trailing note
    p2.3 edit {"action": "abuses"}
    * approve
    """
    decisions = pt.parse_review(text)
    assert [(d.target, d.action) for d in decisions] == [((1, 1), "approve"), ((1, 2), "reject"),
                                                         ((2, 3), "edit"), (None, "approve")]
    assert decisions[2].fields == {"action": "abuses"}


@pytest.mark.parametrize("line", ["p1.1 accept", "p1.1 edit notjson", "p1.1 edit {}", "* edit {\"action\": \"x\"}",
                                  'p1.1 edit {"colour": "red"}', "p1 approve"])
def test_parse_review_errors(line):
    with pytest.raises(ParseError) as info:
        pt.parse_review(f"# header\n{line}\n", source="review.txt")
    assert info.value.position == 2


def test_apply_review_states_and_edits():
    drafts = all_patterns(ReviewState.DRAFT)
    decisions = pt.parse_review('* approve\np1.2 reject\np2.1 edit {"action": "abuses"}\n')
    outcome = pt.apply_review(drafts, decisions)
    assert outcome.ok
    by_id = {p.pattern_id: p for p in outcome.patterns}
    assert by_id["p1.2"].review_state is ReviewState.REJECTED
    assert by_id["p2.1"].review_state is ReviewState.EDITED and by_id["p2.1"].action == "abuses"
    assert by_id["p3.3"].review_state is ReviewState.APPROVED


def test_failed_edit_leaves_pattern():
    drafts = all_patterns(ReviewState.DRAFT)
    sentence = drafts[0].look_for[0]
    outcome = pt.apply_review(drafts, pt.parse_review(f'p1.1 edit {json.dumps({"ignore": [sentence]})}'))
    assert not outcome.ok
    assert "disjoint" in outcome.violations["p1.1"][0]
    assert outcome.patterns[0] == drafts[0]


def test_unknown_pattern_in_review():
    with pytest.raises(IntegrityError, match="unknown pattern p9.9"):
        pt.apply_review(all_patterns(), pt.parse_review("p9.9 approve"))


def test_promote_all_yields_thirty():
    classes = pt.promote_all(all_patterns())
    assert len(classes) == 30
    assert len({c.iri for c in classes}) == 30
    assert all(sum(c.principle == pid for c in classes) == 3 for pid in range(1, 11))


def test_promotion_blocked_by_rejection():
    ps = all_patterns()
    ps[4] = make_pattern(2, 2, ReviewState.REJECTED)
    with pytest.raises(IntegrityError, match="principle 2 missing approved p2.2"):
        pt.promote_all(ps)


def test_merge_drafts_is_append_only():
    old = [make_pattern(1, 1, ReviewState.APPROVED)]
    new = [make_pattern(1, 1, ReviewState.DRAFT, action="changed"), make_pattern(1, 2, ReviewState.DRAFT)]
    merged = pt.merge_drafts(old, new)
    assert merged[0] == old[0] and len(merged) == 2


# --- generation --------------------------------------------------------------------

def patterns_answer(n=3, **over):
    return json.dumps({"patterns": [draft(action=f"act {i}", **over) for i in range(n)]})


def test_generate_comment(commented, principles):
    gw = scripted_gateway({"comment": {"7": "  Prevent harm\n before it happens. "}})
    assert pt.generate_comment(principles[6], gw, MODEL) == "Prevent harm before it happens."


def test_comment_length_limit(principles):
    gw = scripted_gateway({"comment": {"1": "x" * 700}})
    with pytest.raises(GenerationError, match="limit 600"):
        pt.generate_comment(principles[0], gw, MODEL)


def test_generate_patterns_requires_comment(principles):
    with pytest.raises(StateError, match="no comment"):
        pt.generate_patterns(principles[0], scripted_gateway({}), MODEL)


def test_generate_patterns_repairs_count(commented):
    gw = scripted_gateway({"patterns": {"4": [patterns_answer(2), patterns_answer(3)]}})
    out = pt.generate_patterns(commented[3], gw, MODEL)
    assert [p.pattern_id for p in out] == ["p4.1", "p4.2", "p4.3"]
    assert all(p.review_state is ReviewState.DRAFT for p in out)


def test_generate_patterns_gives_up(commented):
    gw = scripted_gateway({"patterns": {"4": patterns_answer(3, ignore=[])}})
    with pytest.raises(GenerationError, match="ignore requires"):
        pt.generate_patterns(commented[3], gw, MODEL, retries=1)
